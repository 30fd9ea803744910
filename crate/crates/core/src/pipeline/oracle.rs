use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::SeparatorOutput;
use crate::error::{Error, Result};
use crate::scene::Scene;
use crate::serde_ext;
use crate::spectral::{stft, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegradationMode {
    AdditiveNoise,
    CrossTalk,
    Combined,
}

/// Controlled corruption of ground truth, standing in for separator errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub mode: DegradationMode,
    /// SNR of the additive white noise relative to each true signal; `+inf` disables it.
    #[serde(with = "serde_ext")]
    pub snr_db: f64,
    /// Fraction of the other speakers' signals leaked into each estimate.
    pub cross_talk_fraction: f64,
    pub seed: u64,
}

impl DegradationSpec {
    /// Exact ground truth.
    pub fn oracle() -> Self {
        DegradationSpec {
            mode: DegradationMode::AdditiveNoise,
            snr_db: f64::INFINITY,
            cross_talk_fraction: 0.0,
            seed: 0,
        }
    }

    pub fn additive(snr_db: f64, seed: u64) -> Self {
        DegradationSpec {
            snr_db,
            seed,
            ..Self::oracle()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::arg(format!("degradation SNR must be finite or +inf, got {}", self.snr_db)));
        }
        if !(0.0..1.0).contains(&self.cross_talk_fraction) {
            return Err(Error::arg(format!(
                "cross-talk fraction {} outside [0, 1)",
                self.cross_talk_fraction
            )));
        }
        Ok(())
    }

    fn noise_enabled(&self) -> bool {
        self.mode != DegradationMode::CrossTalk && self.snr_db.is_finite()
    }

    fn cross_talk_enabled(&self) -> bool {
        self.mode != DegradationMode::AdditiveNoise && self.cross_talk_fraction > 0.0
    }
}

/// White Gaussian noise scaled so that `||signal||^2 / ||noise||^2` is exactly `snr_db`.
pub fn noise_at_snr<R: Rng + ?Sized>(signal: &[f64], snr_db: f64, rng: &mut R) -> Vec<f64> {
    let mut noise: Vec<f64> = (0..signal.len()).map(|_| rng.sample(StandardNormal)).collect();
    let sig: f64 = signal.iter().map(|v| v * v).sum();
    let energy: f64 = noise.iter().map(|v| v * v).sum();
    let scale = if sig > 0.0 && energy > 0.0 {
        (sig / energy / 10f64.powf(snr_db / 10.0)).sqrt()
    } else {
        0.0
    };
    noise.iter_mut().for_each(|v| *v *= scale);
    noise
}

fn degrade<R: Rng + ?Sized>(truth: &[Vec<f64>], spec: &DegradationSpec, rng: &mut R) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = truth.to_vec();
    if spec.cross_talk_enabled() {
        for (c, est) in out.iter_mut().enumerate() {
            for (other, sig) in truth.iter().enumerate() {
                if other != c {
                    est.iter_mut()
                        .zip(sig)
                        .for_each(|(e, s)| *e += spec.cross_talk_fraction * s);
                }
            }
        }
    }
    if spec.noise_enabled() {
        for (est, sig) in out.iter_mut().zip(truth) {
            let n = noise_at_snr(sig, spec.snr_db, rng);
            est.iter_mut().zip(&n).for_each(|(e, v)| *e += v);
        }
    }
    out
}

/// Time-domain stage-1 estimates: ground truth corrupted per `degradation`.
pub fn oracle_signals(scene: &Scene, degradation: &DegradationSpec) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    degradation.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(degradation.seed);
    let direct = degrade(&scene.direct_path, degradation, &mut rng);
    let image = degrade(&scene.reverberant_image, degradation, &mut rng);
    Ok((direct, image))
}

/// Separator stand-in: STFTs of the (possibly corrupted) true direct paths and images.
pub fn oracle_separate(
    scene: &Scene,
    degradation: &DegradationSpec,
    config: &StftConfig,
) -> Result<SeparatorOutput> {
    let (direct, image) = oracle_signals(scene, degradation)?;
    let to_spec = |xs: &[Vec<f64>]| xs.iter().map(|x| stft(x, config)).collect::<Result<Vec<_>>>();
    SeparatorOutput::new(to_spec(&direct)?, to_spec(&image)?)
}
