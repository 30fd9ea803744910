//! SI-SDR, low-energy SI-SDR (SI-SDR-LE) and energy-quantile sweeps.
//!
//! SI-SDR-LE keeps only the T-F units whose reference energy does not exceed
//! a quantile of the reference's per-unit energies, applies that binary mask
//! to both estimate and reference, resynthesises both and scores the result.
//! Low quantiles isolate weak regions such as late reverberation.

use std::fmt::Write as _;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::best_permutation;
use crate::scene::Scene;
use crate::spectral::{istft, stft, ComplexSpectrogram, StftConfig};

/// Scores are clipped to `[-SI_SDR_CAP_DB, SI_SDR_CAP_DB]`.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// Scale-invariant signal-to-distortion ratio in dB.
pub fn si_sdr(est: &[f64], reference: &[f64]) -> Result<f64> {
    if est.len() != reference.len() {
        return Err(Error::shape(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    let ref_energy: f64 = reference.iter().map(|r| r * r).sum();
    if ref_energy == 0.0 {
        return Err(Error::arg("SI-SDR reference is identically zero"));
    }
    let dot: f64 = est.iter().zip(reference).map(|(e, r)| e * r).sum();
    let alpha = dot / ref_energy;
    let target = alpha * alpha * ref_energy;
    let distortion: f64 = est
        .iter()
        .zip(reference)
        .map(|(e, r)| (e - alpha * r).powi(2))
        .sum();
    Ok(if distortion == 0.0 {
        SI_SDR_CAP_DB
    } else if target == 0.0 {
        -SI_SDR_CAP_DB
    } else {
        (10.0 * (target / distortion).log10()).clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB)
    })
}

/// Nearest-rank quantile: the `ceil(q n)`-th smallest value.
pub fn nearest_rank(values: &[f64], quantile: f64) -> Result<f64> {
    check_quantile(quantile)?;
    if values.is_empty() {
        return Err(Error::Empty("quantile input"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((quantile * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

fn check_quantile(quantile: f64) -> Result<()> {
    if quantile > 0.0 && quantile <= 1.0 {
        Ok(())
    } else {
        Err(Error::arg(format!("quantile {quantile} outside (0, 1]")))
    }
}

/// Binary low-energy mask over the reference's T-F units: `true` (kept) where
/// `|ref(t,f)|^2` is at or below the quantile threshold.
pub fn low_energy_mask(reference: &ComplexSpectrogram, quantile: f64) -> Result<Vec<bool>> {
    let energies: Vec<f64> = reference.data().iter().map(|z| z.norm_sqr()).collect();
    let threshold = nearest_rank(&energies, quantile)?;
    Ok(energies.iter().map(|e| *e <= threshold).collect())
}

fn apply_mask(spec: &ComplexSpectrogram, mask: &[bool]) -> ComplexSpectrogram {
    let mut out = spec.clone();
    out.data_mut()
        .iter_mut()
        .zip(mask)
        .filter(|(_, keep)| !**keep)
        .for_each(|(z, _)| *z = Complex64::new(0.0, 0.0));
    out
}

/// Where the masked signals are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LeDomain {
    /// Resynthesise the masked spectrograms and compare waveforms.
    #[default]
    Time,
    /// Compare the masked coefficients directly (real and imaginary parts stacked).
    TimeFrequency,
}

/// SI-SDR on low-energy T-F units, compared in the time domain.
pub fn si_sdr_le(est: &[f64], reference: &[f64], quantile: f64, config: &StftConfig) -> Result<f64> {
    si_sdr_le_in(est, reference, quantile, config, LeDomain::Time)
}

pub fn si_sdr_le_in(
    est: &[f64],
    reference: &[f64],
    quantile: f64,
    config: &StftConfig,
    domain: LeDomain,
) -> Result<f64> {
    check_quantile(quantile)?;
    if est.len() != reference.len() {
        return Err(Error::shape(format!(
            "estimate has {} samples, reference {}",
            est.len(),
            reference.len()
        )));
    }
    let ref_spec = stft(reference, config)?;
    let est_spec = stft(est, config)?;
    let mask = low_energy_mask(&ref_spec, quantile)?;
    let ref_masked = apply_mask(&ref_spec, &mask);
    let est_masked = apply_mask(&est_spec, &mask);
    match domain {
        LeDomain::Time => {
            let n = reference.len();
            si_sdr(&istft(&est_masked, config, n)?, &istft(&ref_masked, config, n)?)
        }
        LeDomain::TimeFrequency => {
            let flat = |s: &ComplexSpectrogram| -> Vec<f64> {
                s.data().iter().flat_map(|z| [z.re, z.im]).collect()
            };
            si_sdr(&flat(&est_masked), &flat(&ref_masked))
        }
    }
}

/// SI-SDR-LE of several systems at several quantiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileSweep {
    pub quantiles: Vec<f64>,
    pub systems: Vec<String>,
    /// `values[s][q]`: mean SI-SDR-LE over speakers of system `s` at quantile `q`.
    pub values: Vec<Vec<f64>>,
}

impl QuantileSweep {
    /// Per-quantile improvement of system `a` over system `b` in dB.
    pub fn improvement(&self, a: &str, b: &str) -> Option<Vec<f64>> {
        let ia = self.systems.iter().position(|s| s == a)?;
        let ib = self.systems.iter().position(|s| s == b)?;
        Some(
            self.values[ia]
                .iter()
                .zip(&self.values[ib])
                .map(|(x, y)| x - y)
                .collect(),
        )
    }

    /// Element-wise mean of sweeps with identical systems and quantiles.
    pub fn mean(sweeps: &[QuantileSweep]) -> Result<QuantileSweep> {
        let first = sweeps.first().ok_or(Error::Empty("sweep list"))?;
        let mut acc = first.clone();
        for s in &sweeps[1..] {
            if s.systems != first.systems || s.quantiles != first.quantiles {
                return Err(Error::shape("sweeps over different systems or quantiles"));
            }
            for (row, other) in acc.values.iter_mut().zip(&s.values) {
                row.iter_mut().zip(other).for_each(|(a, b)| *a += b);
            }
        }
        let n = sweeps.len() as f64;
        acc.values.iter_mut().flatten().for_each(|v| *v /= n);
        Ok(acc)
    }

    /// `system,quantile,si_sdr_le_db`, one row per system and quantile.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("system,quantile,si_sdr_le_db\n");
        for (s, row) in self.systems.iter().zip(&self.values) {
            for (q, v) in self.quantiles.iter().zip(row) {
                let _ = writeln!(out, "{s},{q},{v:.6}");
            }
        }
        out
    }

    /// `system_a,system_b,quantile,delta_db` for every ordered pair of distinct systems.
    pub fn improvement_csv(&self) -> String {
        let mut out = String::from("system_a,system_b,quantile,delta_db\n");
        for a in &self.systems {
            for b in &self.systems {
                if a == b {
                    continue;
                }
                let delta = self.improvement(a, b).unwrap_or_default();
                for (q, d) in self.quantiles.iter().zip(delta) {
                    let _ = writeln!(out, "{a},{b},{q},{d:.6}");
                }
            }
        }
        out
    }
}

fn check_quantiles(quantiles: &[f64]) -> Result<()> {
    if quantiles.is_empty() {
        return Err(Error::Empty("quantile list"));
    }
    for q in quantiles {
        check_quantile(*q)?;
    }
    if quantiles.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::arg("quantiles must be strictly ascending"));
    }
    Ok(())
}

/// Evaluates named systems (each a per-speaker list of estimates aligned with
/// `references`) at every quantile.
pub fn quantile_sweep(
    systems: &[(String, Vec<Vec<f64>>)],
    references: &[Vec<f64>],
    quantiles: &[f64],
    config: &StftConfig,
) -> Result<QuantileSweep> {
    check_quantiles(quantiles)?;
    if systems.is_empty() {
        return Err(Error::Empty("system list"));
    }
    let mut values = Vec::with_capacity(systems.len());
    for (name, ests) in systems {
        if ests.len() != references.len() {
            return Err(Error::shape(format!(
                "system {name} has {} estimates for {} references",
                ests.len(),
                references.len()
            )));
        }
        let mut row = Vec::with_capacity(quantiles.len());
        for &q in quantiles {
            let mut sum = 0.0;
            for (e, r) in ests.iter().zip(references) {
                sum += si_sdr_le(e, r, q, config)?;
            }
            row.push(sum / references.len() as f64);
        }
        values.push(row);
    }
    Ok(QuantileSweep {
        quantiles: quantiles.to_vec(),
        systems: systems.iter().map(|(n, _)| n.clone()).collect(),
        values,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeakerMetrics {
    /// Reference speaker index (0-based).
    pub speaker: usize,
    /// Estimate index assigned to this speaker.
    pub estimate: usize,
    pub si_sdr_db: f64,
    pub si_sdr_le_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_speaker: Vec<SpeakerMetrics>,
    pub mean_si_sdr_db: f64,
    pub mean_si_sdr_le_db: Vec<f64>,
    pub quantiles: Vec<f64>,
    /// `permutation[c]` is the estimate index matched to reference `c`.
    pub permutation: Vec<usize>,
    pub stft: StftConfig,
}

/// Scores estimates against arbitrary references after resolving the speaker
/// assignment that maximises mean SI-SDR.
pub fn evaluate_against(
    estimates: &[Vec<f64>],
    references: &[Vec<f64>],
    quantiles: &[f64],
    config: &StftConfig,
) -> Result<MetricsReport> {
    if estimates.len() != references.len() {
        return Err(Error::shape(format!(
            "{} estimates for {} speakers",
            estimates.len(),
            references.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::Empty("estimate list"));
    }
    if !quantiles.is_empty() {
        check_quantiles(quantiles)?;
    }
    let c_count = references.len();
    let mut pair = vec![vec![0.0; c_count]; c_count];
    for (r, reference) in references.iter().enumerate() {
        for (e, est) in estimates.iter().enumerate() {
            pair[r][e] = si_sdr(est, reference)?;
        }
    }
    let (perm, _) = best_permutation(c_count, |p| {
        -p.iter().enumerate().map(|(r, &e)| pair[r][e]).sum::<f64>()
    });
    let mut per_speaker = Vec::with_capacity(c_count);
    for (r, &e) in perm.iter().enumerate() {
        let le = quantiles
            .iter()
            .map(|&q| si_sdr_le(&estimates[e], &references[r], q, config))
            .collect::<Result<Vec<_>>>()?;
        per_speaker.push(SpeakerMetrics {
            speaker: r,
            estimate: e,
            si_sdr_db: pair[r][e],
            si_sdr_le_db: le,
        });
    }
    let n = c_count as f64;
    let mean_si_sdr_db = per_speaker.iter().map(|s| s.si_sdr_db).sum::<f64>() / n;
    let mean_si_sdr_le_db = (0..quantiles.len())
        .map(|qi| per_speaker.iter().map(|s| s.si_sdr_le_db[qi]).sum::<f64>() / n)
        .collect();
    Ok(MetricsReport {
        per_speaker,
        mean_si_sdr_db,
        mean_si_sdr_le_db,
        quantiles: quantiles.to_vec(),
        permutation: perm,
        stft: *config,
    })
}

/// Scores estimates against the scene's reverberant images.
pub fn evaluate_scene(
    estimates: &[Vec<f64>],
    scene: &Scene,
    quantiles: &[f64],
    config: &StftConfig,
) -> Result<MetricsReport> {
    evaluate_against(estimates, &scene.reverberant_image, quantiles, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    #[test]
    fn scaled_and_negated_estimates_hit_cap() {
        let r = noise(1000, 1);
        let three: Vec<f64> = r.iter().map(|v| 3.0 * v).collect();
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        assert_eq!(si_sdr(&three, &r).unwrap(), SI_SDR_CAP_DB);
        assert_eq!(si_sdr(&neg, &r).unwrap(), SI_SDR_CAP_DB);
    }

    #[test]
    fn orthogonal_error_of_equal_norm_is_zero_db() {
        let r = vec![1.0, 1.0, 0.0, 0.0];
        let e = vec![1.0, 1.0, 1.0, -1.0];
        assert!(si_sdr(&e, &r).unwrap().abs() < 1e-12);
    }

    #[test]
    fn si_sdr_errors() {
        assert!(si_sdr(&[1.0], &[0.0]).is_err());
        assert!(si_sdr(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn scale_invariance() {
        let r = noise(2000, 2);
        let e: Vec<f64> = r.iter().zip(noise(2000, 3)).map(|(a, b)| a + 0.3 * b).collect();
        let base = si_sdr(&e, &r).unwrap();
        for beta in [0.1, 1.0, 10.0] {
            let s: Vec<f64> = e.iter().map(|v| v * beta).collect();
            assert!((si_sdr(&s, &r).unwrap() - base).abs() < 1e-6);
        }
    }

    #[test]
    fn nearest_rank_matches_hand_values() {
        let v = [5.0, 1.0, 4.0, 2.0, 3.0, 6.0];
        assert_eq!(nearest_rank(&v, 0.5).unwrap(), 3.0);
        assert_eq!(nearest_rank(&v, 1.0).unwrap(), 6.0);
        assert_eq!(nearest_rank(&v, 0.01).unwrap(), 1.0);
        assert!(nearest_rank(&v, 0.0).is_err());
        assert!(nearest_rank(&v, 1.5).is_err());
    }

    #[test]
    fn six_unit_mask_by_hand() {
        // 3 frames x 2 bins; energies 9, 1 / 4, 16 / 0.25, 4
        let cfg = StftConfig::new(2, 1, 2, 8000).unwrap();
        let data = [3.0, 1.0, 2.0, 4.0, 0.5, 2.0]
            .iter()
            .map(|a| Complex64::new(0.0, *a))
            .collect();
        let spec = ComplexSpectrogram::from_data(3, data, cfg, 0).unwrap();
        // sorted: 0.25 1 4 4 9 16 -> rank ceil(3) = 3 -> threshold 4, both 4s kept
        let mask = low_energy_mask(&spec, 0.5).unwrap();
        assert_eq!(mask, vec![false, true, true, false, true, true]);
        assert_eq!(low_energy_mask(&spec, 1.0).unwrap(), vec![true; 6]);
    }

    #[test]
    fn full_quantile_matches_plain_si_sdr() {
        let cfg = StftConfig::dnn_default();
        let r = noise(8000, 4);
        let e: Vec<f64> = r.iter().zip(noise(8000, 5)).map(|(a, b)| a + 0.5 * b).collect();
        let le = si_sdr_le(&e, &r, 1.0, &cfg).unwrap();
        assert!((le - si_sdr(&e, &r).unwrap()).abs() < 0.1);
        assert!(si_sdr_le(&e, &r, 0.0, &cfg).is_err());
        for q in [0.1, 0.5, 0.9] {
            assert_eq!(si_sdr_le(&r, &r, q, &cfg).unwrap(), SI_SDR_CAP_DB);
        }
    }

    #[test]
    fn tf_domain_flag_is_available() {
        let cfg = StftConfig::dnn_default();
        let r = noise(4000, 6);
        let e: Vec<f64> = r.iter().zip(noise(4000, 7)).map(|(a, b)| a + 0.1 * b).collect();
        let t = si_sdr_le_in(&e, &r, 0.5, &cfg, LeDomain::Time).unwrap();
        let tf = si_sdr_le_in(&e, &r, 0.5, &cfg, LeDomain::TimeFrequency).unwrap();
        assert!(t.is_finite() && tf.is_finite());
    }

    #[test]
    fn less_masked_noise_never_scores_lower() {
        let cfg = StftConfig::dnn_default();
        let r = noise(4000, 8);
        let n = noise(4000, 9);
        let mut last = f64::NEG_INFINITY;
        for level in [1.0, 0.5, 0.2, 0.05] {
            let e: Vec<f64> = r.iter().zip(&n).map(|(a, b)| a + level * b).collect();
            let v = si_sdr_le(&e, &r, 0.5, &cfg).unwrap();
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn sweep_csv_shapes_and_zero_self_improvement() {
        let cfg = StftConfig::dnn_default();
        let refs = vec![noise(4000, 10)];
        let noisy: Vec<f64> = refs[0].iter().zip(noise(4000, 11)).map(|(a, b)| a + 0.3 * b).collect();
        let qs = [0.1, 0.5, 0.9];
        let sweep = quantile_sweep(
            &[
                ("clean".into(), refs.clone()),
                ("noisy".into(), vec![noisy.clone()]),
                ("noisy2".into(), vec![noisy]),
            ],
            &refs,
            &qs,
            &cfg,
        )
        .unwrap();
        assert_eq!(sweep.to_csv().lines().count(), 1 + 3 * 3);
        assert!(sweep.improvement("noisy", "noisy2").unwrap().iter().all(|d| *d == 0.0));
        assert!(sweep.improvement("clean", "noisy").unwrap().iter().all(|d| *d > 0.0));
        assert_eq!(sweep.improvement_csv().lines().count(), 1 + 6 * 3);
        assert!(quantile_sweep(&[("a".into(), refs.clone())], &refs, &[0.5, 0.1], &cfg).is_err());
    }

    #[test]
    fn evaluation_resolves_swaps() {
        let cfg = StftConfig::dnn_default();
        let refs = vec![noise(4000, 12), noise(4000, 13)];
        let straight = evaluate_against(&refs, &refs, &[0.5], &cfg).unwrap();
        assert_eq!(straight.mean_si_sdr_db, SI_SDR_CAP_DB);
        let swapped = vec![refs[1].clone(), refs[0].clone()];
        let rep = evaluate_against(&swapped, &refs, &[0.5], &cfg).unwrap();
        assert_eq!(rep.permutation, vec![1, 0]);
        assert_eq!(rep.mean_si_sdr_db, straight.mean_si_sdr_db);
        assert!(evaluate_against(&refs[..1], &refs, &[], &cfg).is_err());
    }
}
