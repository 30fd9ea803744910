use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Room impulse response with a single unit direct-path impulse followed by a diffuse tail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub direct_delay_samples: usize,
    pub sample_rate_hz: u32,
}

impl Rir {
    /// Energy of everything after the direct impulse.
    pub fn tail_energy(&self) -> f64 {
        self.taps[self.direct_delay_samples + 1..]
            .iter()
            .map(|v| v * v)
            .sum()
    }

    /// Direct-to-reverberant energy ratio in dB (`+inf` for an anechoic response).
    pub fn measured_drr_db(&self) -> f64 {
        let direct = self.taps[self.direct_delay_samples].powi(2);
        let tail = self.tail_energy();
        if tail == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (direct / tail).log10()
        }
    }
}

/// Amplitude envelope of the reverberant tail `t` seconds after the direct path.
///
/// Energy falls by 60 dB after `t60_s`.
pub fn tail_envelope(t: f64, t60_s: f64) -> f64 {
    (-3.0 * std::f64::consts::LN_10 * t / t60_s).exp()
}

/// Draws a statistical RIR: unit impulse at `direct_delay_samples`, then
/// exponentially decaying Gaussian noise scaled to the requested DRR.
///
/// `drr_db = +inf` yields a pure delayed delta. Taps are rounded to `f32`
/// precision so a response can be stored losslessly.
pub fn generate_rir<R: Rng + ?Sized>(
    t60_s: f64,
    direct_delay_samples: usize,
    drr_db: f64,
    sample_rate_hz: u32,
    rng: &mut R,
) -> Result<Rir> {
    if !(t60_s > 0.0) || !t60_s.is_finite() {
        return Err(Error::arg(format!("t60 must be positive, got {t60_s}")));
    }
    if drr_db.is_nan() || drr_db == f64::NEG_INFINITY {
        return Err(Error::arg(format!("invalid DRR {drr_db}")));
    }
    if sample_rate_hz == 0 {
        return Err(Error::arg("sample rate must be positive"));
    }
    let mut taps = vec![0.0; direct_delay_samples + 1];
    taps[direct_delay_samples] = 1.0;
    if drr_db == f64::INFINITY {
        return Ok(Rir {
            taps,
            direct_delay_samples,
            sample_rate_hz,
        });
    }

    let fs = f64::from(sample_rate_hz);
    let tail_len = (t60_s * fs).ceil() as usize;
    let mut tail: Vec<f64> = (1..=tail_len)
        .map(|k| {
            let g: f64 = rng.sample(StandardNormal);
            g * tail_envelope(k as f64 / fs, t60_s)
        })
        .collect();
    let energy: f64 = tail.iter().map(|v| v * v).sum();
    let target = 10f64.powf(-drr_db / 10.0);
    if energy > 0.0 {
        let scale = (target / energy).sqrt();
        tail.iter_mut().for_each(|v| *v = f64::from((*v * scale) as f32));
    }
    taps.extend(tail);
    Ok(Rir {
        taps,
        direct_delay_samples,
        sample_rate_hz,
    })
}
