//! Dry-source surrogates with speech-like spectro-temporal structure.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

/// Syllable-structured surrogate: voiced harmonic segments with gliding pitch
/// and two formant peaks, unvoiced noise bursts, and silent gaps between them.
/// The result is scaled to unit RMS.
pub fn speech_like<R: Rng + ?Sized>(len: usize, sample_rate_hz: u32, rng: &mut R) -> Vec<f64> {
    let fs = f64::from(sample_rate_hz);
    let nyquist_limit = 0.45 * fs;
    let mut out = vec![0.0; len];
    let mut pos = (rng.random_range(0.0..0.15) * fs) as usize;

    while pos < len {
        let dur = (rng.random_range(0.08..0.35) * fs) as usize;
        let gain = rng.random_range(0.4..1.0);
        let attack = (0.015 * fs) as usize;
        let release = (0.04 * fs).min(dur as f64 / 2.0) as usize;
        let envelope = |n: usize| {
            let a = if n < attack { n as f64 / attack as f64 } else { 1.0 };
            let r = if n + release > dur {
                (dur - n) as f64 / release.max(1) as f64
            } else {
                1.0
            };
            (a.min(r) * PI / 2.0).sin().powi(2)
        };

        if rng.random_bool(0.75) {
            let f0_start: f64 = rng.random_range(90.0..240.0);
            let glide: f64 = rng.random_range(0.85..1.15);
            let f1 = rng.random_range(300.0..900.0);
            let f2 = rng.random_range(1000.0..2500.0);
            let harmonics = (nyquist_limit / (f0_start * glide.max(1.0))) as usize;
            let phases: Vec<f64> = (0..harmonics).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
            let mut phase = 0.0;
            for n in 0..dur.min(len - pos) {
                let f0 = f0_start * glide.powf(n as f64 / dur as f64);
                phase += 2.0 * PI * f0 / fs;
                let mut v = 0.0;
                for (h, ph) in phases.iter().enumerate() {
                    let k = (h + 1) as f64;
                    let fk = k * f0;
                    let weight = (1.0
                        + 4.0 * (-((fk - f1) / 150.0).powi(2)).exp()
                        + 3.0 * (-((fk - f2) / 250.0).powi(2)).exp())
                        / k;
                    v += weight * (k * phase + ph).sin();
                }
                out[pos + n] += gain * envelope(n) * v;
            }
        } else {
            let mut prev = 0.0;
            for n in 0..dur.min(len - pos) {
                let w: f64 = rng.sample(StandardNormal);
                // first difference tilts the burst towards high frequencies
                out[pos + n] += 0.5 * gain * envelope(n) * (w - prev);
                prev = w;
            }
        }
        pos += dur + (rng.random_range(0.03..0.25) * fs) as usize;
    }

    normalize_rms(&mut out, 1.0);
    out
}

/// Scales `x` in place to the requested RMS; silent input is left unchanged.
pub fn normalize_rms(x: &mut [f64], target: f64) {
    if x.is_empty() {
        return;
    }
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v *= target / rms);
    }
}
