#![allow(dead_code)]

use cxfilter::spectral::{ComplexSpectrogram, StftConfig};
use cxfilter::Complex64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

pub fn gaussian_signal(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// A spectrogram of i.i.d. complex Gaussians; the signal length is nominal.
pub fn random_spec(frames: usize, config: StftConfig, rng: &mut ChaCha8Rng) -> ComplexSpectrogram {
    let data = (0..frames * config.bins()).map(|_| cgauss(rng)).collect();
    ComplexSpectrogram::from_data(frames, data, config, 0).unwrap()
}

/// 4-point DFT, 3 bins.
pub fn tiny_config() -> StftConfig {
    StftConfig::new(4, 2, 4, 8000).unwrap()
}

/// Weighted least squares by SVD pseudo-inverse, written straight from the
/// objective `sum_t |y(t) - g^H s~(t)|^2 / lambda(t)`.
///
/// With `a = conj(g)` the prediction is `Phi a` where `Phi[t][k] = s(t-k)`
/// (zero before the first frame), so `a = pinv(W Phi) W y`, `W = diag(lambda^-1/2)`.
pub fn wls_oracle(target: &[Complex64], source: &[Complex64], lambda: &[f64], taps: usize) -> Vec<Complex64> {
    let t_len = target.len();
    let zero = Complex64::new(0.0, 0.0);
    let w = |t: usize| Complex64::new(1.0 / lambda[t].sqrt(), 0.0);
    let phi = DMatrix::from_fn(t_len, taps, |t, k| if t >= k { w(t) * source[t - k] } else { zero });
    let y = DVector::from_fn(t_len, |t, _| w(t) * target[t]);
    let pinv = phi.pseudo_inverse(1e-13).expect("svd converges");
    let a = pinv * y;
    a.iter().map(|v| v.conj()).collect()
}

/// `eps * max|Y|^2 + |Y|^2` over the whole spectrogram.
pub fn global_lambda(target: &ComplexSpectrogram, eps: f64) -> Vec<f64> {
    let max = target.data().iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    target.data().iter().map(|z| eps * max + z.norm_sqr()).collect()
}

pub fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

/// Applies per-bin causal filters by direct summation: `x(t) = sum_k conj(g_k) s(t-k)`.
pub fn filter_direct(filters: &[Vec<Complex64>], source: &ComplexSpectrogram) -> ComplexSpectrogram {
    let mut out = ComplexSpectrogram::zeros(source.frames(), *source.config(), source.signal_len());
    for (f, g) in filters.iter().enumerate() {
        for t in 0..source.frames() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, gk) in g.iter().enumerate() {
                if k <= t {
                    acc += gk.conj() * source.get(t - k, f);
                }
            }
            out.set(t, f, acc);
        }
    }
    out
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}
