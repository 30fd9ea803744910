//! Forward convolutive prediction.
//!
//! For each speaker and frequency a causal, time-invariant filter `g(f)` of
//! `taps` frames maps the direct-path estimate onto a target spectrogram by
//! weighted least squares:
//!
//! ```text
//! g(f) = argmin_g  sum_t |target(t,f) - g^H s~(t,f)|^2 / w(t,f)
//! s~(t,f) = [s(t,f), s(t-1,f), ..., s(t-taps+1,f)]       (zero before t = 0)
//! w(t,f)  = eps * max|target|^2 + |target(t,f)|^2
//! ```
//!
//! The filtered direct path `g(f)^H s~(t,f)` is a reverberant image estimate
//! that obeys a linear convolution constraint. [`fcp_separate`] uses the
//! mixture as target for every speaker; [`fcp_essu_separate`] visits speakers
//! in descending direct-path energy and subtracts the images already estimated
//! for the others from the target.

mod solver;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{ComplexSpectrogram, StftConfig};
use solver::Hermitian;

/// How the weight floor `max|target|^2` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WeightFloor {
    /// One maximum over the whole spectrogram.
    #[default]
    Global,
    /// A separate maximum per frequency bin.
    PerFrequency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcpConfig {
    pub taps: usize,
    pub epsilon: f64,
    pub diag_load_delta: f64,
    /// Cap on iterated-Tikhonov passes that strip the loading bias; refinement
    /// stops early once it has converged.
    #[serde(default = "default_refine")]
    pub refinement_steps: usize,
    #[serde(default)]
    pub weight_floor: WeightFloor,
    pub stft: StftConfig,
}

fn default_refine() -> usize {
    100
}

impl Default for FcpConfig {
    fn default() -> Self {
        FcpConfig {
            taps: 40,
            epsilon: 1e-3,
            diag_load_delta: 1e-6,
            refinement_steps: default_refine(),
            weight_floor: WeightFloor::Global,
            stft: StftConfig::fcp_default(),
        }
    }
}

impl FcpConfig {
    pub fn with_taps(mut self, taps: usize) -> Self {
        self.taps = taps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps == 0 {
            return Err(Error::arg("FCP needs at least one tap"));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::arg(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.diag_load_delta >= 0.0) || !self.diag_load_delta.is_finite() {
            return Err(Error::arg(format!(
                "diagonal loading must be non-negative, got {}",
                self.diag_load_delta
            )));
        }
        self.stft.validate()
    }
}

/// Per-frequency filters of one speaker, `bins x taps` coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerFilter {
    bins: usize,
    taps: usize,
    coeffs: Vec<Complex64>,
}

impl SpeakerFilter {
    pub fn zeros(bins: usize, taps: usize) -> Self {
        SpeakerFilter {
            bins,
            taps,
            coeffs: vec![Complex64::new(0.0, 0.0); bins * taps],
        }
    }

    /// Filter passing the current frame unchanged: `g(f) = [1, 0, ..., 0]`.
    pub fn identity(bins: usize, taps: usize) -> Self {
        let mut f = Self::zeros(bins, taps);
        for b in 0..bins {
            f.coeffs[b * taps] = Complex64::new(1.0, 0.0);
        }
        f
    }

    pub fn from_coeffs(bins: usize, taps: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if taps == 0 || coeffs.len() != bins * taps {
            return Err(Error::shape(format!(
                "{} coefficients for {bins} bins x {taps} taps",
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::arg("filter contains non-finite coefficients"));
        }
        Ok(SpeakerFilter { bins, taps, coeffs })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// Coefficients `g(f)` for one frequency.
    pub fn at(&self, bin: usize) -> &[Complex64] {
        &self.coeffs[bin * self.taps..(bin + 1) * self.taps]
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|z| *z *= factor);
        out
    }

    /// Frobenius-relative distance to `reference`.
    pub fn relative_error(&self, reference: &SpeakerFilter) -> f64 {
        let diff: f64 = self
            .coeffs
            .iter()
            .zip(&reference.coeffs)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let norm: f64 = reference.coeffs.iter().map(|z| z.norm_sqr()).sum();
        if norm == 0.0 {
            diff.sqrt()
        } else {
            (diff / norm).sqrt()
        }
    }
}

/// Filters of all speakers, indexed like the direct-path estimates.
pub type FilterSet = Vec<SpeakerFilter>;

/// Output of a multi-speaker FCP run.
#[derive(Debug, Clone, PartialEq)]
pub struct FcpOutput {
    pub images: Vec<ComplexSpectrogram>,
    pub filters: FilterSet,
    /// Order in which speakers were processed.
    pub order: Vec<usize>,
}

/// Weights `eps * max|target|^2 + |target(t,f)|^2`, laid out like the spectrogram.
pub fn weights(target: &ComplexSpectrogram, epsilon: f64, floor: WeightFloor) -> Vec<f64> {
    let frames = target.frames();
    let bins = target.bins();
    let power: Vec<f64> = target.data().iter().map(|z| z.norm_sqr()).collect();
    let floors: Vec<f64> = match floor {
        WeightFloor::Global => {
            let m = power.iter().copied().fold(0.0, f64::max);
            vec![m; bins]
        }
        WeightFloor::PerFrequency => (0..bins)
            .map(|f| (0..frames).map(|t| power[t * bins + f]).fold(0.0, f64::max))
            .collect(),
    };
    power
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let w = epsilon * floors[i % bins] + p;
            // an all-zero target carries no information; any positive weight will do
            if w > 0.0 {
                w
            } else {
                1.0
            }
        })
        .collect()
}

/// Accumulates `R = sum_t s~ s~^H / w` and `p = sum_t s~ conj(target) / w` for one bin.
fn normal_equations(
    target: &[Complex64],
    s_hat: &[Complex64],
    w: &[f64],
    taps: usize,
) -> (Hermitian, Vec<Complex64>) {
    let mut r = Hermitian::zeros(taps);
    let mut p = vec![Complex64::new(0.0, 0.0); taps];
    let zero = Complex64::new(0.0, 0.0);
    let mut stack = vec![zero; taps];
    for t in 0..target.len() {
        let inv = 1.0 / w[t];
        for (k, v) in stack.iter_mut().enumerate() {
            *v = if t >= k { s_hat[t - k] } else { zero };
        }
        let y = target[t].conj() * inv;
        for i in 0..taps {
            let si = stack[i];
            if si == zero {
                continue;
            }
            p[i] += si * y;
            let si_w = si * inv;
            for j in 0..=i {
                r.add_lower(i, j, si_w * stack[j].conj());
            }
        }
    }
    (r, p)
}

fn check_pair(target: &ComplexSpectrogram, s_hat: &ComplexSpectrogram) -> Result<()> {
    target.ensure_same_shape(s_hat, "target vs direct-path estimate")
}

/// Estimates one speaker's per-frequency FCP filter against `target`.
///
/// The weights come from the target itself, so passing the mixture gives the
/// plain FCP weighting and passing a source-updated residual gives the ESSU one.
/// A frequency where the direct-path estimate is identically zero gets a zero filter.
pub fn estimate_fcp_filter(
    target: &ComplexSpectrogram,
    s_hat: &ComplexSpectrogram,
    config: &FcpConfig,
) -> Result<SpeakerFilter> {
    config.validate()?;
    check_pair(target, s_hat)?;
    let w = weights(target, config.epsilon, config.weight_floor);
    let bins = target.bins();
    let frames = target.frames();
    let taps = config.taps;
    let per_bin: Vec<Vec<Complex64>> = (0..bins)
        .into_par_iter()
        .map(|f| {
            let tgt = target.bin_track(f);
            let src = s_hat.bin_track(f);
            let wf: Vec<f64> = (0..frames).map(|t| w[t * bins + f]).collect();
            let (r, p) = normal_equations(&tgt, &src, &wf, taps);
            solver::solve_loaded(&r, &p, config.diag_load_delta, config.refinement_steps)
        })
        .collect();
    SpeakerFilter::from_coeffs(bins, taps, per_bin.concat())
}

/// Forms the image `X(t,f) = g(f)^H s~(t,f)`.
pub fn apply_filter(filter: &SpeakerFilter, s_hat: &ComplexSpectrogram) -> Result<ComplexSpectrogram> {
    if filter.bins() != s_hat.bins() {
        return Err(Error::shape(format!(
            "filter has {} bins, spectrogram {}",
            filter.bins(),
            s_hat.bins()
        )));
    }
    let frames = s_hat.frames();
    let bins = s_hat.bins();
    let mut out = ComplexSpectrogram::zeros(frames, *s_hat.config(), s_hat.signal_len());
    let data = out.data_mut();
    for f in 0..bins {
        let g = filter.at(f);
        for t in 0..frames {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, gk) in g.iter().enumerate().take(t + 1) {
                acc += gk.conj() * s_hat.get(t - k, f);
            }
            data[t * bins + f] = acc;
        }
    }
    Ok(out)
}

/// Weighted objective per frequency for a given filter.
pub fn fcp_objective(
    target: &ComplexSpectrogram,
    s_hat: &ComplexSpectrogram,
    filter: &SpeakerFilter,
    config: &FcpConfig,
) -> Result<Vec<f64>> {
    check_pair(target, s_hat)?;
    let image = apply_filter(filter, s_hat)?;
    let w = weights(target, config.epsilon, config.weight_floor);
    let bins = target.bins();
    let mut obj = vec![0.0; bins];
    for (i, (y, x)) in target.data().iter().zip(image.data()).enumerate() {
        obj[i % bins] += (y - x).norm_sqr() / w[i];
    }
    Ok(obj)
}

fn check_speakers(mixture: &ComplexSpectrogram, s_hats: &[ComplexSpectrogram]) -> Result<()> {
    if s_hats.is_empty() {
        return Err(Error::Empty("direct-path estimates"));
    }
    for s in s_hats {
        check_pair(mixture, s)?;
    }
    Ok(())
}

/// Plain FCP: each speaker's filter is fitted to the mixture independently.
pub fn fcp_separate(
    mixture: &ComplexSpectrogram,
    s_hats: &[ComplexSpectrogram],
    config: &FcpConfig,
) -> Result<FcpOutput> {
    check_speakers(mixture, s_hats)?;
    let mut images = Vec::with_capacity(s_hats.len());
    let mut filters = Vec::with_capacity(s_hats.len());
    for s in s_hats {
        let g = estimate_fcp_filter(mixture, s, config)?;
        images.push(apply_filter(&g, s)?);
        filters.push(g);
    }
    Ok(FcpOutput {
        images,
        filters,
        order: (0..s_hats.len()).collect(),
    })
}

/// Speaker indices by descending `||s_hat||^2`; ties keep ascending index.
pub fn energy_sort(s_hats: &[ComplexSpectrogram]) -> Vec<usize> {
    let energies: Vec<f64> = s_hats.iter().map(ComplexSpectrogram::energy).collect();
    sort_by_energy(&energies)
}

pub(crate) fn sort_by_energy(energies: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..energies.len()).collect();
    order.sort_by(|&a, &b| energies[b].total_cmp(&energies[a]));
    order
}

/// FCP with energy-sorted source update.
///
/// All images start at zero. Speakers are visited in [`energy_sort`] order;
/// speaker `c` is fitted against `Y - sum_{c' != c} X(c')` using weights from
/// that residual, and its image is stored before the next speaker is visited.
pub fn fcp_essu_separate(
    mixture: &ComplexSpectrogram,
    s_hats: &[ComplexSpectrogram],
    config: &FcpConfig,
) -> Result<FcpOutput> {
    check_speakers(mixture, s_hats)?;
    let c_count = s_hats.len();
    let order = energy_sort(s_hats);
    let zero = ComplexSpectrogram::zeros(mixture.frames(), *mixture.config(), mixture.signal_len());
    let mut images = vec![zero; c_count];
    let mut filters = vec![SpeakerFilter::zeros(mixture.bins(), config.taps); c_count];
    let mut processed = vec![false; c_count];
    for &c in &order {
        let mut residual = mixture.clone();
        for (other, img) in images.iter().enumerate() {
            // unprocessed images are still zero and contribute nothing
            if other != c && processed[other] {
                residual = &residual - img;
            }
        }
        let g = estimate_fcp_filter(&residual, &s_hats[c], config)?;
        images[c] = apply_filter(&g, &s_hats[c])?;
        filters[c] = g;
        processed[c] = true;
    }
    Ok(FcpOutput { images, filters, order })
}

/// Which FCP algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FcpVariant {
    Fcp,
    FcpEssu,
}

impl FcpVariant {
    pub fn run(
        self,
        mixture: &ComplexSpectrogram,
        s_hats: &[ComplexSpectrogram],
        config: &FcpConfig,
    ) -> Result<FcpOutput> {
        match self {
            FcpVariant::Fcp => fcp_separate(mixture, s_hats, config),
            FcpVariant::FcpEssu => fcp_essu_separate(mixture, s_hats, config),
        }
    }
}
