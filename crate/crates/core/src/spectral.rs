//! Short-time Fourier analysis and synthesis.
//!
//! Analysis and synthesis both use a periodic square-root Hann window. The
//! signal is zero-padded by `window - hop` samples at the head so that frame
//! `t` ends at input sample `t * hop + hop - 1`; every input sample is then
//! covered by exactly `window / hop` frames and weighted overlap-add
//! reconstructs it exactly.

use std::f64::consts::PI;
use std::ops::{Add, Sub};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Frame geometry of an STFT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_length_samples: usize,
    pub hop_samples: usize,
    pub dft_size: usize,
    pub sample_rate_hz: u32,
}

impl StftConfig {
    pub fn new(
        window_length_samples: usize,
        hop_samples: usize,
        dft_size: usize,
        sample_rate_hz: u32,
    ) -> Result<Self> {
        let cfg = StftConfig {
            window_length_samples,
            hop_samples,
            dft_size,
            sample_rate_hz,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// 32 ms window, 8 ms hop, 256-point DFT at 8 kHz.
    pub const fn dnn_default() -> Self {
        StftConfig {
            window_length_samples: 256,
            hop_samples: 64,
            dft_size: 256,
            sample_rate_hz: 8000,
        }
    }

    /// 128 ms window, 8 ms hop, 1024-point DFT at 8 kHz.
    pub const fn fcp_default() -> Self {
        StftConfig {
            window_length_samples: 1024,
            hop_samples: 64,
            dft_size: 1024,
            sample_rate_hz: 8000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.window_length_samples == 0 || self.hop_samples == 0 || self.dft_size == 0 {
            return bad(format!("all sizes must be positive: {self:?}"));
        }
        if self.sample_rate_hz == 0 {
            return bad("sample rate must be positive".into());
        }
        if self.window_length_samples % self.hop_samples != 0 {
            return bad(format!(
                "hop {} does not divide window {}",
                self.hop_samples, self.window_length_samples
            ));
        }
        // A Hann window only overlap-adds to a constant with at least two frames per sample.
        if self.window_length_samples / self.hop_samples < 2 {
            return bad(format!(
                "window {} must span at least two hops of {}",
                self.window_length_samples, self.hop_samples
            ));
        }
        if self.dft_size < self.window_length_samples {
            return bad(format!(
                "dft size {} shorter than window {}",
                self.dft_size, self.window_length_samples
            ));
        }
        Ok(())
    }

    /// Number of one-sided frequency bins.
    pub fn bins(&self) -> usize {
        self.dft_size / 2 + 1
    }

    pub fn head_padding(&self) -> usize {
        self.window_length_samples - self.hop_samples
    }

    /// Frames needed to cover `len` input samples.
    pub fn num_frames(&self, len: usize) -> usize {
        if len == 0 {
            return 0;
        }
        (len - 1 + self.head_padding()) / self.hop_samples + 1
    }

    /// Longest signal an istft over `frames` frames can produce.
    pub fn max_output_len(&self, frames: usize) -> usize {
        if frames == 0 {
            return 0;
        }
        (frames - 1) * self.hop_samples + self.window_length_samples - self.head_padding()
    }

    /// Periodic square-root Hann window.
    pub fn window(&self) -> Vec<f64> {
        let n = self.window_length_samples as f64;
        (0..self.window_length_samples)
            .map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / n).cos()).sqrt())
            .collect()
    }

    /// Sum of squared window values overlapping any fully covered sample.
    pub fn overlap_gain(&self) -> f64 {
        self.window_length_samples as f64 / (2.0 * self.hop_samples as f64)
    }
}

impl Default for StftConfig {
    fn default() -> Self {
        Self::dnn_default()
    }
}

/// A `frames x bins` grid of one-sided STFT coefficients, stored row-major by frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrogram {
    frames: usize,
    bins: usize,
    data: Vec<Complex64>,
    config: StftConfig,
    signal_len: usize,
}

impl ComplexSpectrogram {
    pub fn zeros(frames: usize, config: StftConfig, signal_len: usize) -> Self {
        let bins = config.bins();
        ComplexSpectrogram {
            frames,
            bins,
            data: vec![Complex64::new(0.0, 0.0); frames * bins],
            config,
            signal_len,
        }
    }

    /// Wraps raw coefficients. `data.len()` must equal `frames * config.bins()`.
    pub fn from_data(
        frames: usize,
        data: Vec<Complex64>,
        config: StftConfig,
        signal_len: usize,
    ) -> Result<Self> {
        let bins = config.bins();
        if data.len() != frames * bins {
            return Err(Error::shape(format!(
                "{} coefficients for {frames} frames x {bins} bins",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::arg("spectrogram contains non-finite values"));
        }
        Ok(ComplexSpectrogram {
            frames,
            bins,
            data,
            config,
            signal_len,
        })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn config(&self) -> &StftConfig {
        &self.config
    }

    /// Length of the time signal this spectrogram describes.
    pub fn signal_len(&self) -> usize {
        self.signal_len
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.data[frame * self.bins + bin]
    }

    #[inline]
    pub fn set(&mut self, frame: usize, bin: usize, value: Complex64) {
        self.data[frame * self.bins + bin] = value;
    }

    pub fn frame(&self, frame: usize) -> &[Complex64] {
        &self.data[frame * self.bins..(frame + 1) * self.bins]
    }

    /// Copies one frequency bin across all frames.
    pub fn bin_track(&self, bin: usize) -> Vec<Complex64> {
        (0..self.frames).map(|t| self.get(t, bin)).collect()
    }

    pub fn set_bin_track(&mut self, bin: usize, track: &[Complex64]) {
        for (t, z) in track.iter().enumerate() {
            self.set(t, bin, *z);
        }
    }

    /// Sum of `|X(t,f)|^2` over all stored units.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn max_power(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn same_shape(&self, other: &ComplexSpectrogram) -> bool {
        self.frames == other.frames && self.bins == other.bins && self.config == other.config
    }

    pub fn ensure_same_shape(&self, other: &ComplexSpectrogram, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::shape(format!(
                "{what}: {}x{} ({:?}) vs {}x{} ({:?})",
                self.frames, self.bins, self.config, other.frames, other.bins, other.config
            )))
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= factor);
        out
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z = f(*z));
        out
    }

    /// Frobenius norm of the difference divided by the norm of `reference`.
    pub fn relative_error(&self, reference: &ComplexSpectrogram) -> f64 {
        let diff: f64 = self
            .data
            .iter()
            .zip(&reference.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let norm = reference.energy();
        if norm == 0.0 {
            diff.sqrt()
        } else {
            (diff / norm).sqrt()
        }
    }

    /// Sums a non-empty list of equally shaped spectrograms.
    pub fn sum<'a>(specs: impl IntoIterator<Item = &'a ComplexSpectrogram>) -> Result<Self> {
        let mut iter = specs.into_iter();
        let first = iter.next().ok_or(Error::Empty("spectrogram list"))?;
        let mut acc = first.clone();
        for s in iter {
            acc.ensure_same_shape(s, "sum")?;
            acc.data.iter_mut().zip(&s.data).for_each(|(a, b)| *a += b);
        }
        Ok(acc)
    }
}

impl Add for &ComplexSpectrogram {
    type Output = ComplexSpectrogram;

    fn add(self, rhs: Self) -> ComplexSpectrogram {
        assert!(self.same_shape(rhs), "adding spectrograms of different shape");
        let mut out = self.clone();
        out.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a += b);
        out
    }
}

impl Sub for &ComplexSpectrogram {
    type Output = ComplexSpectrogram;

    fn sub(self, rhs: Self) -> ComplexSpectrogram {
        assert!(self.same_shape(rhs), "subtracting spectrograms of different shape");
        let mut out = self.clone();
        out.data.iter_mut().zip(&rhs.data).for_each(|(a, b)| *a -= b);
        out
    }
}

/// Forward STFT of a real signal.
pub fn stft(signal: &[f64], config: &StftConfig) -> Result<ComplexSpectrogram> {
    config.validate()?;
    if signal.is_empty() {
        return Err(Error::Empty("signal"));
    }
    if signal.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("signal contains non-finite samples"));
    }
    let n = config.window_length_samples;
    let hop = config.hop_samples;
    let d = config.dft_size;
    let pad = config.head_padding() as isize;
    let frames = config.num_frames(signal.len());
    let bins = config.bins();
    let window = config.window();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(d);

    let mut out = ComplexSpectrogram::zeros(frames, *config, signal.len());
    let mut buf = vec![Complex64::new(0.0, 0.0); d];
    for t in 0..frames {
        buf.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        let start = (t * hop) as isize - pad;
        for (m, w) in window.iter().enumerate() {
            let idx = start + m as isize;
            if idx >= 0 && (idx as usize) < signal.len() {
                buf[m] = Complex64::new(signal[idx as usize] * w, 0.0);
            }
        }
        fft.process(&mut buf);
        out.data[t * bins..(t + 1) * bins].copy_from_slice(&buf[..bins]);
    }
    debug_assert_eq!(n, window.len());
    Ok(out)
}

/// Inverse STFT by weighted overlap-add, truncated to `output_length` samples.
pub fn istft(
    spec: &ComplexSpectrogram,
    config: &StftConfig,
    output_length: usize,
) -> Result<Vec<f64>> {
    config.validate()?;
    if spec.config != *config {
        return Err(Error::shape(format!(
            "spectrogram config {:?} differs from synthesis config {config:?}",
            spec.config
        )));
    }
    if spec.bins != config.bins() {
        return Err(Error::shape(format!(
            "{} bins for dft size {}",
            spec.bins, config.dft_size
        )));
    }
    let max_len = config.max_output_len(spec.frames);
    if output_length > max_len {
        return Err(Error::shape(format!(
            "requested {output_length} samples but {} frames reconstruct at most {max_len}",
            spec.frames
        )));
    }
    let n = config.window_length_samples;
    let hop = config.hop_samples;
    let d = config.dft_size;
    let bins = spec.bins;
    let window = config.window();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(d);

    let total = if spec.frames == 0 { 0 } else { (spec.frames - 1) * hop + n };
    let mut acc = vec![0.0; total];
    let mut norm = vec![0.0; total];
    let mut buf = vec![Complex64::new(0.0, 0.0); d];
    for t in 0..spec.frames {
        let row = spec.frame(t);
        buf[..bins].copy_from_slice(row);
        for k in 1..bins {
            let mirror = d - k;
            if mirror != k && mirror < d {
                buf[mirror] = row[k].conj();
            }
        }
        ifft.process(&mut buf);
        let base = t * hop;
        for (m, w) in window.iter().enumerate() {
            acc[base + m] += buf[m].re / d as f64 * w;
            norm[base + m] += w * w;
        }
    }
    let pad = config.head_padding();
    Ok((0..output_length)
        .map(|i| {
            let p = i + pad;
            if norm[p] > 1e-12 {
                acc[p] / norm[p]
            } else {
                0.0
            }
        })
        .collect())
}

/// Re-analyses a spectrogram under a different frame geometry via the time domain.
pub fn convert_config(
    spec: &ComplexSpectrogram,
    from: &StftConfig,
    to: &StftConfig,
    length: usize,
) -> Result<ComplexSpectrogram> {
    to.validate()?;
    let signal = istft(spec, from, length)?;
    stft(&signal, to)
}
