//! Synthetic reverberant multi-speaker scenes.
//!
//! A scene holds, per speaker, the direct-path signal and the reverberant
//! image, plus additive white noise and the mixture
//! `y = sum_c image(c) + noise`. All component signals live on a 2^-20
//! amplitude grid. Sums of a handful of such values are exact in both `f32`
//! and `f64`, so the mixture identity holds sample-exactly and survives
//! storage as 32-bit float WAV.

mod rir;
pub mod source;

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::serde_ext;
use crate::wav;

pub use rir::{generate_rir, tail_envelope, Rir};

pub const MANIFEST_FILE: &str = "scene.json";
pub const MANIFEST_VERSION: u32 = 1;
const SPEED_OF_SOUND_M_S: f64 = 343.0;
const GRID: f64 = 1_048_576.0; // 2^20
const GRID_LIMIT: f64 = 16.0;
const SOURCE_RMS: f64 = 0.05;

/// Parameters of one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub num_speakers: usize,
    pub duration_s: f64,
    pub t60_s: f64,
    #[serde(with = "serde_ext")]
    pub direct_to_reverberant_ratio_db: f64,
    #[serde(with = "serde_ext")]
    pub noise_snr_db: f64,
    pub seed: u64,
    pub sample_rate_hz: u32,
    /// Per-speaker level offsets; empty means 0 dB for everyone.
    #[serde(default)]
    pub speaker_gains_db: Vec<f64>,
    /// Source-to-microphone distance range, used to draw direct-path delays.
    #[serde(default = "default_distance")]
    pub distance_m: (f64, f64),
}

fn default_distance() -> (f64, f64) {
    (1.0, 2.0)
}

impl SceneSpec {
    pub fn new(num_speakers: usize, duration_s: f64, seed: u64) -> Self {
        SceneSpec {
            num_speakers,
            duration_s,
            t60_s: 0.3,
            direct_to_reverberant_ratio_db: 0.0,
            noise_snr_db: 25.0,
            seed,
            sample_rate_hz: 8000,
            speaker_gains_db: Vec::new(),
            distance_m: default_distance(),
        }
    }

    pub fn num_samples(&self) -> usize {
        (self.duration_s * f64::from(self.sample_rate_hz)).round() as usize
    }

    pub fn gain_db(&self, speaker: usize) -> f64 {
        self.speaker_gains_db.get(speaker).copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_speakers == 0 {
            return Err(Error::arg("scene needs at least one speaker"));
        }
        if !(self.duration_s > 0.0) {
            return Err(Error::arg(format!("duration must be positive, got {}", self.duration_s)));
        }
        if self.sample_rate_hz == 0 {
            return Err(Error::arg("sample rate must be positive"));
        }
        if !self.speaker_gains_db.is_empty() && self.speaker_gains_db.len() != self.num_speakers {
            return Err(Error::arg(format!(
                "{} speaker gains for {} speakers",
                self.speaker_gains_db.len(),
                self.num_speakers
            )));
        }
        if self.noise_snr_db.is_nan() || self.noise_snr_db == f64::NEG_INFINITY {
            return Err(Error::arg("noise SNR must be a number or +inf"));
        }
        Ok(())
    }
}

/// Ranges from which per-scene acoustics are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRanges {
    pub t60_s: (f64, f64),
    pub noise_snr_db: (f64, f64),
    pub drr_db: (f64, f64),
}

impl Default for SceneRanges {
    fn default() -> Self {
        SceneRanges {
            t60_s: (0.2, 0.5),
            noise_snr_db: (20.0, 30.0),
            drr_db: (-5.0, 5.0),
        }
    }
}

impl SceneRanges {
    /// Draws a spec; acoustics are a pure function of `seed`.
    pub fn draw(&self, num_speakers: usize, duration_s: f64, seed: u64) -> SceneSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5ce4e);
        let pick = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
            if hi > lo {
                rng.random_range(lo..hi)
            } else {
                lo
            }
        };
        let mut spec = SceneSpec::new(num_speakers, duration_s, seed);
        spec.t60_s = pick(&mut rng, self.t60_s);
        spec.noise_snr_db = pick(&mut rng, self.noise_snr_db);
        spec.direct_to_reverberant_ratio_db = pick(&mut rng, self.drr_db);
        spec
    }
}

/// A rendered scene with ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub mixture: Vec<f64>,
    pub direct_path: Vec<Vec<f64>>,
    pub reverberant_image: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
    pub spec: SceneSpec,
    pub rirs: Vec<Rir>,
}

impl Scene {
    pub fn num_speakers(&self) -> usize {
        self.direct_path.len()
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    /// Largest `|mixture - sum(images) - noise|` over all samples.
    pub fn mixture_residual(&self) -> f64 {
        (0..self.len())
            .map(|n| {
                let sum: f64 = self.reverberant_image.iter().map(|x| x[n]).sum::<f64>() + self.noise[n];
                (self.mixture[n] - sum).abs()
            })
            .fold(0.0, f64::max)
    }
}

fn quantize(x: f64) -> f64 {
    (x * GRID).round() / GRID
}

fn quantize_all(x: &mut [f64]) -> Result<()> {
    for v in x.iter_mut() {
        if v.abs() >= GRID_LIMIT {
            return Err(Error::arg(format!("sample {v} exceeds the representable range")));
        }
        *v = quantize(*v);
    }
    Ok(())
}

/// Full linear convolution via FFT.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let load = |x: &[f64]| {
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        buf.iter_mut().zip(x).for_each(|(z, v)| z.re = *v);
        buf
    };
    let mut fa = load(a);
    let mut fb = load(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    fa.iter_mut().zip(&fb).for_each(|(x, y)| *x *= y);
    inv.process(&mut fa);
    fa[..out_len].iter().map(|z| z.re / n as f64).collect()
}

/// Convolves each dry source with a freshly drawn RIR and adds white noise.
///
/// Sources are used at their given level times `spec.speaker_gains_db`.
/// Images are truncated to the source length.
pub fn render_scene<R: Rng + ?Sized>(sources: &[Vec<f64>], spec: &SceneSpec, rng: &mut R) -> Result<Scene> {
    if sources.is_empty() {
        return Err(Error::Empty("source list"));
    }
    let mut spec = spec.clone();
    spec.num_speakers = sources.len();
    spec.validate()?;
    let len = sources[0].len();
    if len == 0 {
        return Err(Error::Empty("source signal"));
    }
    if let Some(bad) = sources.iter().position(|s| s.len() != len) {
        return Err(Error::shape(format!(
            "source {} has {} samples, expected {len}",
            bad + 1,
            sources[bad].len()
        )));
    }
    spec.duration_s = len as f64 / f64::from(spec.sample_rate_hz);
    let fs = f64::from(spec.sample_rate_hz);

    let mut direct_path = Vec::with_capacity(sources.len());
    let mut images = Vec::with_capacity(sources.len());
    let mut rirs = Vec::with_capacity(sources.len());
    for (c, src) in sources.iter().enumerate() {
        let (lo, hi) = spec.distance_m;
        let distance = if hi > lo { rng.random_range(lo..hi) } else { lo };
        let delay = (distance / SPEED_OF_SOUND_M_S * fs).round() as usize;
        let rir = generate_rir(
            spec.t60_s,
            delay,
            spec.direct_to_reverberant_ratio_db,
            spec.sample_rate_hz,
            rng,
        )?;
        let gain = 10f64.powf(spec.gain_db(c) / 20.0);

        let mut direct = vec![0.0; len];
        for n in delay..len {
            direct[n] = gain * src[n - delay];
        }
        let mut image = convolve(src, &rir.taps);
        image.truncate(len);
        image.iter_mut().for_each(|v| *v *= gain);
        quantize_all(&mut direct)?;
        quantize_all(&mut image)?;
        direct_path.push(direct);
        images.push(image);
        rirs.push(rir);
    }

    let image_energy: f64 = (0..len)
        .map(|n| images.iter().map(|x| x[n]).sum::<f64>().powi(2))
        .sum();
    let mut noise = vec![0.0; len];
    if spec.noise_snr_db.is_finite() && image_energy > 0.0 {
        noise.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let energy: f64 = noise.iter().map(|v| v * v).sum();
        let scale = (image_energy / energy / 10f64.powf(spec.noise_snr_db / 10.0)).sqrt();
        noise.iter_mut().for_each(|v| *v *= scale);
        quantize_all(&mut noise)?;
    }

    let mut mixture = noise.clone();
    for img in &images {
        mixture.iter_mut().zip(img).for_each(|(m, x)| *m += x);
    }
    quantize_all(&mut mixture)?;

    Ok(Scene {
        mixture,
        direct_path,
        reverberant_image: images,
        noise,
        spec,
        rirs,
    })
}

/// Draws speech-like surrogate sources and renders them; fully determined by `spec.seed`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let len = spec.num_samples();
    let sources: Vec<Vec<f64>> = (0..spec.num_speakers)
        .map(|_| {
            let mut s = source::speech_like(len, spec.sample_rate_hz, &mut rng);
            s.iter_mut().for_each(|v| *v *= SOURCE_RMS);
            s
        })
        .collect();
    render_scene(&sources, spec, &mut rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneFiles {
    mixture: String,
    noise: String,
    direct: Vec<String>,
    image: Vec<String>,
    rir: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SceneManifest {
    version: u32,
    sample_rate_hz: u32,
    num_speakers: usize,
    duration_s: f64,
    t60_s: f64,
    #[serde(with = "serde_ext")]
    drr_db: f64,
    #[serde(with = "serde_ext")]
    noise_snr_db: f64,
    seed: u64,
    num_samples: usize,
    speaker_gains_db: Vec<f64>,
    distance_m: (f64, f64),
    direct_delays: Vec<usize>,
    files: SceneFiles,
}

/// Writes the scene as float WAVs plus a `scene.json` manifest; returns the manifest path.
pub fn save_scene(scene: &Scene, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let c_count = scene.num_speakers();
    let files = SceneFiles {
        mixture: "mixture.wav".into(),
        noise: "noise.wav".into(),
        direct: (1..=c_count).map(|c| format!("s{c}_direct.wav")).collect(),
        image: (1..=c_count).map(|c| format!("s{c}_image.wav")).collect(),
        rir: (1..=c_count).map(|c| format!("s{c}_rir.wav")).collect(),
    };
    let sr = scene.spec.sample_rate_hz;
    wav::write_f32(&dir.join(&files.mixture), &scene.mixture, sr)?;
    wav::write_f32(&dir.join(&files.noise), &scene.noise, sr)?;
    for c in 0..c_count {
        wav::write_f32(&dir.join(&files.direct[c]), &scene.direct_path[c], sr)?;
        wav::write_f32(&dir.join(&files.image[c]), &scene.reverberant_image[c], sr)?;
        wav::write_f32(&dir.join(&files.rir[c]), &scene.rirs[c].taps, sr)?;
    }
    let manifest = SceneManifest {
        version: MANIFEST_VERSION,
        sample_rate_hz: sr,
        num_speakers: c_count,
        duration_s: scene.spec.duration_s,
        t60_s: scene.spec.t60_s,
        drr_db: scene.spec.direct_to_reverberant_ratio_db,
        noise_snr_db: scene.spec.noise_snr_db,
        seed: scene.spec.seed,
        num_samples: scene.len(),
        speaker_gains_db: scene.spec.speaker_gains_db.clone(),
        distance_m: scene.spec.distance_m,
        direct_delays: scene.rirs.iter().map(|r| r.direct_delay_samples).collect(),
        files,
    };
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

/// Reads a scene written by [`save_scene`].
pub fn load_scene(dir: &Path) -> Result<Scene> {
    let path = dir.join(MANIFEST_FILE);
    if !path.exists() {
        return Err(Error::MissingComponent {
            component: "scene manifest".into(),
            path,
        });
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let m: SceneManifest = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    if m.version != MANIFEST_VERSION {
        return Err(Error::VersionMismatch {
            found: m.version,
            expected: MANIFEST_VERSION,
        });
    }
    let c_count = m.num_speakers;
    for (name, list) in [("direct", &m.files.direct), ("image", &m.files.image), ("rir", &m.files.rir)] {
        if list.len() != c_count || m.direct_delays.len() != c_count {
            return Err(Error::Corrupt {
                component: MANIFEST_FILE.into(),
                reason: format!("{} {name} entries for {c_count} speakers", list.len()),
            });
        }
    }
    let read = |file: &str, component: &str, expect_len: Option<usize>| -> Result<Vec<f64>> {
        let (x, sr) = wav::read_f32(&dir.join(file), component)?;
        if sr != m.sample_rate_hz {
            return Err(Error::Corrupt {
                component: component.into(),
                reason: format!("sample rate {sr}, manifest says {}", m.sample_rate_hz),
            });
        }
        if let Some(n) = expect_len {
            if x.len() != n {
                return Err(Error::Corrupt {
                    component: component.into(),
                    reason: format!("{} samples, manifest says {n}", x.len()),
                });
            }
        }
        Ok(x)
    };
    let n = Some(m.num_samples);
    let mixture = read(&m.files.mixture, "mixture", n)?;
    let noise = read(&m.files.noise, "noise", n)?;
    let mut direct_path = Vec::new();
    let mut images = Vec::new();
    let mut rirs = Vec::new();
    for c in 0..c_count {
        direct_path.push(read(&m.files.direct[c], &format!("speaker {} direct path", c + 1), n)?);
        images.push(read(&m.files.image[c], &format!("speaker {} image", c + 1), n)?);
        rirs.push(Rir {
            taps: read(&m.files.rir[c], &format!("speaker {} rir", c + 1), None)?,
            direct_delay_samples: m.direct_delays[c],
            sample_rate_hz: m.sample_rate_hz,
        });
    }
    let spec = SceneSpec {
        num_speakers: c_count,
        duration_s: m.duration_s,
        t60_s: m.t60_s,
        direct_to_reverberant_ratio_db: m.drr_db,
        noise_snr_db: m.noise_snr_db,
        seed: m.seed,
        sample_rate_hz: m.sample_rate_hz,
        speaker_gains_db: m.speaker_gains_db,
        distance_m: m.distance_m,
    };
    Ok(Scene {
        mixture,
        direct_path,
        reverberant_image: images,
        noise,
        spec,
        rirs,
    })
}
