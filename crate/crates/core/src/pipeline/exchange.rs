//! File boundary for externally trained refinement models.
//!
//! Features go out as `features.json` plus one float WAV per signal; refined
//! estimates come back as `estimates.json` plus `s{c}_direct.wav` and
//! `s{c}_image.wav`. Speaker indices in file names are 1-based.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SeparatorOutput;
use crate::error::{Error, Result};
use crate::spectral::{istft, stft, ComplexSpectrogram, StftConfig};
use crate::wav;

pub const FEATURES_FILE: &str = "features.json";
pub const ESTIMATES_FILE: &str = "estimates.json";
pub const EXCHANGE_VERSION: u32 = 1;

/// What a feature signal represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRole {
    Mixture,
    Stage1Direct,
    Stage1Image,
    FcpImage,
}

impl FeatureRole {
    fn file_name(self, speaker: Option<usize>) -> String {
        match (self, speaker) {
            (FeatureRole::Mixture, _) => "mixture.wav".into(),
            (FeatureRole::Stage1Direct, Some(c)) => format!("s{}_stage1_direct.wav", c + 1),
            (FeatureRole::Stage1Image, Some(c)) => format!("s{}_stage1_image.wav", c + 1),
            (FeatureRole::FcpImage, Some(c)) => format!("s{}_fcp_image.wav", c + 1),
            (role, None) => unreachable!("{role:?} needs a speaker index"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerFeatures {
    pub stage1_direct: Vec<f64>,
    pub stage1_image: Vec<f64>,
    pub fcp_image: Option<Vec<f64>>,
}

/// Inputs of the second-stage model, held as time signals at 32-bit precision
/// so the file round trip is exact. Spectrograms are derived on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    pub mixture: Vec<f64>,
    pub speakers: Vec<SpeakerFeatures>,
    pub stft: StftConfig,
}

impl FeatureStack {
    pub fn num_speakers(&self) -> usize {
        self.speakers.len()
    }

    pub fn len(&self) -> usize {
        self.mixture.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mixture.is_empty()
    }

    /// Signals in canonical order: mixture, then per speaker direct, image, FCP image.
    pub fn entries(&self) -> Vec<(FeatureRole, Option<usize>, &[f64])> {
        let mut out: Vec<(FeatureRole, Option<usize>, &[f64])> =
            vec![(FeatureRole::Mixture, None, self.mixture.as_slice())];
        for (c, s) in self.speakers.iter().enumerate() {
            out.push((FeatureRole::Stage1Direct, Some(c), s.stage1_direct.as_slice()));
            out.push((FeatureRole::Stage1Image, Some(c), s.stage1_image.as_slice()));
            if let Some(f) = &s.fcp_image {
                out.push((FeatureRole::FcpImage, Some(c), f.as_slice()));
            }
        }
        out
    }

    /// Number of spectrograms in the stack.
    pub fn count(&self) -> usize {
        self.entries().len()
    }

    pub fn spectrograms(&self) -> Result<Vec<ComplexSpectrogram>> {
        self.entries().iter().map(|(_, _, x)| stft(x, &self.stft)).collect()
    }
}

fn to_signal(spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
    let mut x = istft(spec, spec.config(), spec.signal_len())?;
    wav::to_f32_precision(&mut x);
    Ok(x)
}

/// Collects mixture, stage-1 estimates and FCP images into one stack.
pub fn assemble_features(
    mixture: &ComplexSpectrogram,
    stage1: &SeparatorOutput,
    fcp_images: Option<&[ComplexSpectrogram]>,
) -> Result<FeatureStack> {
    if let Some(first) = stage1.direct.first() {
        mixture.ensure_same_shape(first, "mixture vs stage-1 estimates")?;
    }
    if let Some(images) = fcp_images {
        if images.len() != stage1.num_speakers() {
            return Err(Error::shape(format!(
                "{} FCP images for {} speakers",
                images.len(),
                stage1.num_speakers()
            )));
        }
        for img in images {
            mixture.ensure_same_shape(img, "mixture vs FCP image")?;
        }
    }
    let speakers = (0..stage1.num_speakers())
        .map(|c| {
            Ok(SpeakerFeatures {
                stage1_direct: to_signal(&stage1.direct[c])?,
                stage1_image: to_signal(&stage1.image[c])?,
                fcp_image: fcp_images.map(|f| to_signal(&f[c])).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureStack {
        mixture: to_signal(mixture)?,
        speakers,
        stft: *mixture.config(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureEntry {
    role: FeatureRole,
    /// 1-based; absent for the mixture.
    speaker: Option<usize>,
    file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct FeatureManifest {
    version: u32,
    num_speakers: usize,
    num_samples: usize,
    sample_rate_hz: u32,
    frames: usize,
    bins: usize,
    has_fcp_images: bool,
    stft: StftConfig,
    files: Vec<FeatureEntry>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}

pub fn export_features(stack: &FeatureStack, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let sr = stack.stft.sample_rate_hz;
    let mut files = Vec::new();
    for (role, speaker, signal) in stack.entries() {
        let file = role.file_name(speaker);
        wav::write_f32(&dir.join(&file), signal, sr)?;
        files.push(FeatureEntry {
            role,
            speaker: speaker.map(|c| c + 1),
            file,
        });
    }
    let manifest = FeatureManifest {
        version: EXCHANGE_VERSION,
        num_speakers: stack.num_speakers(),
        num_samples: stack.len(),
        sample_rate_hz: sr,
        frames: stack.stft.num_frames(stack.len()),
        bins: stack.stft.bins(),
        has_fcp_images: stack.speakers.iter().any(|s| s.fcp_image.is_some()),
        stft: stack.stft,
        files,
    };
    write_json(&dir.join(FEATURES_FILE), &manifest)
}

pub fn import_features(dir: &Path) -> Result<FeatureStack> {
    let path = dir.join(FEATURES_FILE);
    if !path.exists() {
        return Err(Error::MissingComponent {
            component: FEATURES_FILE.into(),
            path,
        });
    }
    let m: FeatureManifest = read_json(&path)?;
    if m.version != EXCHANGE_VERSION {
        return Err(Error::VersionMismatch {
            found: m.version,
            expected: EXCHANGE_VERSION,
        });
    }
    let mut mixture = None;
    let mut speakers: Vec<SpeakerFeatures> = (0..m.num_speakers)
        .map(|_| SpeakerFeatures {
            stage1_direct: Vec::new(),
            stage1_image: Vec::new(),
            fcp_image: None,
        })
        .collect();
    for entry in &m.files {
        let (x, _) = wav::read_f32(&dir.join(&entry.file), &entry.file)?;
        if x.len() != m.num_samples {
            return Err(Error::Corrupt {
                component: entry.file.clone(),
                reason: format!("{} samples, manifest says {}", x.len(), m.num_samples),
            });
        }
        let slot = |c: Option<usize>| -> Result<usize> {
            c.filter(|&c| c >= 1 && c <= m.num_speakers)
                .map(|c| c - 1)
                .ok_or_else(|| Error::Corrupt {
                    component: FEATURES_FILE.into(),
                    reason: format!("bad speaker index {c:?} for {}", entry.file),
                })
        };
        match entry.role {
            FeatureRole::Mixture => mixture = Some(x),
            FeatureRole::Stage1Direct => speakers[slot(entry.speaker)?].stage1_direct = x,
            FeatureRole::Stage1Image => speakers[slot(entry.speaker)?].stage1_image = x,
            FeatureRole::FcpImage => speakers[slot(entry.speaker)?].fcp_image = Some(x),
        }
    }
    let mixture = mixture.ok_or_else(|| Error::MissingComponent {
        component: "mixture feature".into(),
        path: dir.join("mixture.wav"),
    })?;
    Ok(FeatureStack {
        mixture,
        speakers,
        stft: m.stft,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EstimateFiles {
    direct: Vec<String>,
    image: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct EstimateManifest {
    version: u32,
    num_speakers: usize,
    num_samples: usize,
    sample_rate_hz: u32,
    stft: StftConfig,
    files: EstimateFiles,
}

/// Writes direct-path and image estimates as time signals.
pub fn export_estimates(output: &SeparatorOutput, dir: &Path) -> Result<()> {
    let first = output.direct.first().ok_or(Error::Empty("estimate list"))?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let cfg = *first.config();
    let len = first.signal_len();
    let c_count = output.num_speakers();
    let files = EstimateFiles {
        direct: (1..=c_count).map(|c| format!("s{c}_direct.wav")).collect(),
        image: (1..=c_count).map(|c| format!("s{c}_image.wav")).collect(),
    };
    for c in 0..c_count {
        wav::write_f32(&dir.join(&files.direct[c]), &to_signal(&output.direct[c])?, cfg.sample_rate_hz)?;
        wav::write_f32(&dir.join(&files.image[c]), &to_signal(&output.image[c])?, cfg.sample_rate_hz)?;
    }
    let manifest = EstimateManifest {
        version: EXCHANGE_VERSION,
        num_speakers: c_count,
        num_samples: len,
        sample_rate_hz: cfg.sample_rate_hz,
        stft: cfg,
        files,
    };
    write_json(&dir.join(ESTIMATES_FILE), &manifest)
}

/// Reads estimates as time signals: `(direct, image)` per speaker.
pub fn import_estimate_signals(dir: &Path) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, StftConfig)> {
    let path = dir.join(ESTIMATES_FILE);
    if !path.exists() {
        return Err(Error::MissingComponent {
            component: format!(
                "refined estimates (required files: {ESTIMATES_FILE}, s{{c}}_direct.wav, s{{c}}_image.wav)"
            ),
            path,
        });
    }
    let m: EstimateManifest = read_json(&path)?;
    if m.version != EXCHANGE_VERSION {
        return Err(Error::VersionMismatch {
            found: m.version,
            expected: EXCHANGE_VERSION,
        });
    }
    if m.files.direct.len() != m.num_speakers || m.files.image.len() != m.num_speakers {
        return Err(Error::Corrupt {
            component: ESTIMATES_FILE.into(),
            reason: format!("file lists do not cover {} speakers", m.num_speakers),
        });
    }
    let read = |file: &str| -> Result<Vec<f64>> {
        let (x, _) = wav::read_f32(&dir.join(file), file)?;
        if x.len() != m.num_samples {
            return Err(Error::Corrupt {
                component: file.into(),
                reason: format!("{} samples, manifest says {}", x.len(), m.num_samples),
            });
        }
        Ok(x)
    };
    let direct = m.files.direct.iter().map(|f| read(f)).collect::<Result<Vec<_>>>()?;
    let image = m.files.image.iter().map(|f| read(f)).collect::<Result<Vec<_>>>()?;
    Ok((direct, image, m.stft))
}

/// Reads estimates and analyses them with the manifest's STFT configuration.
pub fn import_estimates(dir: &Path) -> Result<SeparatorOutput> {
    let (direct, image, cfg) = import_estimate_signals(dir)?;
    let to_spec = |xs: &[Vec<f64>]| xs.iter().map(|x| stft(x, &cfg)).collect::<Result<Vec<_>>>();
    SeparatorOutput::new(to_spec(&direct)?, to_spec(&image)?)
}
