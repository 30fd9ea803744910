//! Mono 32-bit float WAV files.

use std::path::Path;

use crate::error::{Error, Result};

/// Writes `samples` as a mono IEEE-float WAV. Values are narrowed to `f32`.
pub fn write_f32(path: &Path, samples: &[f64], sample_rate_hz: u32) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: sample_rate_hz,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let wrap = |source| Error::Wav {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(wrap)?;
    for &s in samples {
        writer.write_sample(s as f32).map_err(wrap)?;
    }
    writer.finalize().map_err(wrap)
}

/// Reads a mono float WAV; `component` names the file in error messages.
pub fn read_f32(path: &Path, component: &str) -> Result<(Vec<f64>, u32)> {
    if !path.exists() {
        return Err(Error::MissingComponent {
            component: component.to_string(),
            path: path.to_path_buf(),
        });
    }
    let corrupt = |reason: String| Error::Corrupt {
        component: component.to_string(),
        reason,
    };
    let mut reader = hound::WavReader::open(path).map_err(|e| corrupt(e.to_string()))?;
    let spec = reader.spec();
    if spec.channels != 1 || spec.sample_format != hound::SampleFormat::Float || spec.bits_per_sample != 32 {
        return Err(corrupt(format!("expected mono 32-bit float, found {spec:?}")));
    }
    let samples = reader
        .samples::<f32>()
        .map(|s| s.map(f64::from))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| corrupt(e.to_string()))?;
    Ok((samples, spec.sample_rate))
}

/// Rounds every sample to the nearest `f32`.
pub fn to_f32_precision(samples: &mut [f64]) {
    samples.iter_mut().for_each(|s| *s = f64::from(*s as f32));
}
