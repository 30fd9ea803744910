//! The separator -> FCP -> refinement pipeline.
//!
//! Stage 1 is a separator stand-in ([`oracle_separate`]) that returns a
//! direct-path and an image estimate per speaker. The FCP stage re-analyses
//! the direct-path estimates in its own STFT geometry, fits filters against
//! the mixture, and maps the resulting images back. Stage 2 is pluggable:
//! pass stage-1 outputs through, substitute the FCP images, or hand the
//! assembled features to an external model over files. With more than one
//! iteration the refined direct-path estimates feed the next FCP pass.

mod exchange;
mod oracle;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fcp::{FcpConfig, FcpVariant};
use crate::metrics::{evaluate_scene, si_sdr, MetricsReport};
use crate::scene::Scene;
use crate::spectral::{convert_config, istft, stft, ComplexSpectrogram, StftConfig};

pub use exchange::{
    assemble_features, export_estimates, export_features, import_estimate_signals, import_estimates,
    import_features, FeatureRole, FeatureStack, SpeakerFeatures, ESTIMATES_FILE, EXCHANGE_VERSION,
    FEATURES_FILE,
};
pub use oracle::{noise_at_snr, oracle_separate, oracle_signals, DegradationMode, DegradationSpec};

/// Per-speaker direct-path and reverberant-image estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparatorOutput {
    pub direct: Vec<ComplexSpectrogram>,
    pub image: Vec<ComplexSpectrogram>,
}

impl SeparatorOutput {
    pub fn new(direct: Vec<ComplexSpectrogram>, image: Vec<ComplexSpectrogram>) -> Result<Self> {
        if direct.is_empty() {
            return Err(Error::Empty("separator output"));
        }
        if direct.len() != image.len() {
            return Err(Error::shape(format!(
                "{} direct-path vs {} image estimates",
                direct.len(),
                image.len()
            )));
        }
        let first = &direct[0];
        for s in direct.iter().chain(&image) {
            first.ensure_same_shape(s, "separator output")?;
        }
        Ok(SeparatorOutput { direct, image })
    }

    pub fn num_speakers(&self) -> usize {
        self.direct.len()
    }

    /// Reorders speakers: output speaker `i` is input speaker `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        SeparatorOutput {
            direct: order.iter().map(|&c| self.direct[c].clone()).collect(),
            image: order.iter().map(|&c| self.image[c].clone()).collect(),
        }
    }

    pub fn direct_signals(&self) -> Result<Vec<Vec<f64>>> {
        self.direct.iter().map(to_time).collect()
    }

    pub fn image_signals(&self) -> Result<Vec<Vec<f64>>> {
        self.image.iter().map(to_time).collect()
    }
}

fn to_time(spec: &ComplexSpectrogram) -> Result<Vec<f64>> {
    istft(spec, spec.config(), spec.signal_len())
}

/// Whether and how the FCP stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FcpMode {
    Off,
    Fcp,
    FcpEssu,
}

impl FcpMode {
    pub fn variant(self) -> Option<FcpVariant> {
        match self {
            FcpMode::Off => None,
            FcpMode::Fcp => Some(FcpVariant::Fcp),
            FcpMode::FcpEssu => Some(FcpVariant::FcpEssu),
        }
    }
}

/// What the second stage does with its features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Refinement {
    /// Stage-2 outputs equal the stage-1 outputs.
    Passthrough,
    /// The FCP images replace the image estimates; direct paths are kept.
    FcpSubstitute,
    /// Features are exported and refined estimates imported from disk.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub fcp_mode: FcpMode,
    pub iterations: usize,
    pub refinement: Refinement,
    pub stft_dnn: StftConfig,
    pub fcp: FcpConfig,
    /// Root of the per-iteration exchange directories in external mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            fcp_mode: FcpMode::FcpEssu,
            iterations: 1,
            refinement: Refinement::FcpSubstitute,
            stft_dnn: StftConfig::dnn_default(),
            fcp: FcpConfig::default(),
            external_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::arg("iterations must be at least 1"));
        }
        self.stft_dnn.validate()?;
        self.fcp.validate()?;
        if self.stft_dnn.sample_rate_hz != self.fcp.stft.sample_rate_hz {
            return Err(Error::arg("DNN and FCP STFTs use different sample rates"));
        }
        if self.refinement == Refinement::External && self.external_dir.is_none() {
            return Err(Error::arg("external refinement needs an exchange directory"));
        }
        Ok(())
    }

    /// Exchange directories of iteration `k` (1-based): features out, estimates in.
    pub fn exchange_dirs(&self, iteration: usize) -> Option<(PathBuf, PathBuf)> {
        self.external_dir.as_ref().map(|root| {
            let it = root.join(format!("iter{iteration}"));
            (it.join("features"), it.join("estimates"))
        })
    }
}

/// FCP images in the mixture's STFT geometry, plus the processing order.
#[derive(Debug, Clone, PartialEq)]
pub struct FcpStageOutput {
    pub images: Vec<ComplexSpectrogram>,
    pub order: Vec<usize>,
}

/// Runs FCP on the separator's direct-path estimates in the FCP STFT geometry.
pub fn run_fcp_stage(
    mixture: &ComplexSpectrogram,
    separator: &SeparatorOutput,
    variant: FcpVariant,
    fcp: &FcpConfig,
) -> Result<FcpStageOutput> {
    fcp.validate()?;
    let from = *mixture.config();
    let len = mixture.signal_len();
    for s in &separator.direct {
        mixture.ensure_same_shape(s, "mixture vs direct-path estimate")?;
    }
    let y = convert_config(mixture, &from, &fcp.stft, len)?;
    let s_hats = separator
        .direct
        .iter()
        .map(|s| convert_config(s, &from, &fcp.stft, len))
        .collect::<Result<Vec<_>>>()?;
    let out = variant.run(&y, &s_hats, fcp)?;
    let images = out
        .images
        .iter()
        .map(|x| convert_config(x, &fcp.stft, &from, len))
        .collect::<Result<Vec<_>>>()?;
    Ok(FcpStageOutput {
        images,
        order: out.order,
    })
}

/// Per-speaker SI-SDR diagnostics against the true images (ground-truth order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageScores {
    pub stage1_image_si_sdr_db: Vec<f64>,
    pub direct_as_image_si_sdr_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fcp_image_si_sdr_db: Option<Vec<f64>>,
    pub final_image_si_sdr_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineResult {
    pub stage1: SeparatorOutput,
    /// FCP images of the last iteration.
    pub fcp: Option<FcpStageOutput>,
    pub output: SeparatorOutput,
    pub iterations: usize,
    pub report: MetricsReport,
    pub scores: StageScores,
}

fn scores_against(estimates: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Vec<f64>> {
    estimates.iter().zip(truth).map(|(e, t)| si_sdr(e, t)).collect()
}

/// Stage 1 -> FCP -> refinement, repeated `config.iterations` times, then scored.
pub fn run_pipeline(
    scene: &Scene,
    degradation: &DegradationSpec,
    config: &PipelineConfig,
    quantiles: &[f64],
) -> Result<PipelineResult> {
    config.validate()?;
    let dnn = config.stft_dnn;
    if dnn.sample_rate_hz != scene.spec.sample_rate_hz {
        return Err(Error::arg(format!(
            "scene sampled at {} Hz, pipeline configured for {} Hz",
            scene.spec.sample_rate_hz, dnn.sample_rate_hz
        )));
    }
    let y = stft(&scene.mixture, &dnn)?;
    let stage1 = oracle_separate(scene, degradation, &dnn)?;
    let mut current = stage1.clone();
    let mut last_fcp = None;
    for it in 1..=config.iterations {
        let fcp = match config.fcp_mode.variant() {
            Some(v) => Some(run_fcp_stage(&y, &current, v, &config.fcp)?),
            None => None,
        };
        current = match config.refinement {
            Refinement::Passthrough => current,
            Refinement::FcpSubstitute => match &fcp {
                Some(f) => SeparatorOutput::new(current.direct, f.images.clone())?,
                None => current,
            },
            Refinement::External => {
                let (features_dir, estimates_dir) = config
                    .exchange_dirs(it)
                    .ok_or_else(|| Error::arg("external refinement needs an exchange directory"))?;
                let stack = assemble_features(&y, &current, fcp.as_ref().map(|f| f.images.as_slice()))?;
                export_features(&stack, &features_dir)?;
                let refined = import_estimates(&estimates_dir)?;
                if refined.num_speakers() != current.num_speakers() {
                    return Err(Error::shape(format!(
                        "{} refined estimates for {} speakers",
                        refined.num_speakers(),
                        current.num_speakers()
                    )));
                }
                y.ensure_same_shape(&refined.direct[0], "refined estimates")?;
                refined
            }
        };
        last_fcp = fcp;
    }

    let final_images = current.image_signals()?;
    let truth = &scene.reverberant_image;
    let scores = StageScores {
        stage1_image_si_sdr_db: scores_against(&stage1.image_signals()?, truth)?,
        direct_as_image_si_sdr_db: scores_against(&stage1.direct_signals()?, truth)?,
        fcp_image_si_sdr_db: last_fcp
            .as_ref()
            .map(|f| {
                let xs = f.images.iter().map(to_time).collect::<Result<Vec<_>>>()?;
                scores_against(&xs, truth)
            })
            .transpose()?,
        final_image_si_sdr_db: scores_against(&final_images, truth)?,
    };
    let report = evaluate_scene(&final_images, scene, quantiles, &dnn)?;
    Ok(PipelineResult {
        stage1,
        fcp: last_fcp,
        output: current,
        iterations: config.iterations,
        report,
        scores,
    })
}
