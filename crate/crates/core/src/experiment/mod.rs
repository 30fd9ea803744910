//! Batch experiments: seeded scene sets, pipeline runs, evaluation and
//! parameter sweeps, with JSON reports and CSV exports.
//!
//! Everything here is a pure function of an [`ExperimentConfig`]. Reports
//! embed the resolved config and its content hash, and never contain paths
//! or timings, so identical configs give byte-identical report files.

pub mod cli;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{evaluate_scene, quantile_sweep, MetricsReport, QuantileSweep};
use crate::pipeline::{
    export_estimates, import_estimate_signals, run_pipeline, DegradationSpec, PipelineConfig, Refinement,
    StageScores, ESTIMATES_FILE,
};
use crate::scene::{generate_scene, load_scene, save_scene, Scene, SceneRanges, SceneSpec, MANIFEST_FILE};

pub const CONFIG_VERSION: u32 = 1;
pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const IMPROVEMENT_CSV: &str = "improvement.csv";
pub const SWEEP_SCENES_CSV: &str = "sweep_scenes.csv";

/// How a set of synthetic scenes is drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSet {
    pub count: usize,
    pub num_speakers: usize,
    pub duration_s: f64,
    pub sample_rate_hz: u32,
    pub ranges: SceneRanges,
    /// Fixed values override the drawn ones.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t60_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_snr_db: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub speaker_gains_db: Vec<f64>,
}

impl Default for SceneSet {
    fn default() -> Self {
        SceneSet {
            count: 4,
            num_speakers: 2,
            duration_s: 3.0,
            sample_rate_hz: 8000,
            ranges: SceneRanges::default(),
            t60_s: None,
            drr_db: None,
            noise_snr_db: None,
            speaker_gains_db: Vec::new(),
        }
    }
}

impl SceneSet {
    /// Spec of scene `index` under the global seed.
    pub fn spec(&self, global_seed: u64, index: usize) -> SceneSpec {
        let mut spec = self
            .ranges
            .draw(self.num_speakers, self.duration_s, derive_seed(global_seed, index as u64, 1));
        spec.sample_rate_hz = self.sample_rate_hz;
        if let Some(v) = self.t60_s {
            spec.t60_s = v;
        }
        if let Some(v) = self.drr_db {
            spec.direct_to_reverberant_ratio_db = v;
        }
        if let Some(v) = self.noise_snr_db {
            spec.noise_snr_db = v;
        }
        spec.speaker_gains_db = self.speaker_gains_db.clone();
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::arg("scene count must be at least 1"));
        }
        if let Some(t60) = self.t60_s {
            if !(t60 > 0.0) {
                return Err(Error::arg(format!("t60 must be positive, got {t60}")));
            }
        }
        self.spec(0, 0).validate()
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    pub scenes: SceneSet,
    /// Per-scene degradation; its `seed` is mixed with the scene index.
    pub degradation: DegradationSpec,
    pub pipeline: PipelineConfig,
    pub quantiles: Vec<f64>,
    /// Output directory. Not part of the report or the hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            seed: 0,
            scenes: SceneSet::default(),
            degradation: DegradationSpec::additive(0.0, 0),
            pipeline: PipelineConfig::default(),
            quantiles: default_quantiles(),
            out: None,
        }
    }
}

/// 0.1, 0.2, ..., 0.9.
pub fn default_quantiles() -> Vec<f64> {
    (1..=9).map(|i| f64::from(i) / 10.0).collect()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::arg(format!("config {}: {e}", path.display())))?;
        if cfg.version != CONFIG_VERSION {
            return Err(Error::arg(format!(
                "config {} has version {}, expected {CONFIG_VERSION}",
                path.display(),
                cfg.version
            )));
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.scenes.validate()?;
        self.degradation.validate()?;
        self.pipeline.validate_core()?;
        for q in &self.quantiles {
            if !(*q > 0.0 && *q <= 1.0) {
                return Err(Error::arg(format!("quantile {q} outside (0, 1]")));
            }
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::arg("quantiles must be strictly ascending"));
        }
        Ok(())
    }

    /// The config as it appears in reports: no output location.
    pub fn canonical(&self) -> ExperimentConfig {
        ExperimentConfig {
            out: None,
            ..self.clone()
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.canonical()).expect("config serializes");
        let digest = Sha256::digest(&bytes);
        hex::encode(&digest[..8])
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn degradation_for(&self, index: usize) -> DegradationSpec {
        DegradationSpec {
            seed: derive_seed(self.seed ^ self.degradation.seed, index as u64, 2),
            ..self.degradation
        }
    }
}

impl PipelineConfig {
    /// Validation that does not depend on where external files live.
    fn validate_core(&self) -> Result<()> {
        let mut probe = self.clone();
        if probe.refinement == Refinement::External && probe.external_dir.is_none() {
            probe.external_dir = Some(PathBuf::new());
        }
        probe.validate()
    }
}

/// SplitMix64 over (seed, index, stream).
pub fn derive_seed(seed: u64, index: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(stream.wrapping_mul(0xd1b5_4a32_d192_ed03));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn scene_name(index: usize) -> String {
    format!("scene_{index:03}")
}

/// A scene plus the name it is reported under.
#[derive(Debug, Clone)]
pub struct NamedScene {
    pub name: String,
    pub scene: Scene,
}

/// Synthesises the configured scene set.
pub fn synthesize_scenes(config: &ExperimentConfig) -> Result<Vec<NamedScene>> {
    (0..config.scenes.count)
        .into_par_iter()
        .map(|i| {
            Ok(NamedScene {
                name: scene_name(i),
                scene: generate_scene(&config.scenes.spec(config.seed, i))?,
            })
        })
        .collect()
}

/// Scene directories under `root`: `root` itself if it holds a manifest,
/// otherwise every immediate subdirectory that does, in name order.
pub fn discover_scenes(root: &Path) -> Result<Vec<(String, PathBuf)>> {
    if root.join(MANIFEST_FILE).is_file() {
        let name = root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scene".into());
        return Ok(vec![(name, root.to_path_buf())]);
    }
    let missing = || Error::MissingComponent {
        component: "scene manifest".into(),
        path: root.join(MANIFEST_FILE),
    };
    let entries = fs::read_dir(root).map_err(|_| missing())?;
    let mut found: Vec<(String, PathBuf)> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), p))
        .collect();
    if found.is_empty() {
        return Err(missing());
    }
    found.sort();
    Ok(found)
}

pub fn load_scenes(root: &Path) -> Result<Vec<NamedScene>> {
    discover_scenes(root)?
        .into_iter()
        .map(|(name, dir)| Ok(NamedScene { name, scene: load_scene(&dir)? }))
        .collect()
}

/// Runs `f` on a pool of `jobs` threads (all cores if `None`); results keep input order.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(Error::arg("--jobs must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::arg(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

// ---------------------------------------------------------------------------
// simulate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulatedScene {
    pub name: String,
    pub spec: SceneSpec,
    pub num_samples: usize,
}

/// Writes every configured scene under `out/<scene name>/`.
pub fn simulate(config: &ExperimentConfig, jobs: Option<usize>) -> Result<Vec<SimulatedScene>> {
    config.validate()?;
    let out = config.out_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let scenes = with_jobs(jobs, || synthesize_scenes(config))??;
    scenes
        .iter()
        .map(|s| {
            save_scene(&s.scene, &out.join(&s.name))?;
            Ok(SimulatedScene {
                name: s.name.clone(),
                spec: s.scene.spec.clone(),
                num_samples: s.scene.len(),
            })
        })
        .collect()
}

pub fn simulate_table(rows: &[SimulatedScene]) -> String {
    let mut out = String::from("scene        C   t60_s   drr_db   snr_db   samples\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<12} {:<3} {:<7.3} {:<8.2} {:<8.2} {}",
            r.name,
            r.spec.num_speakers,
            r.spec.t60_s,
            r.spec.direct_to_reverberant_ratio_db,
            r.spec.noise_snr_db,
            r.num_samples
        );
    }
    out
}

// ---------------------------------------------------------------------------
// separate

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneRun {
    pub name: String,
    pub spec: SceneSpec,
    pub iterations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fcp_order: Option<Vec<usize>>,
    pub metrics: MetricsReport,
    pub scores: StageScores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub num_scenes: usize,
    pub mean_si_sdr_db: f64,
    pub quantiles: Vec<f64>,
    pub mean_si_sdr_le_db: Vec<f64>,
    pub mean_stage1_image_si_sdr_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_fcp_image_si_sdr_db: Option<f64>,
}

impl RunSummary {
    fn of(runs: &[SceneRun], quantiles: &[f64]) -> Self {
        let per_scene_mean = |v: &[f64]| mean(v.iter().copied());
        let fcp: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.scores.fcp_image_si_sdr_db.as_deref().map(per_scene_mean))
            .collect();
        RunSummary {
            num_scenes: runs.len(),
            mean_si_sdr_db: mean(runs.iter().map(|r| r.metrics.mean_si_sdr_db)),
            quantiles: quantiles.to_vec(),
            mean_si_sdr_le_db: (0..quantiles.len())
                .map(|q| mean(runs.iter().map(|r| r.metrics.mean_si_sdr_le_db[q])))
                .collect(),
            mean_stage1_image_si_sdr_db: mean(
                runs.iter().map(|r| per_scene_mean(&r.scores.stage1_image_si_sdr_db)),
            ),
            mean_fcp_image_si_sdr_db: (fcp.len() == runs.len() && !fcp.is_empty()).then(|| mean(fcp)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeparateReport {
    pub version: u32,
    pub command: &'static str,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub scenes: Vec<SceneRun>,
    pub summary: RunSummary,
}

fn pipeline_for_scene(config: &ExperimentConfig, name: &str) -> PipelineConfig {
    let mut p = config.pipeline.clone();
    if p.refinement == Refinement::External {
        let root = p
            .external_dir
            .clone()
            .unwrap_or_else(|| config.out_dir().join("exchange"));
        p.external_dir = Some(root.join(name));
    }
    p
}

/// Runs the pipeline on each scene. Estimates go to `out/<scene>/`, the report
/// to `out/report.json`.
pub fn separate(config: &ExperimentConfig, scenes: &[NamedScene], jobs: Option<usize>) -> Result<SeparateReport> {
    config.validate()?;
    if scenes.is_empty() {
        return Err(Error::Empty("scene list"));
    }
    let out = config.out_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let results = with_jobs(jobs, || {
        scenes
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let pipe = pipeline_for_scene(config, &s.name);
                let res = run_pipeline(&s.scene, &config.degradation_for(i), &pipe, &config.quantiles)?;
                export_estimates(&res.output, &out.join(&s.name))?;
                Ok(SceneRun {
                    name: s.name.clone(),
                    spec: s.scene.spec.clone(),
                    iterations: res.iterations,
                    fcp_order: res.fcp.as_ref().map(|f| f.order.clone()),
                    metrics: res.report,
                    scores: res.scores,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let report = SeparateReport {
        version: CONFIG_VERSION,
        command: "separate",
        config_hash: config.hash(),
        config: config.canonical(),
        summary: RunSummary::of(&results, &config.quantiles),
        scenes: results,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// eval

/// A named directory of estimates, one `estimates.json` per scene.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemDir {
    pub name: String,
    pub dir: PathBuf,
}

impl FromStr for SystemDir {
    type Err = String;

    /// `NAME=DIR`, or a bare `DIR` named after its last component.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, dir) = match s.split_once('=') {
            Some((n, d)) if !n.is_empty() && !d.is_empty() => (n.to_string(), PathBuf::from(d)),
            Some(_) => return Err(format!("expected NAME=DIR, got {s:?}")),
            None => {
                let dir = PathBuf::from(s);
                let name = dir
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "estimates".into());
                (name, dir)
            }
        };
        if name.contains(',') {
            return Err(format!("system name {name:?} may not contain commas"));
        }
        Ok(SystemDir { name, dir })
    }
}

fn estimates_dir(system: &SystemDir, scene: &str, single: bool) -> PathBuf {
    let nested = system.dir.join(scene);
    if nested.join(ESTIMATES_FILE).is_file() || !(single && system.dir.join(ESTIMATES_FILE).is_file()) {
        nested
    } else {
        system.dir.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemEval {
    pub system: String,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SceneEval {
    pub name: String,
    pub systems: Vec<SystemEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSummary {
    pub system: String,
    pub mean_si_sdr_db: f64,
    pub mean_si_sdr_le_db: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub version: u32,
    pub command: &'static str,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub systems: Vec<String>,
    pub scenes: Vec<SceneEval>,
    pub summary: Vec<SystemSummary>,
    pub sweep: QuantileSweep,
}

/// Scores every system on every scene and writes `report.json`, `sweep.csv`
/// and `improvement.csv` to the output directory.
pub fn evaluate(
    config: &ExperimentConfig,
    scenes: &[NamedScene],
    systems: &[SystemDir],
    include_mixture: bool,
    jobs: Option<usize>,
) -> Result<EvalReport> {
    config.validate()?;
    if config.quantiles.is_empty() {
        return Err(Error::arg("eval needs at least one quantile"));
    }
    if systems.is_empty() && !include_mixture {
        return Err(Error::arg("no systems to evaluate"));
    }
    let mut names: Vec<String> = systems.iter().map(|s| s.name.clone()).collect();
    if include_mixture {
        names.push("mixture".into());
    }
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    if sorted.len() != names.len() {
        return Err(Error::arg("system names must be unique"));
    }
    let out = config.out_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let stft = config.pipeline.stft_dnn;
    let single = scenes.len() == 1;

    let per_scene = with_jobs(jobs, || {
        scenes
            .par_iter()
            .map(|s| {
                let c = s.scene.num_speakers();
                let mut estimates: Vec<(String, Vec<Vec<f64>>)> = Vec::new();
                for sys in systems {
                    let dir = estimates_dir(sys, &s.name, single);
                    let (_, images, _) = import_estimate_signals(&dir)?;
                    if images.len() != c {
                        return Err(Error::shape(format!(
                            "system {} has {} estimates for scene {} with {c} speakers",
                            sys.name,
                            images.len(),
                            s.name
                        )));
                    }
                    if images[0].len() != s.scene.len() {
                        return Err(Error::shape(format!(
                            "system {} estimates have {} samples, scene {} has {}",
                            sys.name,
                            images[0].len(),
                            s.name,
                            s.scene.len()
                        )));
                    }
                    estimates.push((sys.name.clone(), images));
                }
                if include_mixture {
                    estimates.push(("mixture".into(), vec![s.scene.mixture.clone(); c]));
                }
                let mut evals = Vec::with_capacity(estimates.len());
                let mut aligned = Vec::with_capacity(estimates.len());
                for (name, ests) in estimates {
                    let metrics = evaluate_scene(&ests, &s.scene, &config.quantiles, &stft)?;
                    let ordered: Vec<Vec<f64>> =
                        metrics.permutation.iter().map(|&e| ests[e].clone()).collect();
                    aligned.push((name.clone(), ordered));
                    evals.push(SystemEval { system: name, metrics });
                }
                let sweep = quantile_sweep(&aligned, &s.scene.reverberant_image, &config.quantiles, &stft)?;
                Ok((SceneEval { name: s.name.clone(), systems: evals }, sweep))
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let sweeps: Vec<QuantileSweep> = per_scene.iter().map(|(_, s)| s.clone()).collect();
    let sweep = QuantileSweep::mean(&sweeps)?;
    let scene_evals: Vec<SceneEval> = per_scene.into_iter().map(|(e, _)| e).collect();
    let summary = names
        .iter()
        .enumerate()
        .map(|(k, name)| SystemSummary {
            system: name.clone(),
            mean_si_sdr_db: mean(scene_evals.iter().map(|e| e.systems[k].metrics.mean_si_sdr_db)),
            mean_si_sdr_le_db: sweep.values[k].clone(),
        })
        .collect();
    let report = EvalReport {
        version: CONFIG_VERSION,
        command: "eval",
        config_hash: config.hash(),
        config: config.canonical(),
        systems: names,
        scenes: scene_evals,
        summary,
        sweep,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    write_file(&out.join(SWEEP_CSV), report.sweep.to_csv().as_bytes())?;
    write_file(&out.join(IMPROVEMENT_CSV), report.sweep.improvement_csv().as_bytes())?;
    Ok(report)
}

// ---------------------------------------------------------------------------
// sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Taps,
    Epsilon,
    DegradationSnr,
    T60,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Taps => "taps",
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::DegradationSnr => "degradation_snr",
            SweepAxis::T60 => "t60",
        }
    }

    /// The config with this axis set to `value`.
    pub fn apply(self, config: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut c = config.clone();
        match self {
            SweepAxis::Taps => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(Error::arg(format!("taps must be a positive integer, got {value}")));
                }
                c.pipeline.fcp.taps = value as usize;
            }
            SweepAxis::Epsilon => c.pipeline.fcp.epsilon = value,
            SweepAxis::DegradationSnr => c.degradation.snr_db = value,
            SweepAxis::T60 => c.scenes.t60_s = Some(value),
        }
        c.validate()?;
        Ok(c)
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "taps" => Ok(SweepAxis::Taps),
            "epsilon" => Ok(SweepAxis::Epsilon),
            "degradation_snr" => Ok(SweepAxis::DegradationSnr),
            "t60" => Ok(SweepAxis::T60),
            other => Err(Error::arg(format!(
                "unknown sweep axis {other:?} (expected taps, epsilon, degradation_snr or t60)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub config_hash: String,
    pub summary: RunSummary,
    pub scenes: Vec<SceneRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub version: u32,
    pub command: &'static str,
    pub axis: SweepAxis,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    /// One row per swept value, means over scenes.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "axis,value,config_hash,num_scenes,mean_si_sdr_db,mean_stage1_image_si_sdr_db,mean_fcp_image_si_sdr_db\n",
        );
        for p in &self.points {
            let fcp = p
                .summary
                .mean_fcp_image_si_sdr_db
                .map(|v| format!("{v:.6}"))
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{:.6},{:.6},{}",
                self.axis.name(),
                p.value,
                p.config_hash,
                p.summary.num_scenes,
                p.summary.mean_si_sdr_db,
                p.summary.mean_stage1_image_si_sdr_db,
                fcp
            );
        }
        out
    }

    /// One row per swept value and scene.
    pub fn scenes_csv(&self) -> String {
        let mut out = String::from("axis,value,config_hash,scene,mean_si_sdr_db,mean_fcp_image_si_sdr_db\n");
        for p in &self.points {
            for s in &p.scenes {
                let fcp = s
                    .scores
                    .fcp_image_si_sdr_db
                    .as_ref()
                    .map(|v| format!("{:.6}", mean(v.iter().copied())))
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.6},{}",
                    self.axis.name(),
                    p.value,
                    p.config_hash,
                    s.name,
                    s.metrics.mean_si_sdr_db,
                    fcp
                );
            }
        }
        out
    }
}

/// One pipeline run per value per synthesised scene.
pub fn sweep(config: &ExperimentConfig, axis: SweepAxis, values: &[f64], jobs: Option<usize>) -> Result<SweepReport> {
    config.validate()?;
    if values.is_empty() {
        return Err(Error::arg("sweep needs at least one value"));
    }
    if config.pipeline.refinement == Refinement::External {
        return Err(Error::arg("sweeps do not support external refinement"));
    }
    let configs = values
        .iter()
        .map(|&v| axis.apply(config, v))
        .collect::<Result<Vec<_>>>()?;
    let out = config.out_dir();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let points = with_jobs(jobs, || {
        configs
            .iter()
            .zip(values)
            .map(|(cfg, &value)| {
                let scenes = synthesize_scenes(cfg)?;
                let runs = scenes
                    .par_iter()
                    .enumerate()
                    .map(|(i, s)| {
                        let res = run_pipeline(&s.scene, &cfg.degradation_for(i), &cfg.pipeline, &cfg.quantiles)?;
                        Ok(SceneRun {
                            name: s.name.clone(),
                            spec: s.scene.spec.clone(),
                            iterations: res.iterations,
                            fcp_order: res.fcp.as_ref().map(|f| f.order.clone()),
                            metrics: res.report,
                            scores: res.scores,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(SweepPoint {
                    value,
                    config_hash: cfg.hash(),
                    summary: RunSummary::of(&runs, &cfg.quantiles),
                    scenes: runs,
                })
            })
            .collect::<Result<Vec<_>>>()
    })??;

    let report = SweepReport {
        version: CONFIG_VERSION,
        command: "sweep",
        axis,
        config_hash: config.hash(),
        config: config.canonical(),
        points,
    };
    write_json(&out.join(REPORT_FILE), &report)?;
    write_file(&out.join(SWEEP_CSV), report.to_csv().as_bytes())?;
    write_file(&out.join(SWEEP_SCENES_CSV), report.scenes_csv().as_bytes())?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(out: &Path) -> ExperimentConfig {
        ExperimentConfig {
            scenes: SceneSet {
                count: 2,
                duration_s: 1.0,
                ..SceneSet::default()
            },
            quantiles: vec![0.5, 1.0],
            out: Some(out.to_path_buf()),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn derived_seeds_differ_by_index_and_stream() {
        let a = derive_seed(1, 0, 1);
        assert_ne!(a, derive_seed(1, 1, 1));
        assert_ne!(a, derive_seed(1, 0, 2));
        assert_ne!(a, derive_seed(2, 0, 1));
        assert_eq!(a, derive_seed(1, 0, 1));
    }

    #[test]
    fn config_json_round_trip_and_hash_ignores_out() {
        let cfg = small(Path::new("/tmp/a"));
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let other = small(Path::new("/tmp/b"));
        assert_eq!(cfg.hash(), other.hash());
        let mut changed = cfg.clone();
        changed.pipeline.fcp.taps = 10;
        assert_ne!(cfg.hash(), changed.hash());
        assert_eq!(cfg.hash().len(), 16);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"version": 1, "seed": 9}"#).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.pipeline, PipelineConfig::default());
    }

    #[test]
    fn sweep_axis_parsing_and_application() {
        assert_eq!("t60".parse::<SweepAxis>().unwrap(), SweepAxis::T60);
        assert!("frequency".parse::<SweepAxis>().is_err());
        let cfg = ExperimentConfig::default();
        assert_eq!(SweepAxis::Taps.apply(&cfg, 10.0).unwrap().pipeline.fcp.taps, 10);
        assert!(SweepAxis::Taps.apply(&cfg, 2.5).is_err());
        assert_eq!(SweepAxis::T60.apply(&cfg, 0.4).unwrap().scenes.spec(0, 0).t60_s, 0.4);
    }

    #[test]
    fn system_dir_parsing() {
        let s: SystemDir = "essu=/tmp/x".parse().unwrap();
        assert_eq!(s.name, "essu");
        let s: SystemDir = "/tmp/runs/off".parse().unwrap();
        assert_eq!(s.name, "off");
        assert!("=x".parse::<SystemDir>().is_err());
    }

    #[test]
    fn discover_reports_missing_manifest() {
        let dir = tempfile::tempdir().unwrap();
        match discover_scenes(dir.path()) {
            Err(Error::MissingComponent { path, .. }) => assert_eq!(path, dir.path().join(MANIFEST_FILE)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn simulate_then_separate_then_eval() {
        let dir = tempfile::tempdir().unwrap();
        let scenes_dir = dir.path().join("scenes");
        let rows = simulate(&small(&scenes_dir), Some(2)).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(simulate_table(&rows).lines().count() == 3);

        let loaded = load_scenes(&scenes_dir).unwrap();
        assert_eq!(loaded.len(), 2);
        let run_dir = dir.path().join("run");
        let report = separate(&small(&run_dir), &loaded, Some(2)).unwrap();
        assert_eq!(report.scenes.len(), 2);
        assert!(run_dir.join("scene_000").join(ESTIMATES_FILE).is_file());

        let eval_dir = dir.path().join("eval");
        let systems = vec![SystemDir {
            name: "essu".into(),
            dir: run_dir.clone(),
        }];
        let ev = evaluate(&small(&eval_dir), &loaded, &systems, true, None).unwrap();
        assert_eq!(ev.systems, ["essu", "mixture"]);
        let csv = fs::read_to_string(eval_dir.join(SWEEP_CSV)).unwrap();
        assert_eq!(csv.lines().count(), 1 + 2 * 2);
        let imp = fs::read_to_string(eval_dir.join(IMPROVEMENT_CSV)).unwrap();
        assert_eq!(imp.lines().count(), 1 + 2 * 2);
    }
}
