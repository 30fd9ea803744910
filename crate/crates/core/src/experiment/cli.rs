//! `cxfilter simulate|separate|eval|sweep`.
//!
//! Exit codes: 0 success, 2 I/O, 3 missing scene or exchange files,
//! 4 shape mismatch, 5 bad arguments.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use super::{
    evaluate, load_scenes, separate, simulate, simulate_table, sweep, synthesize_scenes, ExperimentConfig,
    SweepAxis, SystemDir,
};
use crate::error::Error;
use crate::fcp::WeightFloor;
use crate::pipeline::{DegradationMode, FcpMode, Refinement};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 2;
pub const EXIT_MISSING: i32 = 3;
pub const EXIT_SHAPE: i32 = 4;
pub const EXIT_ARGS: i32 = 5;

/// Maps a library error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io { .. } | Error::Wav { .. } | Error::Json { .. } | Error::Corrupt { .. } => EXIT_IO,
        Error::VersionMismatch { .. } => EXIT_IO,
        Error::MissingComponent { .. } => EXIT_MISSING,
        Error::ShapeMismatch(_) => EXIT_SHAPE,
        Error::InvalidConfig(_) | Error::InvalidArgument(_) | Error::Empty(_) => EXIT_ARGS,
    }
}

#[derive(Debug, Parser)]
#[command(name = "cxfilter", version, about = "Forward convolutive prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write seeded synthetic scenes with manifests.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scene: SceneArgs,
    },
    /// Run the separation pipeline on each scene and score it.
    Separate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        /// Scene directory (or a directory of scene directories); synthesised from the config if omitted.
        #[arg(long)]
        scenes: Option<PathBuf>,
    },
    /// Score estimate directories against scenes; writes report.json and sweep CSVs.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Scene directory (or a directory of scene directories).
        #[arg(long)]
        scenes: PathBuf,
        /// Estimates as NAME=DIR (or DIR); repeatable.
        #[arg(long = "estimates", value_name = "NAME=DIR")]
        estimates: Vec<SystemDir>,
        /// Also score the unprocessed mixture as a system named "mixture".
        #[arg(long)]
        with_mixture: bool,
    },
    /// Re-run the pipeline for each value of one parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        scene: SceneArgs,
        #[command(flatten)]
        pipeline: PipelineArgs,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        values: Vec<f64>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Comma-separated energy quantiles for SI-SDR-LE.
    #[arg(long, value_delimiter = ',')]
    quantiles: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct SceneArgs {
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    speakers: Option<usize>,
    #[arg(long)]
    duration: Option<f64>,
    /// Fixed T60 in seconds instead of a drawn one.
    #[arg(long)]
    t60: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    drr: Option<f64>,
    #[arg(long)]
    noise_snr: Option<f64>,
    /// Comma-separated per-speaker level offsets in dB.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    gains: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct PipelineArgs {
    #[arg(long, value_enum)]
    fcp: Option<FcpArg>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long, value_enum)]
    refinement: Option<RefinementArg>,
    /// Root of per-scene exchange directories for external refinement.
    #[arg(long)]
    external_dir: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    degradation_snr: Option<f64>,
    #[arg(long, value_enum)]
    degradation_mode: Option<DegradationArg>,
    #[arg(long)]
    cross_talk: Option<f64>,
    #[arg(long)]
    taps: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long, value_enum)]
    weight_floor: Option<FloorArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FcpArg {
    Off,
    Fcp,
    Essu,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum RefinementArg {
    Passthrough,
    FcpSubstitute,
    External,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum DegradationArg {
    AdditiveNoise,
    CrossTalk,
    Combined,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum FloorArg {
    Global,
    PerFrequency,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum AxisArg {
    Taps,
    Epsilon,
    DegradationSnr,
    T60,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Taps => SweepAxis::Taps,
            AxisArg::Epsilon => SweepAxis::Epsilon,
            AxisArg::DegradationSnr => SweepAxis::DegradationSnr,
            AxisArg::T60 => SweepAxis::T60,
        }
    }
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(q) = &self.quantiles {
            cfg.quantiles = q.clone();
        }
        Ok(cfg)
    }
}

impl SceneArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let s = &mut cfg.scenes;
        if let Some(v) = self.count {
            s.count = v;
        }
        if let Some(v) = self.speakers {
            s.num_speakers = v;
        }
        if let Some(v) = self.duration {
            s.duration_s = v;
        }
        if let Some(v) = self.t60 {
            s.t60_s = Some(v);
        }
        if let Some(v) = self.drr {
            s.drr_db = Some(v);
        }
        if let Some(v) = self.noise_snr {
            s.noise_snr_db = Some(v);
        }
        if let Some(v) = &self.gains {
            s.speaker_gains_db = v.clone();
        }
    }
}

impl PipelineArgs {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        let p = &mut cfg.pipeline;
        if let Some(v) = self.fcp {
            p.fcp_mode = match v {
                FcpArg::Off => FcpMode::Off,
                FcpArg::Fcp => FcpMode::Fcp,
                FcpArg::Essu => FcpMode::FcpEssu,
            };
        }
        if let Some(v) = self.iterations {
            p.iterations = v;
        }
        if let Some(v) = self.refinement {
            p.refinement = match v {
                RefinementArg::Passthrough => Refinement::Passthrough,
                RefinementArg::FcpSubstitute => Refinement::FcpSubstitute,
                RefinementArg::External => Refinement::External,
            };
        }
        if let Some(v) = &self.external_dir {
            p.external_dir = Some(v.clone());
        }
        if let Some(v) = self.taps {
            p.fcp.taps = v;
        }
        if let Some(v) = self.epsilon {
            p.fcp.epsilon = v;
        }
        if let Some(v) = self.weight_floor {
            p.fcp.weight_floor = match v {
                FloorArg::Global => WeightFloor::Global,
                FloorArg::PerFrequency => WeightFloor::PerFrequency,
            };
        }
        let d = &mut cfg.degradation;
        if let Some(v) = self.degradation_snr {
            d.snr_db = v;
        }
        if let Some(v) = self.degradation_mode {
            d.mode = match v {
                DegradationArg::AdditiveNoise => DegradationMode::AdditiveNoise,
                DegradationArg::CrossTalk => DegradationMode::CrossTalk,
                DegradationArg::Combined => DegradationMode::Combined,
            };
        }
        if let Some(v) = self.cross_talk {
            d.cross_talk_fraction = v;
        }
    }
}

fn execute(command: Command, stdout: &mut dyn Write) -> Result<(), Error> {
    let say = |stdout: &mut dyn Write, text: String| {
        let _ = stdout.write_all(text.as_bytes());
    };
    match command {
        Command::Simulate { common, scene } => {
            let mut cfg = common.resolve()?;
            scene.apply(&mut cfg);
            let rows = simulate(&cfg, common.jobs)?;
            say(stdout, simulate_table(&rows));
        }
        Command::Separate {
            common,
            scene,
            pipeline,
            scenes,
        } => {
            let mut cfg = common.resolve()?;
            scene.apply(&mut cfg);
            pipeline.apply(&mut cfg);
            cfg.validate()?;
            let loaded = match &scenes {
                Some(dir) => load_scenes(dir)?,
                None => synthesize_scenes(&cfg)?,
            };
            let report = separate(&cfg, &loaded, common.jobs)?;
            let s = &report.summary;
            say(
                stdout,
                format!(
                    "{} scenes, mean SI-SDR {:.3} dB, stage-1 image {:.3} dB{}\n",
                    s.num_scenes,
                    s.mean_si_sdr_db,
                    s.mean_stage1_image_si_sdr_db,
                    s.mean_fcp_image_si_sdr_db
                        .map(|v| format!(", FCP image {v:.3} dB"))
                        .unwrap_or_default()
                ),
            );
        }
        Command::Eval {
            common,
            scenes,
            estimates,
            with_mixture,
        } => {
            let cfg = common.resolve()?;
            cfg.validate()?;
            let loaded = load_scenes(&scenes)?;
            let report = evaluate(&cfg, &loaded, &estimates, with_mixture, common.jobs)?;
            for s in &report.summary {
                say(stdout, format!("{:<16} mean SI-SDR {:.3} dB\n", s.system, s.mean_si_sdr_db));
            }
        }
        Command::Sweep {
            common,
            scene,
            pipeline,
            axis,
            values,
        } => {
            let mut cfg = common.resolve()?;
            scene.apply(&mut cfg);
            pipeline.apply(&mut cfg);
            let report = sweep(&cfg, axis.into(), &values, common.jobs)?;
            say(stdout, report.to_csv());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = stderr.write_all(rendered.as_bytes());
                EXIT_ARGS
            } else {
                let _ = stdout.write_all(rendered.as_bytes());
                EXIT_OK
            };
        }
    };
    match execute(cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
