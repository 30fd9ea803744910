//! Hand features to an external model through the exchange directory.
//!
//! The "model" here is a stand-in that averages the stage-1 estimate with
//! the FCP image; a real one would read the same files from another process.
use cxfilter::pipeline::{
    export_estimates, import_features, run_pipeline, DegradationSpec, PipelineConfig, Refinement, SeparatorOutput,
};
use cxfilter::scene::{generate_scene, SceneSpec};
use cxfilter::spectral::{stft, StftConfig};
use cxfilter::Error;

fn main() -> cxfilter::Result<()> {
    let root = std::env::temp_dir().join("cxfilter_external_refinement");
    let _ = std::fs::remove_dir_all(&root);
    let scene = generate_scene(&SceneSpec::new(2, 2.0, 9))?;
    let degradation = DegradationSpec::additive(5.0, 2);
    let config = PipelineConfig {
        refinement: Refinement::External,
        external_dir: Some(root.clone()),
        ..PipelineConfig::default()
    };
    let (features, estimates) = config.exchange_dirs(1).expect("external directory is set");

    // first pass stops at the boundary and leaves the features behind
    match run_pipeline(&scene, &degradation, &config, &[0.5]) {
        Err(Error::MissingComponent { path, .. }) => println!("waiting for {}", path.display()),
        other => {
            other?;
        }
    }
    let stack = import_features(&features)?;
    println!("{} speakers, {} samples per feature", stack.num_speakers(), stack.mixture.len());

    let dnn = StftConfig::dnn_default();
    let mut direct = Vec::new();
    let mut image = Vec::new();
    for spk in &stack.speakers {
        let fcp = spk.fcp_image.as_ref().unwrap_or(&spk.stage1_image);
        let avg: Vec<f64> = spk.stage1_image.iter().zip(fcp).map(|(a, b)| 0.5 * (a + b)).collect();
        direct.push(stft(&spk.stage1_direct, &dnn)?);
        image.push(stft(&avg, &dnn)?);
    }
    export_estimates(&SeparatorOutput::new(direct, image)?, &estimates)?;

    let res = run_pipeline(&scene, &degradation, &config, &[0.5])?;
    println!(
        "stage 1 {:.2} dB -> refined {:.2} dB",
        res.scores.stage1_image_si_sdr_db.iter().sum::<f64>() / 2.0,
        res.report.mean_si_sdr_db
    );
    Ok(())
}
