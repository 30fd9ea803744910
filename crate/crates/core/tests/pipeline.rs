mod common;

use common::mean;
use cxfilter::fcp::{FcpConfig, FcpVariant};
use cxfilter::pipeline::{
    export_estimates, import_estimates, oracle_separate, run_fcp_stage, run_pipeline, DegradationSpec, FcpMode,
    PipelineConfig, Refinement, SeparatorOutput,
};
use cxfilter::scene::{generate_scene, SceneRanges, SceneSpec};
use cxfilter::spectral::{stft, StftConfig};
use cxfilter::Error;

fn substitute(iterations: usize) -> PipelineConfig {
    PipelineConfig {
        fcp_mode: FcpMode::FcpEssu,
        refinement: Refinement::FcpSubstitute,
        iterations,
        ..PipelineConfig::default()
    }
}

#[test]
fn oracle_fixed_point_across_iterations() {
    let scene = generate_scene(&SceneSpec::new(2, 2.0, 1)).unwrap();
    let one = run_pipeline(&scene, &DegradationSpec::oracle(), &substitute(1), &[0.5]).unwrap();
    let three = run_pipeline(&scene, &DegradationSpec::oracle(), &substitute(3), &[0.5]).unwrap();
    assert_eq!(one.output, three.output);
    assert_eq!(one.fcp, three.fcp);
    assert_eq!(three.iterations, 3);
}

#[test]
fn permuting_speakers_permutes_fcp_images() {
    let dnn = StftConfig::dnn_default();
    let mut spec = SceneSpec::new(3, 2.0, 2);
    spec.speaker_gains_db = vec![0.0, -4.0, -8.0];
    let scene = generate_scene(&spec).unwrap();
    let sep = oracle_separate(&scene, &DegradationSpec::additive(15.0, 3), &dnn).unwrap();
    let y = stft(&scene.mixture, &dnn).unwrap();
    let order = [2, 0, 1];
    let permuted = sep.permuted(&order);
    for variant in [FcpVariant::Fcp, FcpVariant::FcpEssu] {
        let a = run_fcp_stage(&y, &sep, variant, &FcpConfig::default()).unwrap();
        let b = run_fcp_stage(&y, &permuted, variant, &FcpConfig::default()).unwrap();
        for (i, &c) in order.iter().enumerate() {
            assert_eq!(b.images[i], a.images[c]);
        }
    }
}

#[test]
fn degradation_monotonicity_and_baseline() {
    let mut by_snr = Vec::new();
    let mut baseline = Vec::new();
    for snr in [f64::INFINITY, 20.0, 10.0, 0.0] {
        let mut finals = Vec::new();
        for s in 0..50u64 {
            let spec = SceneRanges::default().draw(2, 1.5, 9000 + s);
            let scene = generate_scene(&spec).unwrap();
            let res = run_pipeline(&scene, &DegradationSpec::additive(snr, s), &substitute(1), &[]).unwrap();
            finals.push(mean(&res.scores.final_image_si_sdr_db));
            if snr == 10.0 {
                baseline.push(mean(&res.scores.direct_as_image_si_sdr_db));
            }
        }
        by_snr.push(mean(&finals));
    }
    assert!(by_snr.windows(2).all(|w| w[0] >= w[1]), "{by_snr:?}");
    assert!(by_snr[2] > mean(&baseline), "{} vs {}", by_snr[2], mean(&baseline));
}

#[test]
fn external_refinement_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let scene = generate_scene(&SceneSpec::new(2, 1.0, 4)).unwrap();
    let cfg = PipelineConfig {
        refinement: Refinement::External,
        iterations: 2,
        external_dir: Some(dir.path().to_path_buf()),
        ..PipelineConfig::default()
    };
    let deg = DegradationSpec::additive(20.0, 5);
    match run_pipeline(&scene, &deg, &cfg, &[]) {
        Err(Error::MissingComponent { path, .. }) => assert_eq!(path, dir.path().join("iter1/estimates/estimates.json")),
        other => panic!("unexpected {other:?}"),
    }

    // a stand-in model that returns the oracle images
    let dnn = StftConfig::dnn_default();
    let refined = oracle_separate(&scene, &DegradationSpec::oracle(), &dnn).unwrap();
    for it in 1..=2 {
        export_estimates(&refined, &dir.path().join(format!("iter{it}/estimates"))).unwrap();
    }
    let res = run_pipeline(&scene, &deg, &cfg, &[0.5]).unwrap();
    assert_eq!(res.output, import_estimates(&dir.path().join("iter2/estimates")).unwrap());
    assert!(res.report.mean_si_sdr_db > 60.0);
    assert!(dir.path().join("iter2/features/s2_fcp_image.wav").is_file());
}

#[test]
fn separator_output_rejects_mismatched_lists() {
    let dnn = StftConfig::dnn_default();
    let a = stft(&vec![0.1; 800], &dnn).unwrap();
    let b = stft(&vec![0.1; 1600], &dnn).unwrap();
    assert!(SeparatorOutput::new(vec![a.clone()], vec![]).is_err());
    assert!(SeparatorOutput::new(vec![a.clone()], vec![b]).is_err());
    assert!(SeparatorOutput::new(vec![], vec![]).is_err());
    assert_eq!(SeparatorOutput::new(vec![a.clone()], vec![a]).unwrap().num_speakers(), 1);
}
