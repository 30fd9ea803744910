//! Plain FCP against the energy-sorted source update on unbalanced speakers.
use cxfilter::fcp::{FcpConfig, FcpVariant};
use cxfilter::metrics::si_sdr;
use cxfilter::pipeline::{oracle_separate, run_fcp_stage, DegradationSpec};
use cxfilter::scene::{generate_scene, SceneRanges};
use cxfilter::spectral::{istft, stft, StftConfig};

fn main() -> cxfilter::Result<()> {
    let dnn = StftConfig::dnn_default();
    let fcp = FcpConfig::default();
    let (mut plain, mut essu) = (Vec::new(), Vec::new());
    for seed in 0..6 {
        let mut spec = SceneRanges::default().draw(2, 3.0, 100 + seed);
        spec.speaker_gains_db = vec![0.0, -10.0];
        let scene = generate_scene(&spec)?;
        let sep = oracle_separate(&scene, &DegradationSpec::additive(10.0, seed), &dnn)?;
        let y = stft(&scene.mixture, &dnn)?;
        for (variant, acc) in [(FcpVariant::Fcp, &mut plain), (FcpVariant::FcpEssu, &mut essu)] {
            let out = run_fcp_stage(&y, &sep, variant, &fcp)?;
            // the quieter speaker is where the two differ
            let img = istft(&out.images[1], &dnn, scene.len())?;
            acc.push(si_sdr(&img, &scene.reverberant_image[1])?);
        }
        println!("scene {seed}: fcp {:6.2} dB  essu {:6.2} dB", plain[seed as usize], essu[seed as usize]);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("weak speaker mean: fcp {:.2} dB, essu {:.2} dB", mean(&plain), mean(&essu));
    Ok(())
}
