//! Generate a reverberant two-speaker scene and write it to disk.
//!
//! cargo run --example synth_scene -- [OUT_DIR]
use cxfilter::scene::{generate_scene, load_scene, save_scene, SceneSpec};

fn db(x: &[f64]) -> f64 {
    10.0 * x.iter().map(|v| v * v).sum::<f64>().log10()
}

fn main() -> cxfilter::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "out/synth_scene".into());
    let mut spec = SceneSpec::new(2, 4.0, 7);
    spec.t60_s = 0.4;
    spec.direct_to_reverberant_ratio_db = 0.0;
    spec.speaker_gains_db = vec![0.0, -6.0];

    let scene = generate_scene(&spec)?;
    for c in 0..scene.num_speakers() {
        let rir = &scene.rirs[c];
        println!(
            "speaker {}: image {:.1} dB, DRR {:.1} dB, rir {} taps, delay {} samples",
            c + 1,
            db(&scene.reverberant_image[c]),
            rir.measured_drr_db(),
            rir.taps.len(),
            rir.direct_delay_samples
        );
    }
    println!("mixture residual {:.1e}", scene.mixture_residual());

    let dir = std::path::Path::new(&out);
    let manifest = save_scene(&scene, dir)?;
    let back = load_scene(dir)?;
    println!("wrote {} ({} samples, reload residual {:.1e})", manifest.display(), back.len(), back.mixture_residual());
    Ok(())
}
