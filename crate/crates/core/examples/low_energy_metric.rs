//! Where in the energy distribution do errors sit? SI-SDR-LE by quantile.
use cxfilter::metrics::{quantile_sweep, si_sdr};
use cxfilter::pipeline::noise_at_snr;
use cxfilter::scene::{generate_scene, SceneSpec};
use cxfilter::spectral::StftConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn main() -> cxfilter::Result<()> {
    let scene = generate_scene(&SceneSpec::new(1, 3.0, 5))?;
    let reference = &scene.reverberant_image[0];
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    // same global SNR, different error shapes
    let white: Vec<f64> = reference.iter().zip(noise_at_snr(reference, 15.0, &mut rng)).map(|(r, n)| r + n).collect();
    // an echo 100 ms late, scaled to the same 15 dB
    let echo: Vec<f64> = (0..reference.len()).map(|n| if n >= 800 { reference[n - 800] } else { 0.0 }).collect();
    let gain = 10f64.powf(-15.0 / 20.0) * (energy(reference) / energy(&echo)).sqrt();
    let echoed: Vec<f64> = reference.iter().zip(&echo).map(|(r, e)| r + gain * e).collect();
    let dry = scene.direct_path[0].clone();

    let systems = vec![
        ("white".to_string(), vec![white]),
        ("echo".to_string(), vec![echoed]),
        ("direct".to_string(), vec![dry]),
    ];
    let quantiles = [0.1, 0.3, 0.5, 0.7, 0.9];
    let sweep = quantile_sweep(&systems, std::slice::from_ref(reference), &quantiles, &StftConfig::dnn_default())?;
    println!("{:<8} {:>8} {}", "system", "SI-SDR", quantiles.map(|q| format!("{q:>7}")).join(""));
    for (s, (name, ests)) in systems.iter().enumerate() {
        let row: String = sweep.values[s].iter().map(|v| format!("{v:7.2}")).collect();
        println!("{name:<8} {:8.2} {row}", si_sdr(&ests[0], reference)?);
    }
    let delta = sweep.improvement("white", "echo").unwrap();
    println!("white - echo: {:?}", delta.iter().map(|d| (d * 100.0).round() / 100.0).collect::<Vec<_>>());
    Ok(())
}
