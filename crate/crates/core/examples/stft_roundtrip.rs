//! Analyse a chirp with both STFT configurations and resynthesise it.
use cxfilter::metrics::si_sdr;
use cxfilter::spectral::{convert_config, istft, stft, StftConfig};

fn main() -> cxfilter::Result<()> {
    let fs = 8000.0;
    let x: Vec<f64> = (0..16000)
        .map(|n| {
            let t = n as f64 / fs;
            (2.0 * std::f64::consts::PI * (200.0 + 400.0 * t) * t).sin()
        })
        .collect();

    for (name, cfg) in [("dnn", StftConfig::dnn_default()), ("fcp", StftConfig::fcp_default())] {
        let spec = stft(&x, &cfg)?;
        let y = istft(&spec, &cfg, x.len())?;
        let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        println!(
            "{name}: {} frames x {} bins, max error {err:.2e}, SI-SDR {:.1} dB",
            spec.frames(),
            spec.bins(),
            si_sdr(&y, &x)?
        );
    }

    // hop-aligned conversion between the two front ends
    let (small, large) = (StftConfig::dnn_default(), StftConfig::fcp_default());
    let dnn = stft(&x, &small)?;
    let fcp = convert_config(&dnn, &small, &large, x.len())?;
    println!("converted to {} bins, same {} frames", fcp.bins(), fcp.frames());
    Ok(())
}
