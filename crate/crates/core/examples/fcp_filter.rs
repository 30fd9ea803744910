//! Estimate one FCP filter and check it recovers a known convolutive relation.
use cxfilter::fcp::{apply_filter, estimate_fcp_filter, fcp_objective, FcpConfig, SpeakerFilter};
use cxfilter::spectral::{stft, StftConfig};
use cxfilter::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cxfilter::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = StftConfig::fcp_default();
    let x: Vec<f64> = (0..24000).map(|_| rng.random_range(-1.0..1.0)).collect();
    let s_hat = stft(&x, &cfg)?;

    // a 4-tap filter per bin, decaying over frames
    let taps = 4;
    let coeffs = (0..cfg.bins() * taps)
        .map(|i| {
            let k = (i % taps) as f64;
            Complex64::from_polar(0.5f64.powf(k), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    let truth = SpeakerFilter::from_coeffs(cfg.bins(), taps, coeffs)?;
    let target = apply_filter(&truth, &s_hat)?;

    let config = FcpConfig::default().with_taps(taps);
    let g = estimate_fcp_filter(&target, &s_hat, &config)?;
    println!("filter relative error {:.2e}", g.relative_error(&truth));
    let objective: f64 = fcp_objective(&target, &s_hat, &g, &config)?.iter().sum();
    println!("weighted residual at estimate {objective:.2e}");

    // longer filters stay exact: the extra taps come out near zero
    let long = estimate_fcp_filter(&target, &s_hat, &config.with_taps(12))?;
    let tail: f64 = (0..cfg.bins())
        .flat_map(|f| long.at(f)[taps..].iter().map(|z| z.norm_sqr()).collect::<Vec<_>>())
        .sum();
    println!("12-tap fit: energy beyond tap {taps} = {tail:.2e}");
    Ok(())
}
