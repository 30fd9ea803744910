//! Training objectives evaluated on a swapped pair of estimates.
use cxfilter::objectives::{base_loss, composite_loss, mc_loss, pit_loss, Stage};
use cxfilter::spectral::{stft, StftConfig};

fn tone(freq: f64, len: usize) -> Vec<f64> {
    (0..len).map(|n| (2.0 * std::f64::consts::PI * freq * n as f64 / 8000.0).sin()).collect()
}

fn main() -> cxfilter::Result<()> {
    let cfg = StftConfig::dnn_default();
    let r: Vec<_> = [300.0, 900.0].iter().map(|&f| stft(&tone(f, 4000), &cfg)).collect::<Result<_, _>>()?;
    let a: Vec<_> = r.iter().map(|s| s.scaled(0.7)).collect();
    let mixture = cxfilter::spectral::ComplexSpectrogram::sum(&r)?;

    // estimates in the wrong order, slightly off in level
    let est_r = vec![r[1].scaled(0.9), r[0].scaled(1.1)];
    let est_a = vec![a[1].clone(), a[0].clone()];

    println!("base loss est0 vs ref0: {:.3}", base_loss(&est_r[0], &r[0])?);
    let pit = pit_loss(&est_r, &r)?;
    println!("PIT: {:.3} with assignment {:?}", pit.total, pit.permutation.unwrap());
    println!("mixture constraint: {:.3}", mc_loss(&est_r, &mixture)?);

    let joint = composite_loss(Stage::Stage1, &est_r, &est_a, &r, &a, &mixture, None)?;
    for t in &joint.terms {
        println!("  {:<10} {:.3}", t.name, t.value);
    }
    println!("stage-1 total {:.3}", joint.total);
    let fixed = composite_loss(Stage::Stage2, &est_r, &est_a, &r, &a, &mixture, Some(&[0, 1]))?;
    println!("stage-2 with identity assignment {:.3}", fixed.total);
    Ok(())
}
