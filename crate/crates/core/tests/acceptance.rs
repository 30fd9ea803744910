//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.
//!
//! `cargo test --release --test acceptance` (the test profile is optimised, so
//! plain `cargo test --test acceptance` works too).

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use cxfilter::experiment::{derive_seed, synthesize_scenes, ExperimentConfig, SceneSet};
use cxfilter::fcp::{estimate_fcp_filter, fcp_essu_separate, fcp_separate, FcpConfig, FcpVariant, SpeakerFilter};
use cxfilter::metrics::{low_energy_mask, quantile_sweep, si_sdr, si_sdr_le, QuantileSweep};
use cxfilter::objectives::{enh_loss, mc_loss, permutations, pit_loss};
use cxfilter::pipeline::{
    oracle_separate, run_fcp_stage, run_pipeline, DegradationSpec, FcpMode, PipelineConfig, Refinement,
};
use cxfilter::scene::{generate_scene, SceneRanges};
use cxfilter::spectral::{istft, stft, ComplexSpectrogram, StftConfig};
use cxfilter::Complex64;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn c1_stft_round_trip() -> Outcome {
    let mut rng = rng(1);
    let mut worst = f64::INFINITY;
    for cfg in [StftConfig::dnn_default(), StftConfig::fcp_default()] {
        for _ in 0..20 {
            let x = gaussian_signal(16000, &mut rng);
            let y = istft(&stft(&x, &cfg).unwrap(), &cfg, x.len()).unwrap();
            worst = worst.min(si_sdr(&y, &x).unwrap());
        }
    }
    outcome(worst >= 60.0, format!("min SI-SDR {worst:.1} dB over 2x20 signals (need >= 60)"))
}

fn c2_wls_oracle() -> Outcome {
    let mut rng = rng(2);
    let cfg = tiny_config();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let frames = rng.random_range(1..=8);
        let taps = rng.random_range(1..=3);
        let target = random_spec(frames, cfg, &mut rng);
        let source = random_spec(frames, cfg, &mut rng);
        let fcp = FcpConfig {
            stft: cfg,
            ..FcpConfig::default().with_taps(taps)
        };
        let got = estimate_fcp_filter(&target, &source, &fcp).unwrap();
        let lambda = global_lambda(&target, fcp.epsilon);
        let bins = cfg.bins();
        for f in 0..bins {
            let lam: Vec<f64> = (0..frames).map(|t| lambda[t * bins + f]).collect();
            let want = wls_oracle(&target.bin_track(f), &source.bin_track(f), &lam, taps);
            worst = worst.max(rel_err(got.at(f), &want));
        }
    }
    outcome(worst <= 1e-8, format!("max relative error {worst:.2e} over 100 instances (need <= 1e-8)"))
}

fn c3_exact_recovery() -> Outcome {
    let mut rng = rng(3);
    let cfg = StftConfig::fcp_default();
    let mut worst_filter: f64 = 0.0;
    let mut worst_image: f64 = 0.0;
    for taps in [1, 5, 40] {
        let frames = 250;
        let source = random_spec(frames, cfg, &mut rng);
        let truth: Vec<Vec<Complex64>> = (0..cfg.bins())
            .map(|_| (0..taps).map(|k| cgauss(&mut rng) * (-(k as f64) / 8.0).exp()).collect())
            .collect();
        let target = filter_direct(&truth, &source);
        let fcp = FcpConfig::default().with_taps(taps);
        let est = estimate_fcp_filter(&target, &source, &fcp).unwrap();
        let want = SpeakerFilter::from_coeffs(cfg.bins(), taps, truth.concat()).unwrap();
        worst_filter = worst_filter.max(est.relative_error(&want));
        let image = cxfilter::fcp::apply_filter(&est, &source).unwrap();
        worst_image = worst_image.max(image.relative_error(&target));
    }
    outcome(
        worst_filter <= 1e-6 && worst_image <= 1e-6,
        format!("filter error {worst_filter:.2e}, image error {worst_image:.2e} for A in {{1,5,40}} (need <= 1e-6)"),
    )
}

fn c4_essu_single_source() -> Outcome {
    let cfg = FcpConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let spec = SceneRanges::default().draw(1, 2.0, 400 + seed);
        let scene = generate_scene(&spec).unwrap();
        let y = stft(&scene.mixture, &cfg.stft).unwrap();
        let s = vec![stft(&scene.direct_path[0], &cfg.stft).unwrap()];
        let a = fcp_separate(&y, &s, &cfg).unwrap();
        let b = fcp_essu_separate(&y, &s, &cfg).unwrap();
        worst = worst
            .max(b.images[0].relative_error(&a.images[0]))
            .max(b.filters[0].relative_error(&a.filters[0]));
    }
    outcome(worst <= 1e-10, format!("max relative difference {worst:.2e} over 10 scenes (need <= 1e-10)"))
}

fn c5_reverberation_restored() -> Outcome {
    let ranges = SceneRanges {
        drr_db: (-5.0, 0.0),
        ..SceneRanges::default()
    };
    let dnn = StftConfig::dnn_default();
    let fcp = FcpConfig::default();
    let mut gains = Vec::new();
    for s in 0..50 {
        let spec = ranges.draw(1, 3.0, 500 + s);
        let scene = generate_scene(&spec).unwrap();
        let sep = oracle_separate(&scene, &DegradationSpec::oracle(), &dnn).unwrap();
        let y = stft(&scene.mixture, &dnn).unwrap();
        let out = run_fcp_stage(&y, &sep, FcpVariant::Fcp, &fcp).unwrap();
        let image = istft(&out.images[0], &dnn, scene.len()).unwrap();
        let truth = &scene.reverberant_image[0];
        gains.push(si_sdr(&image, truth).unwrap() - si_sdr(&scene.direct_path[0], truth).unwrap());
    }
    let g = mean(&gains);
    outcome(g >= 5.0, format!("mean gain {g:.2} dB over 50 scenes (need >= 5)"))
}

fn c6_essu_weak_source() -> Outcome {
    let dnn = StftConfig::dnn_default();
    let fcp = FcpConfig::default();
    let mut plain = Vec::new();
    let mut essu = Vec::new();
    for s in 0..50u64 {
        let mut spec = SceneRanges::default().draw(2, 3.0, 600 + s);
        spec.speaker_gains_db = vec![0.0, -10.0];
        let scene = generate_scene(&spec).unwrap();
        let deg = DegradationSpec::additive(10.0, derive_seed(6, s, 0));
        let sep = oracle_separate(&scene, &deg, &dnn).unwrap();
        let y = stft(&scene.mixture, &dnn).unwrap();
        for (variant, acc) in [(FcpVariant::Fcp, &mut plain), (FcpVariant::FcpEssu, &mut essu)] {
            let out = run_fcp_stage(&y, &sep, variant, &fcp).unwrap();
            let weak = istft(&out.images[1], &dnn, scene.len()).unwrap();
            acc.push(si_sdr(&weak, &scene.reverberant_image[1]).unwrap());
        }
    }
    let (p, e) = (mean(&plain), mean(&essu));
    outcome(e >= p, format!("weaker speaker: ESSU {e:.3} dB vs FCP {p:.3} dB over 50 scenes (need ESSU >= FCP)"))
}

/// Independent base loss and brute-force PIT over an explicit permutation list.
fn brute_pit(ests: &[ComplexSpectrogram], refs: &[ComplexSpectrogram]) -> f64 {
    let l1 = |a: &ComplexSpectrogram, b: &ComplexSpectrogram| {
        let s: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x.re - y.re).abs() + (x.im - y.im).abs() + (x.norm() - y.norm()).abs())
            .sum();
        s / (3.0 * a.data().len() as f64)
    };
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]]
        .iter()
        .map(|p| (0..3).map(|r| l1(&ests[p[r]], &refs[r])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

fn c7_losses() -> Outcome {
    let mut rng = rng(7);
    let cfg = StftConfig::new(8, 4, 8, 8000).unwrap();
    let mut pit_mismatch = 0;
    for _ in 0..100 {
        let ests: Vec<_> = (0..3).map(|_| random_spec(6, cfg, &mut rng)).collect();
        let refs: Vec<_> = (0..3).map(|_| random_spec(6, cfg, &mut rng)).collect();
        if pit_loss(&ests, &refs).unwrap().total != brute_pit(&ests, &refs) {
            pit_mismatch += 1;
        }
    }
    // dyadic coefficients keep the sum exact
    let mut mc_max: f64 = 0.0;
    for _ in 0..20 {
        let ests: Vec<_> = (0..3)
            .map(|_| {
                let data = (0..6 * cfg.bins())
                    .map(|_| {
                        Complex64::new(
                            f64::from(rng.random_range(-64..64)) / 8.0,
                            f64::from(rng.random_range(-64..64)) / 8.0,
                        )
                    })
                    .collect();
                ComplexSpectrogram::from_data(6, data, cfg, 0).unwrap()
            })
            .collect();
        let mixture = ComplexSpectrogram::sum(&ests).unwrap();
        mc_max = mc_max.max(mc_loss(&ests, &mixture).unwrap());
    }
    let mut order_violations = 0;
    for _ in 0..50 {
        let ests: Vec<_> = (0..3).map(|_| random_spec(5, cfg, &mut rng)).collect();
        let refs: Vec<_> = (0..3).map(|_| random_spec(5, cfg, &mut rng)).collect();
        let pit = pit_loss(&ests, &refs).unwrap().total;
        for p in permutations(3) {
            if pit > enh_loss(&ests, &refs, &p).unwrap() {
                order_violations += 1;
            }
        }
    }
    outcome(
        pit_mismatch == 0 && mc_max == 0.0 && order_violations == 0,
        format!(
            "PIT mismatches {pit_mismatch}/100, max MC loss on consistent sets {mc_max:e}, PIT > Enh in {order_violations}/300"
        ),
    )
}

fn c8_metrics() -> Outcome {
    let mut rng = rng(8);
    let reference = gaussian_signal(8000, &mut rng);
    let est: Vec<f64> = reference.iter().map(|r| r + 0.3 * rng.random_range(-1.0..1.0)).collect();
    let base = si_sdr(&est, &reference).unwrap();
    let scale_dev = [0.1, 1.0, 10.0]
        .iter()
        .map(|b| {
            let scaled: Vec<f64> = est.iter().map(|v| v * b).collect();
            (si_sdr(&scaled, &reference).unwrap() - base).abs()
        })
        .fold(0.0, f64::max);
    let cfg = StftConfig::dnn_default();
    let le = si_sdr_le(&est, &reference, 1.0, &cfg).unwrap();
    let le_dev = (le - base).abs();
    // energies 9, 1 / 4, 16 / 0.25, 4 in 3 frames x 2 bins; median by nearest rank is 4
    let tiny = StftConfig::new(2, 1, 2, 8000).unwrap();
    let data = [3.0, 1.0, 2.0, 4.0, 0.5, 2.0].iter().map(|a| Complex64::new(*a, 0.0)).collect();
    let spec = ComplexSpectrogram::from_data(3, data, tiny, 0).unwrap();
    let mask = low_energy_mask(&spec, 0.5).unwrap();
    let mask_ok = mask == [false, true, true, false, true, true];
    outcome(
        scale_dev <= 1e-6 && le_dev <= 0.1 && mask_ok,
        format!("scale deviation {scale_dev:.1e} dB, |LE(1.0) - SI-SDR| {le_dev:.4} dB, mask fixture {mask_ok}"),
    )
}

fn c9_quantile_direction() -> Outcome {
    let quantiles: Vec<f64> = (1..=9).map(|i| f64::from(i) / 10.0).collect();
    let cfg = ExperimentConfig {
        seed: 9,
        scenes: SceneSet {
            count: 120,
            num_speakers: 2,
            duration_s: 3.0,
            ..SceneSet::default()
        },
        degradation: DegradationSpec::additive(0.0, 0),
        quantiles: quantiles.clone(),
        ..ExperimentConfig::default()
    };
    let with_fcp = PipelineConfig {
        fcp_mode: FcpMode::FcpEssu,
        refinement: Refinement::FcpSubstitute,
        ..PipelineConfig::default()
    };
    let without = PipelineConfig {
        fcp_mode: FcpMode::Off,
        refinement: Refinement::Passthrough,
        ..PipelineConfig::default()
    };
    let dnn = StftConfig::dnn_default();
    let scenes = synthesize_scenes(&cfg).unwrap();
    let mut sweeps = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        let deg = cfg.degradation_for(i);
        let mut systems = Vec::new();
        for (name, pipe) in [("essu", &with_fcp), ("off", &without)] {
            let res = run_pipeline(&s.scene, &deg, pipe, &[]).unwrap();
            let images = res.output.image_signals().unwrap();
            let aligned = res.report.permutation.iter().map(|&e| images[e].clone()).collect();
            systems.push((name.to_string(), aligned));
        }
        sweeps.push(quantile_sweep(&systems, &s.scene.reverberant_image, &quantiles, &dnn).unwrap());
    }
    let curve = QuantileSweep::mean(&sweeps).unwrap().improvement("essu", "off").unwrap();
    let min = curve.iter().copied().fold(f64::INFINITY, f64::min);
    let shown: Vec<String> = curve.iter().map(|v| format!("{v:+.2}")).collect();
    outcome(
        min > 0.0,
        format!("improvement at q=0.1..0.9 [{}] dB over 120 scenes (need all > 0)", shown.join(" ")),
    )
}

fn c10_cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, jobs: &str| {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_cxfilter"))
            .args(["separate", "--count", "3", "--duration", "2", "--seed", "11", "--iterations", "2"])
            .args(["--jobs", jobs, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out.join("report.json")).unwrap()
    };
    let a = run("a", "1");
    let b = run("b", "4");
    outcome(a == b && !a.is_empty(), format!("report.json {} bytes, identical: {}", a.len(), a == b))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("STFT round trip", Duration::from_secs(10), c1_stft_round_trip),
        ("WLS oracle equivalence", Duration::from_secs(5), c2_wls_oracle),
        ("exact filter recovery", Duration::from_secs(30), c3_exact_recovery),
        ("ESSU single-source degeneracy", Duration::from_secs(20), c4_essu_single_source),
        ("FCP restores reverberation", Duration::from_secs(120), c5_reverberation_restored),
        ("ESSU beats FCP for weak sources", Duration::from_secs(300), c6_essu_weak_source),
        ("loss suite", Duration::from_secs(30), c7_losses),
        ("metric properties", Duration::from_secs(10), c8_metrics),
        ("quantile-sweep direction", Duration::from_secs(300), c9_quantile_direction),
        ("CLI determinism", Duration::from_secs(60), c10_cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run);
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && elapsed <= *budget, o.detail),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2}. {name}: {detail}; {:.1} s (budget {} s)",
            if pass { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
