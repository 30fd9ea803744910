use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cxfilter::scene::load_scene;
use serde_json::Value;

fn cxfilter(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxfilter"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn ok(output: Output) -> Output {
    assert!(
        output.status.success(),
        "exit {:?}: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    output
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn simulate_writes_valid_deterministic_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let args = ["simulate", "--count", "3", "--speakers", "2", "--duration", "1", "--seed", "5"];
    let out = ok(cxfilter(&args, &a));
    assert!(String::from_utf8_lossy(&out.stdout).contains("scene_002"));
    ok(cxfilter(&args, &b));
    for i in 0..3 {
        let name = format!("scene_{i:03}");
        let scene = load_scene(&a.join(&name)).unwrap();
        assert_eq!(scene.num_speakers(), 2);
        assert_eq!(scene.mixture_residual(), 0.0);
        for file in ["mixture.wav", "s1_image.wav", "s2_direct.wav", "noise.wav"] {
            assert_eq!(fs::read(a.join(&name).join(file)).unwrap(), fs::read(b.join(&name).join(file)).unwrap());
        }
    }
    assert!(!a.join("scene_003").exists());

    let three = dir.path().join("three");
    ok(cxfilter(&["simulate", "--count", "1", "--speakers", "3", "--duration", "1"], &three));
    assert_eq!(load_scene(&three.join("scene_000")).unwrap().num_speakers(), 3);
}

#[test]
fn separate_records_iterations_and_fcp_helps() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    ok(cxfilter(&["simulate", "--count", "2", "--duration", "2", "--seed", "3"], &scenes));
    let run = |name: &str, extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["separate", "--scenes", scenes.to_str().unwrap()];
        args.extend_from_slice(extra);
        ok(cxfilter(&args, &out));
        report(&out)
    };
    let off = run("off", &["--fcp", "off"]);
    let essu = run("essu", &["--fcp", "essu", "--iterations", "2"]);
    let mean = |r: &Value| r["summary"]["mean_si_sdr_db"].as_f64().unwrap();
    assert!(mean(&essu) >= mean(&off), "{} < {}", mean(&essu), mean(&off));
    assert_eq!(essu["config"]["pipeline"]["iterations"], 2);
    assert_eq!(essu["scenes"][0]["iterations"], 2);
    assert_eq!(essu["config_hash"].as_str().unwrap().len(), 16);
    assert_ne!(essu["config_hash"], off["config_hash"]);
    assert!(dir.path().join("essu/scene_001/estimates.json").is_file());
}

#[test]
fn eval_scores_truth_and_writes_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let scenes = dir.path().join("scenes");
    ok(cxfilter(&["simulate", "--count", "2", "--duration", "1.5", "--seed", "8"], &scenes));
    let s = scenes.to_str().unwrap();
    let truth = dir.path().join("truth");
    ok(cxfilter(
        &["separate", "--scenes", s, "--fcp", "off", "--refinement", "passthrough", "--degradation-snr", "inf"],
        &truth,
    ));
    let noisy = dir.path().join("noisy");
    ok(cxfilter(&["separate", "--scenes", s, "--fcp", "off", "--degradation-snr", "5"], &noisy));

    let eval = dir.path().join("eval");
    let truth_arg = format!("truth={}", truth.display());
    let noisy_arg = format!("noisy={}", noisy.display());
    ok(cxfilter(
        &["eval", "--scenes", s, "--estimates", &truth_arg, "--estimates", &noisy_arg, "--with-mixture"],
        &eval,
    ));
    let r = report(&eval);
    assert!(r["summary"][0]["mean_si_sdr_db"].as_f64().unwrap() >= 99.0);
    let sweep = fs::read_to_string(eval.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], "system,quantile,si_sdr_le_db");
    for system in ["truth", "noisy", "mixture"] {
        assert_eq!(lines.iter().filter(|l| l.starts_with(&format!("{system},"))).count(), 9);
    }
    let improvement = fs::read_to_string(eval.join("improvement.csv")).unwrap();
    assert!(improvement.starts_with("system_a,system_b,quantile,delta_db\n"));
    for line in improvement.lines().filter(|l| l.starts_with("truth,noisy,")) {
        let delta: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(delta > 0.0, "{line}");
    }

    // three-speaker scenes against two-speaker estimates
    let three = dir.path().join("three");
    ok(cxfilter(&["simulate", "--count", "2", "--speakers", "3", "--duration", "1.5"], &three));
    let out = cxfilter(&["eval", "--scenes", three.to_str().unwrap(), "--estimates", &noisy_arg], &dir.path().join("bad"));
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn sweep_over_taps_and_epsilon() {
    let dir = tempfile::tempdir().unwrap();
    let taps = dir.path().join("taps");
    // one speaker: with an interferer in the mixture, long filters start fitting its leakage
    let common = ["--speakers", "1", "--count", "2", "--duration", "2", "--t60", "0.3", "--degradation-snr", "inf"];
    let mut args = vec!["sweep", "--axis", "taps", "--values", "1,10,40"];
    args.extend_from_slice(&common);
    ok(cxfilter(&args, &taps));
    let csv = fs::read_to_string(taps.join("sweep.csv")).unwrap();
    let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
    assert!(header.contains(&"config_hash"));
    let col = header.iter().position(|h| *h == "mean_fcp_image_si_sdr_db").unwrap();
    let fcp: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(col).unwrap().parse().unwrap()).collect();
    assert_eq!(fcp.len(), 3);
    assert!(fcp.windows(2).all(|w| w[1] >= w[0]), "{fcp:?}");

    let eps = dir.path().join("eps");
    let mut args = vec!["sweep", "--axis", "epsilon", "--values", "1e-5,1e-3,1e-1"];
    args.extend_from_slice(&common);
    ok(cxfilter(&args, &eps));
    let csv = fs::read_to_string(eps.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(!csv.contains("NaN") && !csv.contains("inf"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = |args: &[&str]| cxfilter(args, &out).status.code();
    assert_eq!(code(&["sweep", "--axis", "frequency", "--values", "1"]), Some(5));
    assert_eq!(code(&["separate", "--refinement", "sometimes"]), Some(5));
    let missing = dir.path().join("missing");
    let output = cxfilter(&["separate", "--scenes", missing.to_str().unwrap()], &out);
    assert_eq!(output.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&output.stderr).contains("scene.json"));
    let file = dir.path().join("file");
    fs::write(&file, "x").unwrap();
    assert_eq!(
        cxfilter(&["simulate", "--count", "1", "--duration", "0.5"], &file.join("x")).status.code(),
        Some(2)
    );
}
