use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use exohawkes::events::BASIC_EMOTIONS;
use exohawkes::{EmotionParams, EmotionSet, HawkesParams, ShapeConfig};
use tempfile::TempDir;

fn exohawkes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exohawkes"))
        .args(args)
        .output()
        .expect("spawn binary")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn run_ok(args: &[&str]) {
    let out = exohawkes(args);
    assert_eq!(code(&out), 0, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn params(labels: &[&str], mu0: f64, alpha: f64) -> HawkesParams {
    let n = labels.len();
    HawkesParams {
        emotions: EmotionSet::new(labels.iter().copied()).unwrap(),
        shape: ShapeConfig::default(),
        per_emotion: labels
            .iter()
            .enumerate()
            .map(|(e, l)| EmotionParams {
                target: l.to_string(),
                mu0,
                gamma: 1.0,
                nu: (0..n).map(|f| if f == e { 1.0 } else { 0.05 }).collect(),
                alpha: (0..n).map(|f| if f == e { alpha } else { 0.02 }).collect(),
            })
            .collect(),
    }
}

fn save(dir: &Path, name: &str, p: &HawkesParams) -> String {
    let path = dir.join(name);
    p.save(&path).unwrap();
    path.to_str().unwrap().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read(p: PathBuf) -> Vec<u8> {
    std::fs::read(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

/// Simulates a small six-label corpus into `dir/sim`.
fn small_corpus(dir: &Path) -> (String, PathBuf) {
    let p = save(dir, "truth.json", &params(&BASIC_EMOTIONS, 0.5, 0.3));
    let out = dir.join("sim");
    run_ok(&["simulate", "--params", &p, "--sessions", "6", "--duration", "20", "--seed", "7", "--out", s(&out)]);
    (p, out.join("events.jsonl"))
}

#[test]
fn simulate_and_fit_are_byte_reproducible() {
    let dir = TempDir::new().unwrap();
    let (p, events) = small_corpus(dir.path());
    let again = dir.path().join("sim2");
    run_ok(&["simulate", "--params", &p, "--sessions", "6", "--duration", "20", "--seed", "7", "--out", s(&again)]);
    assert_eq!(read(events.clone()), read(again.join("events.jsonl")));

    let fit = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        run_ok(&[
            "fit", "--events", s(&events), "--bootstrap", "2", "--starts", "1", "--seed", "3", "--threads", threads,
            "--out", s(&out),
        ]);
        out
    };
    let a = fit("fit_a", "4");
    let b = fit("fit_b", "1");
    for f in ["params.json", "fit_report.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    // The params file loads as a params file.
    HawkesParams::load(a.join("params.json")).unwrap();
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let (p, _) = small_corpus(dir.path());
    let first = dir.path().join("sim");
    let cfg = first.join("resolved_config.toml");
    let text = String::from_utf8(read(cfg.clone())).unwrap();
    assert!(text.contains("seed = 7"), "{text}");
    assert!(text.contains(&p));
    let second = dir.path().join("again");
    run_ok(&["simulate", "--config", s(&cfg), "--out", s(&second)]);
    assert_eq!(read(first.join("events.jsonl")), read(second.join("events.jsonl")));
}

#[test]
fn no_filters_is_a_pass_through() {
    let dir = TempDir::new().unwrap();
    let (_, events) = small_corpus(dir.path());
    let out = dir.path().join("prep");
    run_ok(&["prepare", "--input", s(&events), "--no-filters", "--out", s(&out)]);
    assert_eq!(read(events), read(out.join("events.jsonl")));
    let report = String::from_utf8(read(out.join("filter_report.txt"))).unwrap();
    assert!(report.contains("filters disabled"));
    let stats = String::from_utf8(read(out.join("stats.csv"))).unwrap();
    assert_eq!(stats.lines().count(), 7);
    assert!(stats.starts_with("session,n_messages,median_gap_min,rate_joy,"));
}

#[test]
fn analyze_dumps_follow_label_order() {
    let dir = TempDir::new().unwrap();
    let labels = ["sadness", "joy", "fear"];
    let mut truth = params(&labels, 0.5, 0.3);
    truth.per_emotion[0].alpha = vec![0.1, 0.2, 0.3];
    truth.per_emotion[2].nu = vec![0.7, 0.8, 0.9];
    let p = save(dir.path(), "truth.json", &truth);
    let sim = dir.path().join("sim");
    run_ok(&["simulate", "--params", &p, "--sessions", "3", "--duration", "30", "--out", s(&sim)]);
    let events = sim.join("events.jsonl");
    let out = dir.path().join("an");
    run_ok(&[
        "analyze", "--params", &p, "--events", s(&events), "--input-labels", "sadness,joy,fear", "--grid", "5", "--out",
        s(&out),
    ]);
    let alpha = String::from_utf8(read(out.join("alpha.csv"))).unwrap();
    let lines: Vec<&str> = alpha.lines().collect();
    assert_eq!(lines[0], "target,sadness,joy,fear");
    assert_eq!(lines[1], "sadness,0.1,0.2,0.3");
    assert!(lines[2].starts_with("joy,"));
    let nu = String::from_utf8(read(out.join("nu.csv"))).unwrap();
    assert_eq!(nu.lines().nth(3), Some("fear,0.7,0.8,0.9"));
    let baseline = String::from_utf8(read(out.join("baseline.csv"))).unwrap();
    assert_eq!(baseline.lines().next(), Some("target,mu0,gamma"));

    let branching: serde_json::Value = serde_json::from_slice(&read(out.join("branching.json"))).unwrap();
    let direct = exohawkes::analytics::branching_report(&truth.alpha_matrix()).unwrap();
    assert_eq!(branching["spectral_radius"].as_f64().unwrap(), direct.spectral_radius);
    assert_eq!(branching["labels"], serde_json::json!(labels));
    for f in ["influence.csv", "influence_summary.csv", "residuals.csv", "influence_grid.csv", "resolved_config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn zero_alpha_gives_zero_endogenous_share() {
    let dir = TempDir::new().unwrap();
    let p = save(dir.path(), "truth.json", &params(&["a", "b"], 1.0, 0.0));
    let mut zero = params(&["a", "b"], 1.0, 0.0);
    for q in &mut zero.per_emotion {
        q.alpha = vec![0.0, 0.0];
    }
    let z = save(dir.path(), "zero.json", &zero);
    let sim = dir.path().join("sim");
    run_ok(&["simulate", "--params", &p, "--sessions", "2", "--duration", "30", "--out", s(&sim)]);
    let out = dir.path().join("an");
    run_ok(&[
        "analyze", "--params", &z, "--events", s(&sim.join("events.jsonl")), "--input-labels", "a,b", "--out", s(&out),
    ]);
    let csv = String::from_utf8(read(out.join("influence.csv"))).unwrap();
    let mut rows = 0;
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        if !cols[3].is_empty() {
            assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0, "{line}");
            rows += 1;
        }
    }
    assert_eq!(rows, 4);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("x");
    let missing = dir.path().join("missing.jsonl");

    // Input errors.
    assert_eq!(code(&exohawkes(&["fit", "--events", s(&missing), "--out", s(&out)])), 3);
    assert_eq!(code(&exohawkes(&["fit", "--out", s(&out)])), 3);
    assert_eq!(code(&exohawkes(&["fit", "--bogus"])), 3);
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "sede = 1\n").unwrap();
    assert_eq!(code(&exohawkes(&["--config", s(&bad), "fit"])), 3);

    // Label-set mismatch between params and events.
    let (p, events) = small_corpus(dir.path());
    let four = save(dir.path(), "four.json", &params(&["joy", "anger", "disgust", "sadness"], 0.5, 0.2));
    let out_an = exohawkes(&["analyze", "--params", &four, "--events", s(&events), "--out", s(&out)]);
    assert_eq!(code(&out_an), 3);
    assert!(String::from_utf8_lossy(&out_an.stderr).contains("labels"));
    // Restricting the events to the params' labels resolves it.
    run_ok(&[
        "analyze", "--params", &four, "--events", s(&events), "--emotions", "joy,anger,disgust,sadness", "--out", s(&out),
    ]);

    // Empty prepare output: a gap window nothing satisfies.
    let prep = exohawkes(&[
        "prepare", "--input", s(&events), "--min-gap", "100", "--max-gap", "200", "--out", s(&dir.path().join("p")),
    ]);
    assert_eq!(code(&prep), 2);
    assert!(dir.path().join("p/filter_report.txt").exists());

    // Explosive parameters abort the simulation.
    let hot = save(dir.path(), "hot.json", &params(&["a"], 1.0, 3.0));
    let sim = exohawkes(&["simulate", "--params", &hot, "--sessions", "1", "--max-events", "2000", "--out", s(&out)]);
    assert_eq!(code(&sim), 4, "{}", String::from_utf8_lossy(&sim.stderr));

    // Mismatched subtitle rate count.
    let rates = exohawkes(&["simulate", "--params", &p, "--subtitle-rate", "0.1,0.2", "--out", s(&out)]);
    assert_eq!(code(&rates), 3);
}

#[test]
fn four_label_and_powerlaw_fits() {
    let dir = TempDir::new().unwrap();
    let (_, events) = small_corpus(dir.path());
    let out = dir.path().join("fit4");
    run_ok(&[
        "fit", "--events", s(&events), "--emotions", "joy,anger,disgust,sadness", "--shape", "powerlaw", "--c", "2.5",
        "--bootstrap", "1", "--frac", "1.0", "--starts", "1", "--out", s(&out),
    ]);
    let p = HawkesParams::load(out.join("params.json")).unwrap();
    assert_eq!(p.emotions.labels(), ["joy", "anger", "disgust", "sadness"]);
    assert!(matches!(p.shape, ShapeConfig::Powerlaw { c, .. } if c == 2.5));
    let report: serde_json::Value = serde_json::from_slice(&read(out.join("fit_report.json"))).unwrap();
    assert_eq!(report["bootstrap"]["n"], 1);
    assert_eq!(report["bootstrap"]["sessions_per_replica"], 6);
}

#[test]
fn zero_subtitle_rate_writes_no_subtitles() {
    let dir = TempDir::new().unwrap();
    let p = save(dir.path(), "truth.json", &params(&["a", "b"], 1.0, 0.2));
    let out = dir.path().join("sim");
    run_ok(&["simulate", "--params", &p, "--sessions", "2", "--duration", "10", "--subtitle-rate", "0", "--out", s(&out)]);
    let text = String::from_utf8(read(out.join("events.jsonl"))).unwrap();
    assert!(text.contains("\"kind\":\"chat\""));
    assert!(!text.contains("\"kind\":\"subtitle\""), "{text}");
}

#[test]
fn validate_quick_and_failing_tolerance() {
    let dir = TempDir::new().unwrap();
    let p = save(dir.path(), "truth.json", &params(&["a", "b"], 2.0, 0.3));
    let out = dir.path().join("v");
    let started = std::time::Instant::now();
    let quick = exohawkes(&["validate", "--params", &p, "--quick", "--seed", "1", "--out", s(&out)]);
    assert!(started.elapsed().as_secs() < 60);
    assert!([0, 2].contains(&code(&quick)), "{}", String::from_utf8_lossy(&quick.stderr));
    let recovery: serde_json::Value = serde_json::from_slice(&read(out.join("recovery.json"))).unwrap();
    assert_eq!(recovery["n_sessions"], 5);
    assert_eq!(recovery["duration"], 30.0);
    assert!(out.join("recovery.csv").exists() && out.join("fit_report.json").exists());

    let strict = dir.path().join("strict.toml");
    std::fs::write(&strict, "[validate.tolerances]\nmu0_rel = 1e-12\n").unwrap();
    let fail = exohawkes(&["validate", "--config", s(&strict), "--params", &p, "--quick", "--out", s(&out)]);
    assert_eq!(code(&fail), 2);
    let msg = String::from_utf8_lossy(&fail.stderr);
    assert!(msg.contains("a mu0: truth 2") && msg.contains("b mu0"), "{msg}");
}
