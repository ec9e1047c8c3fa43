use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lqt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lqt")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = lqt(args);
    assert!(
        out.status.success(),
        "lqt {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> std::path::PathBuf {
    let out = dir.join("sim");
    let mut args = vec!["simulate", "--seed", "11", "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(&args);
    out.join("counts.csv")
}

#[test]
fn estimate_is_byte_identical_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), &["--target", "rx", "--noise", "hs", "--shots-per-setting", "5000"]);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["estimate", "--counts", s(&counts), "--method", "dia", "--out", s(&a)]);
    ok(&["estimate", "--counts", s(&counts), "--method", "dia", "--out", s(&b), "--jobs", "1"]);
    let ra = std::fs::read(a.join("result.json")).unwrap();
    let rb = std::fs::read(b.join("result.json")).unwrap();
    assert_eq!(ra, rb);

    // Same seed in a fresh directory gives the same counts.
    let again = simulate(
        &dir.path().join("again"),
        &["--target", "rx", "--noise", "hs", "--shots-per-setting", "5000"],
    );
    assert_eq!(std::fs::read(&counts).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn outputs_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), &["--target", "rx", "--noise", "rank1"]);
    let meta = read_json(&counts.with_file_name("counts.meta.json"));
    assert_eq!(meta["provenance"]["seed"], 11);
    assert_eq!(meta["provenance"]["tool"], "lqt");

    let est = dir.path().join("est");
    ok(&["estimate", "--counts", s(&counts), "--out", s(&est)]);
    let result = read_json(&est.join("result.json"));
    let hash = result["provenance"]["config_hash"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(result["provenance"]["version"], env!("CARGO_PKG_VERSION"));

    let diag = dir.path().join("diag");
    ok(&["diagnose", "--result", s(&est.join("result.json")), "--counts", s(&counts), "--out", s(&diag)]);
    let sky = std::fs::read_to_string(diag.join("skyline.csv")).unwrap();
    assert!(sky.starts_with("# tool: lqt\n"));
    assert!(sky.contains("# config_hash: "));
}

#[test]
fn diagnose_reproduces_trace_chi2() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), &["--target", "rx", "--noise", "hs", "--noise-trace", "0.02"]);
    for method in ["dia", "pgdm", "cs", "full"] {
        let est = dir.path().join(format!("est_{method}"));
        let diag = dir.path().join(format!("diag_{method}"));
        ok(&["estimate", "--counts", s(&counts), "--method", method, "--out", s(&est)]);
        let summary = ok(&["diagnose", "--result", s(&est.join("result.json")), "--counts", s(&counts), "--out", s(&diag)]);
        let chi2 = summary["chi2"].as_f64().unwrap();
        let recorded = summary["trace_chi2"].as_f64().unwrap();
        assert!(
            (chi2 - recorded).abs() <= 1e-9 * recorded.abs().max(1.0),
            "{method}: {chi2} vs {recorded}"
        );
        if method != "full" {
            assert_eq!(chi2, recorded, "{method}");
        }
    }
}

#[test]
fn cached_linearization_gives_the_same_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), &["--target", "ms", "--noise", "structured", "--shots-per-setting", "1000"]);
    let lin = dir.path().join("lin");
    ok(&["linearize", "--target", "ms", "--out", s(&lin)]);
    let meta = read_json(&lin.join("linear.json"));
    assert_eq!(meta["n_configurations"], 576);
    assert_eq!(meta["g_size"], 15);

    let fresh = dir.path().join("fresh");
    let cached = dir.path().join("cached");
    let common = ["estimate", "--counts", s(&counts), "--target", "ms", "--max-iter", "200"];
    let mut a = common.to_vec();
    a.extend(["--out", s(&fresh)]);
    ok(&a);
    let cache = lin.join("linear.bin");
    let mut b = common.to_vec();
    b.extend(["--out", s(&cached), "--linear", s(&cache)]);
    ok(&b);
    let ga = &read_json(&fresh.join("result.json"))["G_hat"];
    let gb = &read_json(&cached.join("result.json"))["G_hat"];
    assert_eq!(ga, gb);

    // A cache for other evolution times is refused.
    let other = dir.path().join("other");
    ok(&["linearize", "--target", "ms", "--times", "0.5", "--out", s(&other)]);
    let mut c = common.to_vec();
    let other_cache = other.join("linear.bin");
    c.extend(["--out", s(&cached), "--linear", s(&other_cache)]);
    let out = lqt(&c);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
}

#[test]
fn exact_data_from_a_model_recovers_it() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--target", "rx", "--noise", "rank1", "--noise-trace", "0.01"]);
    let model = dir.path().join("sim").join("model.json");
    let est = dir.path().join("est");
    ok(&["estimate", "--model", s(&model), "--shots-per-setting", "inf", "--out", s(&est)]);
    let truth = &read_json(&model)["G"];
    let fit = &read_json(&est.join("result.json"))["G_hat"];
    let mut diff = 0.0f64;
    let mut norm = 0.0f64;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..2 {
                let t = truth[i][j][k].as_f64().unwrap();
                let f = fit[i][j][k].as_f64().unwrap();
                diff += (t - f).powi(2);
                norm += t * t;
            }
        }
    }
    // Only the linearization error separates the two.
    assert!((diff / norm).sqrt() < 0.05, "relative error {}", (diff / norm).sqrt());
}

#[test]
fn failures_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = lqt(&["estimate", "--counts", s(&missing), "--out", s(dir.path())]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "io");

    let out = lqt(&["simulate", "--out", s(dir.path())]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");
    assert!(err["error"]["message"].as_str().unwrap().contains("--seed"));

    let out = lqt(&["bench", "--figure", "8", "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "usage");

    let out = lqt(&["simulate", "--seed", "1", "--shots-per-setting", "inf", "--out", s(dir.path())]);
    assert!(!out.status.success());
}

#[test]
fn corrupt_counts_name_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let counts = simulate(dir.path(), &["--target", "rx"]);
    let text = std::fs::read_to_string(&counts).unwrap();
    let broken = text.replacen("x,+,", "q,+,", 1);
    std::fs::write(&counts, broken).unwrap();
    let out = lqt(&["estimate", "--counts", s(&counts), "--out", s(dir.path())]);
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "parse");
    assert!(err["error"]["message"].as_str().unwrap().contains(":2:"));
}

fn csv_columns(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn bench_figure_2_writes_percentile_curves() {
    let dir = tempfile::tempdir().unwrap();
    ok(&[
        "bench", "--figure", "2", "--seed", "1", "--repeats", "3", "--full-iterations", "5", "--max-iter", "50", "--out",
        s(dir.path()),
    ]);
    let (header, rows) = csv_columns(&dir.path().join("fig2.csv"));
    assert_eq!(
        header,
        ["iteration", "dia_p20", "dia_median", "dia_p80", "full_p20", "full_median", "full_p80"]
    );
    assert!(rows.len() > 5);
    for r in &rows {
        assert!(r[1] <= r[2] && r[2] <= r[3]);
    }
}

#[test]
fn bench_figure_4_is_deterministic_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |out: &Path, jobs: &str| {
        ok(&[
            "bench", "--figure", "4", "--seed", "9", "--repeats", "2", "--sizes", "33,54", "--jobs", jobs, "--out", s(out),
        ])
    };
    run(&a, "1");
    run(&b, "2");
    let fa = std::fs::read(a.join("fig4.csv")).unwrap();
    assert_eq!(fa, std::fs::read(b.join("fig4.csv")).unwrap());
    let (header, rows) = csv_columns(&a.join("fig4.csv"));
    assert_eq!(header[0], "n_configurations");
    assert_eq!(header.len(), 7);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), [33.0, 54.0]);
}
