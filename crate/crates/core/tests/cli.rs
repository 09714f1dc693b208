use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rosdos::io;
use serde_json::Value;

fn rosdos_cmd() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rosdos"));
    c.env_remove("ROSDOS_OUTPUT_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    rosdos_cmd().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn simulate(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["simulate", "--output-dir", path(dir)];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "simulate failed: {}", stderr(&o));
    o
}

#[test]
fn simulate_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = [
        "--p",
        "30",
        "--n",
        "200",
        "--noise",
        "separable",
        "--seed",
        "4",
    ];
    simulate(a.path(), &args);
    simulate(b.path(), &args);
    for f in ["clean.csv", "noisy.csv", "latent.csv", "metadata.json"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap(),
            "{f} differs between runs"
        );
    }
    let meta = json(&a.path().join("metadata.json"));
    assert_eq!(meta["seed"], 4);
    let noisy = io::read_matrix_file(&a.path().join("noisy.csv")).unwrap();
    assert_eq!((noisy.rows(), noisy.cols()), (30, 200));
    let latent = io::read_matrix_file(&a.path().join("latent.csv")).unwrap();
    assert_eq!((latent.rows(), latent.cols()), (1, 200));
}

#[test]
fn simulate_reports_the_manifold_snr() {
    let dir = tempfile::tempdir().unwrap();
    let o = simulate(
        dir.path(),
        &["--noise", "separable", "--alpha", "0.5", "--seed", "1"],
    );
    let msnr = json(&dir.path().join("metadata.json"))["msnr_db"]
        .as_f64()
        .unwrap();
    assert!((msnr - 3.5).abs() <= 2.0, "mSNR {msnr}");
    assert!(stdout(&o).contains(&format!("mSNR {msnr:.2} dB")));
}

#[test]
fn shrink_only_with_one_neighbor_returns_the_input() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--p", "40", "--n", "300", "--alpha", "0.5"]);
    let noisy = dir.path().join("noisy.csv");
    let o = run(&[
        "denoise",
        "--input",
        path(&noisy),
        "--output-dir",
        path(dir.path()),
        "--mode",
        "shrink-only",
        "--K",
        "50",
        "--k",
        "1",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let input = io::read_matrix_file(&noisy).unwrap();
    let output = io::read_matrix_file(&dir.path().join("denoised.csv")).unwrap();
    assert_eq!(input.as_matrix(), output.as_matrix());
}

#[test]
fn denoise_writes_diagnostics_and_echoes_its_config() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--p", "40", "--n", "300", "--alpha", "0.5"]);
    let out = dir.path().join("nested").join("x.csv");
    let diag = dir.path().join("diag.json");
    let o = run(&[
        "denoise",
        "--input",
        path(&dir.path().join("noisy.csv")),
        "--output",
        path(&out),
        "--diagnostics",
        path(&diag),
        "--K",
        "40",
        "--k",
        "8",
        "--h",
        "0.75",
        "--seed",
        "9",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header: Vec<String> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(String::from)
        .collect();
    assert_eq!(header[0], "# rosdos denoise");
    let echo: Value = serde_json::from_str(header[1].trim_start_matches("# ")).unwrap();
    let d = json(&diag);
    assert_eq!(d["config_echo"], echo);
    assert_eq!(d["diagnostics"]["bandwidth"], 0.75);
    assert_eq!(
        d["diagnostics"]["local_ranks"].as_array().unwrap().len(),
        300
    );
    let m = io::read_matrix_file(&out).unwrap();
    assert_eq!((m.rows(), m.cols()), (40, 300));
}

#[test]
fn invalid_neighbor_counts_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--p", "20", "--n", "100"]);
    let o = run(&[
        "denoise",
        "--input",
        path(&dir.path().join("noisy.csv")),
        "--output-dir",
        path(dir.path()),
        "--k",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("1 <= k < K"), "{}", stderr(&o));
    assert!(!dir.path().join("denoised.csv").exists());

    let o = run(&["denoise", "--input", "x.csv", "--h", "-1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn evaluate_scores_reconstructions() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--p", "20", "--n", "150", "--alpha", "0.5"]);
    let (clean, noisy) = (dir.path().join("clean.csv"), dir.path().join("noisy.csv"));

    let perfect = dir.path().join("perfect.json");
    let o = run(&[
        "evaluate",
        "--clean",
        path(&clean),
        "--denoised",
        path(&clean),
        "--output",
        path(&perfect),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&perfect);
    assert_eq!(r["nrmse_median"], 0.0);
    assert!(r["noise_ratio_median"].is_null());

    let o = run(&[
        "evaluate",
        "--clean",
        path(&clean),
        "--denoised",
        path(&noisy),
        "--noisy",
        path(&noisy),
        "--output-dir",
        path(dir.path()),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("report.json"));
    let (a, b) = (
        r["nrmse_median"].as_f64().unwrap(),
        r["noise_ratio_median"].as_f64().unwrap(),
    );
    assert!((a - b).abs() <= 1e-12 * b, "{a} vs {b}");
    let meta = json(&dir.path().join("metadata.json"));
    assert!((r["msnr_db"].as_f64().unwrap() - meta["msnr_db"].as_f64().unwrap()).abs() < 1e-9);
    assert_eq!(r["nrmse"].as_array().unwrap().len(), 150);
}

#[test]
fn evaluate_rejects_bad_inputs() {
    let dir = tempfile::tempdir().unwrap();
    simulate(dir.path(), &["--p", "20", "--n", "150"]);
    let other = tempfile::tempdir().unwrap();
    simulate(other.path(), &["--p", "20", "--n", "120"]);
    let clean = dir.path().join("clean.csv");

    let o = run(&[
        "evaluate",
        "--clean",
        path(&clean),
        "--denoised",
        path(&other.path().join("noisy.csv")),
        "--output-dir",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let missing = dir.path().join("missing.csv");
    let o = run(&[
        "evaluate",
        "--clean",
        path(&clean),
        "--denoised",
        path(&missing),
        "--output-dir",
        path(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("missing.csv"));

    let garbled = dir.path().join("garbled.csv");
    fs::write(&garbled, "1,2\n3,x\n").unwrap();
    let o = run(&[
        "evaluate",
        "--clean",
        path(&garbled),
        "--denoised",
        path(&garbled),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = rosdos_cmd()
        .env("ROSDOS_OUTPUT_DIR", dir.path())
        .args(["simulate", "--manifold", "m3", "--p", "10", "--n", "50"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let latent = io::read_matrix_file(&dir.path().join("latent.csv")).unwrap();
    assert_eq!((latent.rows(), latent.cols()), (2, 50));
    let header = fs::read_to_string(dir.path().join("clean.csv")).unwrap();
    assert!(header.starts_with("# rosdos simulate\n# {"));
}

fn experiment(dir: &Path, config: &str) -> (Output, PathBuf) {
    let cfg = dir.join("config-in.json");
    fs::write(&cfg, config).unwrap();
    let out = dir.join("out");
    let o = run(&[
        "experiment",
        "--config",
        path(&cfg),
        "--output-dir",
        path(&out),
    ]);
    (o, out)
}

#[test]
fn experiment_grid_covers_every_cell_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let (o, out) = experiment(dir.path(), r#"{"seed": 3, "p": 100, "n": 1000}"#);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("12 of 12 cells succeeded"));
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(
        lines[0],
        "manifold,noise,alpha,method,status,nrmse_median,nrmse_mean,noise_ratio_median,msnr_db"
    );
    assert_eq!(lines.len(), 1 + 12 * 4);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(4) == Some("ok")));
    assert_eq!(json(&out.join("failures.json")), Value::Array(vec![]));
    let cell = out.join("m1-gaussian-a1.0000");
    for f in [
        "rosdos.json",
        "diagnostics.json",
        "raw.json",
        "tsvd.json",
        "global-shrink.json",
    ] {
        assert!(cell.join(f).exists(), "missing {f}");
    }
    assert_eq!(json(&out.join("config.json"))["n"], 1000);
}

#[test]
fn experiment_reruns_are_identical() {
    let config = r#"{"seed": 5, "p": 60, "n": 400, "manifolds": ["m1"], "noises": ["separable"],
        "alphas": [0.5], "pipeline": {"global_neighbors": 40, "local_neighbors": 8}}"#;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (oa, out_a) = experiment(a.path(), config);
    let (ob, out_b) = experiment(b.path(), config);
    assert!(
        oa.status.success() && ob.status.success(),
        "{}",
        stderr(&oa)
    );
    assert_eq!(
        fs::read(out_a.join("summary.csv")).unwrap(),
        fs::read(out_b.join("summary.csv")).unwrap()
    );
}

#[test]
fn experiment_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = experiment(dir.path(), r#"{"alphas": []}"#);
    assert_eq!(o.status.code(), Some(2));
    let (o, _) = experiment(dir.path(), r#"{"p": "many"}"#);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["experiment", "--config", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(run(&[]).status.code(), Some(2));
    assert_eq!(
        run(&["simulate", "--manifold", "m2"]).status.code(),
        Some(2)
    );
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
