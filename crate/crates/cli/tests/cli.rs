use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn dispersia(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dispersia"))
        .args(args)
        .env_remove("DISPERSIA_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Deterministic positive series with a rough gamma shape.
fn rainfall_like(dir: &Path) -> PathBuf {
    let mut text = String::from("year,rainfall\n");
    for i in 0..60u32 {
        let u = ((i * 37 + 11) % 60) as f64 / 60.0 + 1.0 / 120.0;
        let x = 800.0 + 250.0 * (u - 0.5) + 40.0 * (u * 9.0).sin();
        text.push_str(&format!("{},{x:.1}\n", 1901 + i));
    }
    write(dir, "series.csv", &text)
}

#[test]
fn validity_flags_exponential_model() {
    let o = dispersia(&["validity", "--family", "exponential"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    assert!(out.contains("alpha:             4.0000"), "{out}");
    assert!(out.contains("INVALID: chi-square(n-1) approximation unjustified for exponential"), "{out}");
    assert!(out.contains("!! WARNING"));
}

#[test]
fn validity_accepts_poisson_model() {
    let o = dispersia(&["validity", "--family", "poisson"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("VALID (|alpha - 2| <="));
    assert!(!stdout(&o).contains("WARNING"));
}

#[test]
fn validity_gamma_needs_shape() {
    let o = dispersia(&["validity", "--family", "gamma-known-shape"]);
    assert_eq!(code(&o), 64);
    let o = dispersia(&["validity", "--family", "gamma-known-shape", "--shape", "2"]);
    assert!(stdout(&o).contains("alpha:             3.0000"));
}

#[test]
fn unknown_flags_are_usage_errors() {
    assert_eq!(code(&dispersia(&["validity", "--family", "cauchy"])), 64);
    assert_eq!(code(&dispersia(&["bogus"])), 64);
    assert_eq!(code(&dispersia(&["--help"])), 0);
}

#[test]
fn vartest_reports_statistic_and_both_conventions() {
    let dir = TempDir::new().unwrap();
    let csv = rainfall_like(dir.path());
    let o = dispersia(&["vartest", "--family", "gamma", "--input", csv.to_str().unwrap(), "--column", "rainfall"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    for needle in ["D:", "p normal nu=n:", "p normal nu=n-1:", "p (chi2 n-1, 2s):", "verdict:"] {
        assert!(out.contains(needle), "missing {needle} in\n{out}");
    }
    let d: f64 = out.lines().find(|l| l.starts_with("D:")).unwrap()[2..].trim().parse().unwrap();
    assert!(d > 0.0);
}

#[test]
fn fit_and_gof_run_on_a_column() {
    let dir = TempDir::new().unwrap();
    let csv = rainfall_like(dir.path());
    let input = csv.to_str().unwrap();
    let o = dispersia(&["fit", "--family", "weibull", "--input", input, "--column", "rainfall"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("converged:         true"));

    let o = dispersia(&["gof", "chi2", "--family", "gamma", "--input", input, "--column", "rainfall"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("df:"));

    let o = dispersia(&["gof", "ks", "--family", "gamma", "--input", input, "--column", "rainfall"]);
    assert!(stdout(&o).contains("WARNING"), "fitted KS should warn");
    let o = dispersia(&[
        "gof", "ks", "--family", "gamma", "--input", input, "--column", "rainfall", "--params", "shape=40,scale=20",
    ]);
    assert_eq!(code(&o), 0);
    assert!(!stdout(&o).contains("WARNING"));
}

#[test]
fn bad_data_exits_with_data_code() {
    let dir = TempDir::new().unwrap();
    let bad = write(dir.path(), "bad.csv", "year,rainfall\n1901,800\n1902,abc\n");
    let o = dispersia(&["fit", "--family", "gamma", "--input", bad.to_str().unwrap(), "--column", "rainfall"]);
    assert_eq!(code(&o), 65);
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let good = rainfall_like(dir.path());
    let o = dispersia(&["fit", "--family", "gamma", "--input", good.to_str().unwrap(), "--column", "rain"]);
    assert_eq!(code(&o), 65);
    assert!(stderr(&o).contains("rainfall"), "available columns listed");

    let missing = dir.path().join("absent.csv");
    let o = dispersia(&["fit", "--family", "gamma", "--input", missing.to_str().unwrap(), "--column", "x"]);
    assert_eq!(code(&o), 65);
}

#[test]
fn bad_config_exits_with_config_code() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"family": "gamma_shape", "parameter_grid": [1, -2], "fixed_params": {"scale": 2}, "sample_sizes": [20]}"#,
    );
    let o = dispersia(&["simulate", "table1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 66);
    assert!(stderr(&o).contains("parameter_grid[1]"), "{}", stderr(&o));

    let cfg = write(dir.path(), "d.json", r#"{"family": "gamma_shape", "parameter_grid": [1], "sample_sizes": [20], "colour": 1}"#);
    let o = dispersia(&["simulate", "table1", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 66);
    assert!(stderr(&o).contains("colour"), "{}", stderr(&o));
}

fn small_grid(dir: &Path) -> PathBuf {
    write(
        dir,
        "grid.json",
        r#"{"family": "weibull_shape", "parameter_grid": [1, 2], "fixed_params": {"scale": 1}, "sample_sizes": [25], "replicates": 300}"#,
    )
}

#[test]
fn simulation_is_reproducible_and_announces_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = small_grid(dir.path());
    let cfg = cfg.to_str().unwrap();
    let a = dispersia(&["simulate", "table1", "--config", cfg, "--format", "csv"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert!(stderr(&a).contains("master seed: 42"));
    let b = dispersia(&["simulate", "table1", "--config", cfg, "--format", "csv", "--threads", "3"]);
    assert_eq!(stdout(&a), stdout(&b));

    let c = dispersia(&["simulate", "table1", "--config", cfg, "--format", "csv", "--seed", "7"]);
    assert!(stderr(&c).contains("master seed: 7"));
    assert_ne!(stdout(&a), stdout(&c));

    let env = Command::new(env!("CARGO_BIN_EXE_dispersia"))
        .args(["simulate", "table1", "--config", cfg, "--format", "csv"])
        .env("DISPERSIA_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(stdout(&env), stdout(&c));
}

#[test]
fn custom_rejection_writes_report_and_histogram() {
    let dir = TempDir::new().unwrap();
    let cfg = small_grid(dir.path());
    let out = dir.path().join("report.csv");
    let hist = dir.path().join("hist.csv");
    let o = dispersia(&[
        "simulate",
        "rejection",
        "--scenario",
        "custom",
        "--config",
        cfg.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out.to_str().unwrap(),
        "--histogram",
        hist.to_str().unwrap(),
        "--bins",
        "10",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report = fs::read_to_string(&out).unwrap();
    assert!(report.lines().next().unwrap().starts_with("family,params,n,replicates,rejections,rate"));
    assert_eq!(report.lines().count(), 3);
    let hist = fs::read_to_string(&hist).unwrap();
    assert!(hist.starts_with("cell,n,bin_lower,bin_upper,count,chi2_expected"));
    let counts: u64 = hist.lines().skip(1).map(|l| l.split(',').nth(4).unwrap().parse::<u64>().unwrap()).sum();
    assert_eq!(counts, 600);
}

#[test]
fn custom_rejection_requires_config() {
    let o = dispersia(&["simulate", "rejection", "--scenario", "custom"]);
    assert_eq!(code(&o), 64);
}

#[test]
fn preset_accepts_replicate_override() {
    let o = dispersia(&["simulate", "rejection", "--scenario", "mooley-false-reject", "--replicates", "500", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.contains(",100,500,"), "{row}");
}
