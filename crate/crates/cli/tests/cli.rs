use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn magmlmc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_magmlmc")).args(args).output().unwrap()
}

fn power_law_config(dir: &Path, fixed_level: Option<usize>) -> String {
    let fixed = fixed_level.map_or("null".to_string(), |l| l.to_string());
    let text = format!(
        r#"{{
  "problem": {{
    "kind": "power-law",
    "inputs": [
      {{ "name": "c", "mean": 2.0, "half_width": 2.0 }},
      {{ "name": "a", "mean": 0.0, "half_width": 0.5 }}
    ]
  }},
  "hierarchy": {{ "h0": 1.0, "delta": 0.5, "levels": 8, "strategy": "nested" }},
  "eps": [0.01, 0.005],
  "seed": 1,
  "mlmc": {{ "fixed_level": {fixed} }},
  "repetitions": 10,
  "rate_samples": 100,
  "rate_max_level": 4,
  "collocation_degree": 4,
  "reference_points": 100,
  "out_dir": "{}"
}}"#,
        dir.join("out").display()
    );
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn show_config_applies_flags() {
    let out = magmlmc(&["show-config", "--seed", "42", "--eps", "1e-3,5e-4", "--strategy", "nested", "--workers", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"seed\": 42"), "{text}");
    assert!(text.contains("0.0005"));
    assert!(text.contains("\"strategy\": \"nested\""));
    assert!(text.contains("\"workers\": 2"));
}

#[test]
fn mlmc_within_bounds_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = power_law_config(dir.path(), None);
    let out = magmlmc(&["mlmc", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert!(summary.starts_with("eps,mean,var,cost,L,seed,3sigma\n"));
    assert_eq!(summary.lines().count(), 3);
}

#[test]
fn out_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = power_law_config(dir.path(), None);
    let other = dir.path().join("elsewhere");
    let out = magmlmc(&["convergence", "--config", &cfg, "--out", other.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(other.join("convergence.csv").exists());
    assert!(other.join("rates.csv").exists());
}

#[test]
fn violated_bound_exits_one() {
    // level 0 carries an O(1) bias, far above the tolerance
    let dir = tempfile::tempdir().unwrap();
    let cfg = power_law_config(dir.path(), Some(0));
    let out = magmlmc(&["mlmc", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stdout).unwrap().contains("VIOLATED"));
}

#[test]
fn configuration_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"problem\": 3 }").unwrap();
    let out = magmlmc(&["mlmc", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("bad.json"));

    let missing = magmlmc(&["oracle", "--config", "/nonexistent/config.json"]);
    assert_eq!(missing.status.code(), Some(2));

    let negative = magmlmc(&["show-config", "--eps=-1"]);
    assert_eq!(negative.status.code(), Some(2));
}

#[test]
fn mse_study_with_too_few_runs_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = power_law_config(dir.path(), None);
    let text = fs::read_to_string(&cfg).unwrap().replace("\"repetitions\": 10", "\"repetitions\": 3");
    fs::write(&cfg, text).unwrap();
    let out = magmlmc(&["mse-study", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("repetitions"));
}
