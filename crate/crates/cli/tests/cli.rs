use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emf-tradeoff"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small_config(dir: &Path, extra: &str) -> String {
    let path = dir.join("config.json");
    fs::write(
        &path,
        format!(
            r#"{{
  "sim": {{"scenario_count": 4, "grid_spacing_m": 1.0}},
  "surrogate": {{"ranks": [1, 2], "degrees": [1], "sample_count": 200, "histogram_bins": 8}}{extra}
}}"#
        ),
    )
    .unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn full_pipeline_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("run");
    let out = out.to_str().unwrap();
    for args in [
        vec!["generate"],
        vec!["evaluate"],
        vec!["fit", "--metric", "smean", "--strategy", "3"],
        vec!["report"],
    ] {
        let mut all = vec!["--config", cfg.as_str(), "--out", out, "--threads", "1"];
        all.extend(args.iter().copied());
        let o = emf(&all);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let report = emf(&["--config", &cfg, "--out", out, "report"]);
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("near-max-rate exposure ratio"), "{text}");
    assert!(Path::new(out).join("histogram_smean_strategy3.csv").is_file());
}

#[test]
fn generate_prints_count_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = emf(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "generate"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("4 scenarios (seed 42)"), "{text}");
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), r#", "rf": {"beamwidth_deg": 400}"#);
    let o = emf(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "generate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beamwidth_deg"));
}

#[test]
fn zero_scenarios_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("zero.json");
    fs::write(&cfg, r#"{"sim": {"scenario_count": 0}}"#).unwrap();
    let o = emf(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "generate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("domain error"));
}

#[test]
fn missing_inputs_exit_with_three_and_name_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = emf(&["--config", &cfg, "--out", dir.path().join("empty").to_str().unwrap(), "evaluate"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenarios.csv"));
}

#[test]
fn missing_config_file_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = emf(&["--config", dir.path().join("nope.json").to_str().unwrap(), "generate"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn unknown_metric_is_rejected() {
    let o = emf(&["fit", "--metric", "s99"]);
    assert!(!o.status.success());
}
