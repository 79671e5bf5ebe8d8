use std::fs;
use std::process::Command;

fn multirate() -> Command {
    Command::new(env!("CARGO_BIN_EXE_multirate"))
}

fn configs() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn costmodel_reports_exact_cells() {
    let out = multirate().args(["costmodel", "--k", "1,5", "--layers", "8", "--fast", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("80"), "{text}");
    assert!(text.contains("52"), "{text}");
}

#[test]
fn costmodel_rejects_zero_k() {
    let out = multirate().args(["costmodel", "--k", "0", "--layers", "4", "--fast", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gradcheck_passes_on_shipped_config() {
    let out = multirate()
        .args(["gradcheck", "--config"])
        .arg(configs().join("gradcheck.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);
}

#[test]
fn bad_config_exits_with_field_path() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = fs::read_to_string(configs().join("spiral_sgd.toml")).unwrap().replace("stepsize = 0.2", "stepsize = -1.0");
    fs::write(&path, text).unwrap();
    let out = multirate().args(["run", "--config"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("optimizer.stepsize"));
}

#[test]
fn run_writes_metrics_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tiny.toml");
    let text = fs::read_to_string(configs().join("spiral_multirate.toml"))
        .unwrap()
        .replace("epochs = 1000", "epochs = 2")
        .replace("n_per_class = 2000", "n_per_class = 500")
        .replace("test_per_class = 1000", "test_per_class = 100");
    fs::write(&path, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = multirate()
        .args(["run", "--seed-override", "3", "--config"])
        .arg(&path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("metrics_seed3.csv").exists());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["points"][0]["seeds"], serde_json::json!([3]));
}
