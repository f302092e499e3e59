use std::fs;
use std::path::Path;
use std::process::Command;

const FAST: &str = r#"
name = "period-doubled"
depth = 8
seed = 3
diagnostics = ["renormalization", "mane"]
[map_f]
family = "quadratic"
lambda = 3.6
[map_g]
family = "quadratic"
lambda = 3.6
"#;

const VIOLATION: &str = r#"
depth = 8
diagnostics = ["conjugacy", "multipliers"]
[map_f]
family = "tent"
slope = 2.0
[map_g]
family = "quadratic"
lambda = 4.0
[parameters]
period_max = 2
"#;

fn ivconj(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ivconj")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_bundle_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fast.toml", FAST);
    let out = tmp.path().join("out");
    let (code, stdout, _) = ivconj(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("verdict: not_evaluated"));
    let bundle: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("bundle.json")).unwrap()).unwrap();
    for entry in bundle["manifest"].as_array().unwrap() {
        assert!(out.join(entry["path"].as_str().unwrap()).exists());
    }
    let files: Vec<_> = fs::read_dir(&out).unwrap().collect();
    assert_eq!(files.len(), bundle["manifest"].as_array().unwrap().len());
    assert_eq!(bundle["records"]["renormalization"]["intervals"][0]["n"], 2);
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fast.toml", FAST);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(ivconj(&["run", &cfg, "--out", a.to_str().unwrap()]).0, 0);
    assert_eq!(ivconj(&["run", &cfg, "--out", b.to_str().unwrap(), "--seed", "4", "--precision", "extended"]).0, 0);
    let read = |d: &Path| -> serde_json::Value { serde_json::from_str(&fs::read_to_string(d.join("bundle.json")).unwrap()).unwrap() };
    let (ba, bb) = (read(&a), read(&b));
    assert_eq!(bb["provenance"]["seed"], 4);
    assert_eq!(bb["provenance"]["precision"], "extended");
    assert_ne!(ba["provenance"]["config_sha256"], bb["provenance"]["config_sha256"]);
}

#[test]
fn violation_exits_with_two_and_exports_multipliers() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "tent.toml", VIOLATION);
    let out = tmp.path().join("out");
    let (code, stdout, stderr) = ivconj(&["run", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2, "{stdout}{stderr}");
    assert!(stderr.contains("hypothesis violation"));
    let bundle = out.join("bundle.json");
    let csv_dir = tmp.path().join("csv");
    let (code, stdout, _) =
        ivconj(&["export", bundle.to_str().unwrap(), "multipliers", "--out", csv_dir.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(stdout.contains("multipliers.csv"));
    let csv = fs::read_to_string(csv_dir.join("multipliers.csv")).unwrap();
    assert!(csv.starts_with("period,point_f,mult_f,point_g,mult_g,match\n"));
    let conj = fs::read_to_string(out.join("conjugacy.csv")).unwrap();
    assert!(conj.starts_with("x,y,depth\n"));
    let (code, _, stderr) = ivconj(&["export", bundle.to_str().unwrap(), "uaa"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("not present"));
}

#[test]
fn validate_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "fast.toml", FAST);
    let (code, stdout, _) = ivconj(&["validate", &cfg]);
    assert_eq!(code, 0);
    assert!(stdout.contains("non_flat"));
    let bad = write(tmp.path(), "bad.toml", &FAST.replace("lambda = 3.6\n[map_g]", "lambda = 5.0\n[map_g]"));
    assert_eq!(ivconj(&["validate", &bad]).0, 1);
    assert_eq!(ivconj(&["run", "/nonexistent.toml"]).0, 1);
    let (code, _, stderr) = ivconj(&["validate", &cfg, "--depth", "0"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("depth"));
}
