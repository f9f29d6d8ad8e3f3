use std::fs;
use std::path::Path;
use std::process::Command;

fn gkdv(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_gkdv"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("GKDV_OUT")
        .output()
        .expect("binary runs")
}

fn summary(out: &std::process::Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("summary is JSON")
}

#[test]
fn soliton_kdv_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let out = gkdv(&["soliton", "--nl", "kdv", "--c", "1.0"], &dir.path().join("a"));
    assert!(out.status.success());
    let s = summary(&out);
    assert!((s["amplitude"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let csv = fs::read_to_string(dir.path().join("a/profile.csv")).unwrap();
    assert!(csv.starts_with("x,phi,dphi\n"));
    assert!(!csv.contains('\r'));
}

#[test]
fn soliton_power_six_amplitude() {
    let dir = tempfile::tempdir().unwrap();
    let out = gkdv(&["soliton", "--nl", "power:6", "--c", "1.0"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a = summary(&out)["amplitude"].as_f64().unwrap();
    assert!((a - 3.5f64.powf(0.2)).abs() < 1e-12);
}

#[test]
fn malformed_spec_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gkdv(&["soliton", "--nl", "power:", "--c", "1.0"], &dir.path().join("x"));
    assert_eq!(out.status.code(), Some(64));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot parse"));
    assert!(!dir.path().join("x").exists());
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = gkdv(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn inadmissible_speed_exits_two_and_leaves_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("run");
    let out = gkdv(&["soliton", "--nl", "minus:1,6,1,8", "--c", "0.1"], &target);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
}

#[test]
fn critical_minus_example() {
    let dir = tempfile::tempdir().unwrap();
    let out = gkdv(&["critical", "--nl", "minus:1,6,1,8", "--bracket", "0.02,0.5"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert_eq!(s["nondegenerate"], serde_json::Value::Bool(true));
    let cs = s["c_star"].as_f64().unwrap();
    assert!((cs - 0.0153873878).abs() < 1e-8);
    assert!(s["d2N_dc2"].as_f64().unwrap() > 0.0);
    assert!(s["dI_dc"].as_f64().unwrap() < 0.0);
    assert_eq!(s["bracket"]["widened"], serde_json::Value::Bool(true));
}

#[test]
fn no_sign_change_for_pure_power() {
    let dir = tempfile::tempdir().unwrap();
    let out = gkdv(&["critical", "--nl", "power:4", "--bracket", "0.5,2"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn identical_configs_give_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["evolve", "--nl", "kdv", "--c", "1", "--T", "2", "--dt", "0.005", "--n-dom", "1024", "--snapshots", "1"];
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(gkdv(&args, &a).status.success());
    assert!(gkdv(&args, &b).status.success());
    for name in ["ledger.csv", "snapshot_000.csv", "snapshot_001.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let ma: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    let mb: serde_json::Value = serde_json::from_slice(&fs::read(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(ma["config_hash"], mb["config_hash"]);
    for f in ma["files"].as_array().unwrap() {
        let p = a.join(f["name"].as_str().unwrap());
        assert_eq!(fs::metadata(p).unwrap().len(), f["bytes"].as_u64().unwrap());
    }
}

#[test]
fn output_directory_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("env");
    let out = Command::new(env!("CARGO_BIN_EXE_gkdv"))
        .args(["soliton", "--nl", "kdv", "--c", "1"])
        .env("GKDV_OUT", &target)
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(target.join("manifest.json").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"nonlinearity": "power:3", "speed": 2.0}"#).unwrap();
    let out = gkdv(&["soliton", "--config", cfg.to_str().unwrap(), "--c", "1.0"], &dir.path().join("o"));
    assert!(out.status.success());
    let s = summary(&out);
    assert_eq!(s["nonlinearity"], "power:3");
    assert!((s["amplitude"].as_f64().unwrap() - 2f64.sqrt()).abs() < 1e-12);
}

#[test]
fn unknown_config_field_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"nonlinearity": "kdv", "sped": 1.0}"#).unwrap();
    let out = gkdv(&["soliton", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(64));
}

#[test]
fn reduced_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = gkdv(&["reduced", "--nl", "minus:1,6,1,8", "--table-samples", "9"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(&out);
    assert_eq!(s["runs"].as_array().unwrap().len(), 5);
    let csv = fs::read_to_string(dir.path().join("reduced_0.csv")).unwrap();
    assert!(csv.starts_with("t,eta,zeta\n"));
    assert!(fs::read_to_string(dir.path().join("normal_form.csv")).unwrap().starts_with("t,x\n"));
}

#[test]
fn verify_fast_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = gkdv(&["verify", "--suite", "fast"], dir.path());
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{table}");
    assert_eq!(table.lines().filter(|l| l.contains(" PASS ")).count(), 10, "{table}");
}
