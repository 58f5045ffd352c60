use std::path::PathBuf;
use std::process::{Command, Output};

use macregions_cli::manifest::csv_body;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_macregions"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn tmp(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn region_writes_manifest_and_reproduces() {
    let (a, b) = (tmp("switch-a.csv"), tmp("switch-b.csv"));
    for out in [&a, &b] {
        let o = bin(&[
            "region", "--channel", "channels/switch.json", "--bound", "prop1", "--mode", "decoupled", "--seed", "7",
            "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let ta = std::fs::read_to_string(&a).unwrap();
    let tb = std::fs::read_to_string(&b).unwrap();
    assert!(ta.starts_with("# manifest: {"));
    assert!(ta.contains("channels/switch.json"));
    assert!(csv_body(&ta).starts_with("lambda,rc,r1,sum_cap,r1_cap,feasible\n"));
    assert_eq!(csv_body(&ta), csv_body(&tb));
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(a.with_extension("json")).unwrap()).unwrap();
    assert_eq!(side["manifest"]["seed"], 7);
    assert_eq!(side["manifest"]["inputs"]["channels/switch.json"].as_str().unwrap().len(), 64);
    assert!((side["region"]["max_r1"].as_f64().unwrap() - 0.5).abs() < 1e-3);
}

#[test]
fn gaussian_reports_value_and_rho() {
    let o = bin(&["gaussian", "--model", "example4", "--P1", "0.5", "--P2", "0.5", "--N", "0.5", "--Q", "1"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["value"].as_f64().unwrap() > 0.0);
    let rho = v["rho_star"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&rho));
}

#[test]
fn fme_builtin_is_byte_stable() {
    let a = bin(&["fme", "--system", "appendixE"]);
    let b = bin(&["fme", "--system", "appendixE"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("# projected (matches golden)"));
    assert!(text.contains("R1 <= I(X1;Y|V,X2)"));
    assert!(!text.contains("differs"));
}

#[test]
fn fme_from_json_file() {
    let path = tmp("sys.json");
    std::fs::write(
        &path,
        r#"{"variables": ["R", "T"], "inequalities": [
            {"coeffs": {"R": 1, "T": -1}, "constant": 0, "atoms": {"I(X;Y)": 1}, "sense": "<="},
            {"coeffs": {"T": 1}, "constant": "1/2", "atoms": {}, "sense": "<="}]}"#,
    )
    .unwrap();
    let o = bin(&["fme", "--input", path.to_str().unwrap(), "--eliminate", "T"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("R <= 1/2 + I(X;Y)"), "{}", stdout(&o));
}

#[test]
fn simulate_zero_rate_never_errs() {
    let csv = tmp("sweep.csv");
    let o = bin(&[
        "simulate", "--builtin", "additive-binary-helper", "--param", "p=0.1", "--r1", "0", "--n", "6,8",
        "--trials", "5", "--out", csv.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["results"].as_array().unwrap().len(), 2);
    assert_eq!(v["results"][0]["errors"], 0);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(csv_body(&text).starts_with("n,rate_rc,rate_r1,err,err_lo,err_hi\n6,"));
}

#[test]
fn exit_codes() {
    assert_eq!(bin(&["region", "--channel", "channels/switch.json", "--bound", "nope"]).status.code(), Some(2));
    assert_eq!(bin(&["region", "--bound", "prop1"]).status.code(), Some(2));
    assert_eq!(bin(&["fme", "--system", "appendixZ"]).status.code(), Some(2));
    assert_eq!(bin(&["sum-capacity", "--channel", "missing.json"]).status.code(), Some(1));
    let bad = tmp("bad.json");
    std::fs::write(&bad, r#"{"sizes": {"S": 1, "X1": 1, "X2": 1, "Y": 2}, "Q_S": [1.0], "W": [[[[0.7, 0.7]]]]}"#).unwrap();
    assert_eq!(bin(&["channel", "validate", bad.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(bin(&["channel", "validate", "channels/adder-mac.json"]).status.code(), Some(0));
}

#[test]
fn verify_examples_exit_status() {
    let ok = bin(&["verify-examples", "--only", "4"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout(&ok).starts_with("PASS 4"));
    let fail = bin(&["verify-examples", "--only", "1"]);
    assert_eq!(fail.status.code(), Some(3));
    assert!(stdout(&fail).starts_with("FAIL 1"));
}

#[test]
fn sum_capacity_of_adder() {
    let o = bin(&["sum-capacity", "--channel", "channels/adder-mac.json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["value"].as_f64().unwrap() - 3f64.log2()).abs() < 1e-6);
}
