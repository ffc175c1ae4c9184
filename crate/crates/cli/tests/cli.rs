use assert_cmd::Command;

fn confym() -> Command {
    let mut c = Command::cargo_bin("confym").unwrap();
    c.env_remove("CONFYM_REPORT_DIR");
    c
}

fn stdout(c: &mut Command) -> String {
    String::from_utf8(c.assert().success().get_output().stdout.clone()).unwrap()
}

#[test]
fn canon_reads_stdin() {
    let out = stdout(confym().arg("canon").write_stdin("P[a,b]*P[^b,^a] - P[b,a]*P[^a,^b]"));
    assert_eq!(out.trim(), "0");
}

#[test]
fn expand_splits_tractor_contractions() {
    let out = stdout(confym().arg("expand").write_stdin("X[A]*Z[^A,a]"));
    assert_eq!(out.trim(), "0");
}

#[test]
fn parse_errors_exit_with_2() {
    confym().arg("canon").write_stdin("P[a,").assert().code(2);
    confym().args(["verify", "no-such-check"]).assert().code(2);
    confym().args(["--tolerance", "-1", "verify", "identities"]).assert().code(2);
    confym().assert().code(2);
}

#[test]
fn verify_reports_json() {
    let out = stdout(confym().args(["verify", "identities", "--report", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["name"], "identities");
    assert_eq!(v["status"], "pass");
    assert_eq!(v["certificate"], "symbolic");
    for k in ["residual_repr", "elapsed_s"] {
        assert!(v.get(k).is_some(), "{k}");
    }
}

#[test]
fn theorem_obstruction_is_symbolic() {
    let out = stdout(confym().args(["verify", "theorem-obstruction", "--report", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "pass");
    assert_eq!(v["certificate"], "symbolic");
}

#[test]
fn reports_are_written_to_the_report_dir() {
    let dir = std::env::temp_dir().join(format!("confym-reports-{}", std::process::id()));
    confym().env("CONFYM_REPORT_DIR", &dir).args(["verify", "prop-3.4"]).assert().success();
    let body = std::fs::read_to_string(dir.join("prop-3.4.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(v["status"], "pass");
    std::fs::remove_dir_all(dir).unwrap();
}

#[test]
fn failed_numeric_check_exits_with_1() {
    let metric = concat!(env!("CARGO_MANIFEST_DIR"), "/data/torus1.json");
    confym()
        .args(["numeric", "divergence-theorem", "--metric", metric, "--grid", "4", "--tolerance", "1e-14"])
        .assert()
        .code(1);
}

#[test]
fn emit_obstruction_formats() {
    let json = stdout(confym().args(["emit-obstruction", "--format", "json"]));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["weight"], -4);
    assert!(v["terms"].as_array().unwrap().len() > 10);
    assert_eq!(json, stdout(confym().args(["emit-obstruction", "--format", "json"])));
    let tex = stdout(confym().args(["emit-obstruction", "--format", "latex"]));
    assert!(tex.contains("\\nabla"));
}

#[test]
fn dump_rules_is_json() {
    for args in [&["dump-rules"][..], &["--dump-rules"][..]] {
        let v: serde_json::Value = serde_json::from_str(&stdout(confym().args(args))).unwrap();
        assert!(v["rules"].as_array().unwrap().len() >= 20);
    }
}

#[test]
fn torus_action_invariance_matches_baseline() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let metric = format!("{dir}/data/torus1.json");
    let out = stdout(confym().args(["numeric", "action-invariance", "--metric", &metric, "--seed", "42", "--report", "json"]));
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    let residual: f64 = v["residual_repr"].as_str().unwrap().parse().unwrap();
    let baseline: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{dir}/data/torus1.baseline.json")).unwrap()).unwrap();
    assert!(residual < 1e-6);
    assert!(residual <= 100.0 * baseline["relative_fine"].as_f64().unwrap(), "{residual}");
}
