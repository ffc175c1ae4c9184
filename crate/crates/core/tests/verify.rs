use confym_core::coeff::Coeff;
use confym_core::expr::Expr;
use confym_core::obstruction::{expand6, summands};
use confym_core::reduce::{prepare, reduce, ReduceConfig};
use confym_core::verify::{emit_obstruction, reference_expansion, reference_names, run_check, run_checks, Format, VerifyError, CATALOG};

#[test]
fn whole_catalog_passes_in_request_order() {
    let reports = run_checks(&["all".to_string()]).unwrap();
    let names: Vec<&str> = reports.iter().map(|r| r.name.as_str()).collect();
    assert_eq!(names, CATALOG);
    for r in &reports {
        assert!(r.passed(), "{} failed: {}\n{}", r.name, r.residual_repr, r.steps.join("\n"));
    }
}

#[test]
fn unknown_checks_are_rejected() {
    assert_eq!(run_check("fig9").unwrap_err(), VerifyError::Unknown("fig9".into()));
    assert!(run_checks(&["fig1".into(), "nope".into()]).is_err());
}

fn residual(e: &Expr) -> Expr {
    reduce(&prepare(e, Some(6)), &ReduceConfig::at_dim(6)).residual
}

#[test]
fn perturbed_reference_is_detected() {
    let s = expand6(&summands()[1]);
    let r = expand6(&reference_expansion("fig2").unwrap());
    assert!(residual(&s.sub(&r)).is_zero());
    let mut bad = r.clone();
    bad.terms[0].coeff = &bad.terms[0].coeff * &Coeff::rational(3, 2);
    assert!(!residual(&s.sub(&bad)).is_zero());
}

#[test]
fn every_reference_parses() {
    let names = reference_names();
    assert!(names.len() >= 18);
    for n in names {
        assert!(reference_expansion(&n).is_some(), "{n}");
    }
}

#[test]
fn obstruction_output_is_deterministic() {
    let json = emit_obstruction(Format::Json);
    assert_eq!(json, emit_obstruction(Format::Json));
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["indices"], serde_json::json!(["c", "d"]));
    assert!(!emit_obstruction(Format::Text).is_empty());
}
