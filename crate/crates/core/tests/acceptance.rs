//! One line per acceptance criterion; exits non-zero if any criterion fails.

use confym_core::numeric::spec::random_periodic_metric;
use confym_core::reduce::{prepare, reduce, ReduceConfig};
use confym_core::rules::RuleSet;
use confym_core::verify::{
    divergence_sample, run_checks, run_numeric, torus_spec, CheckReport, NumericConfig,
};

mod common;

struct Line {
    criterion: usize,
    ok: bool,
    detail: String,
}

fn catalog(criterion: usize, names: &[&str], limit_s: f64) -> Line {
    let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let reports = run_checks(&names).expect("catalog names");
    let ok = reports.iter().all(|r| r.passed() && r.elapsed_s < limit_s);
    Line { criterion, ok, detail: summary(&reports) }
}

fn summary(reports: &[CheckReport]) -> String {
    reports
        .iter()
        .map(|r| {
            let cert = serde_json::to_value(r.certificate).unwrap();
            format!("{} {} [{}] {:.1}s", r.name, if r.passed() { "pass" } else { "FAIL" }, cert.as_str().unwrap(), r.elapsed_s)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn torus_action() -> Line {
    let spec = torus_spec(Some(random_periodic_metric(6, 1, 0.1)), 42);
    let r = run_numeric("action-invariance", &spec, &NumericConfig::default()).unwrap();
    Line { criterion: 8, ok: r.passed() && r.elapsed_s < 600.0, detail: format!("{}, relative {}", summary(&[r.clone()]), r.residual_repr) }
}

fn property_suites() -> Line {
    let mut failures = Vec::new();
    for seed in 0..200 {
        for check in [common::canonicalize_is_idempotent, common::brute_force_agrees, common::images_share_canonical_form] {
            if let Err(e) = check(seed) {
                failures.push(e);
            }
        }
    }
    let rules = RuleSet::standard();
    let mut sound = 0;
    for rule in rules.rules.iter().filter(|r| r.group != "leibniz") {
        match common::rule_is_sound(rule, 4) {
            Ok(()) => sound += 1,
            Err(e) => failures.push(e),
        }
    }
    let symbolic = reduce(&prepare(&divergence_sample(), Some(6)), &ReduceConfig::at_dim(6).modulo_divergences());
    if !symbolic.residual.is_zero() {
        failures.push("divergence sample is not zero modulo divergences".into());
    }
    let spec = torus_spec(Some(random_periodic_metric(6, 1, 0.1)), 42);
    let float = run_numeric("divergence-theorem", &spec, &NumericConfig::default()).unwrap();
    if !float.passed() {
        failures.push(format!("torus divergence {}", float.residual_repr));
    }
    let detail = format!(
        "canonicalizer 3×200 seeds; {sound}/{} non-structural rules exact on rational jets; divergence 0 (rational), {} (float)",
        rules.rules.len() - 1,
        float.residual_repr
    );
    Line { criterion: 9, ok: failures.is_empty(), detail: if failures.is_empty() { detail } else { failures.join("; ") } }
}

fn main() {
    let lines = vec![
        catalog(1, &["eq-conformal"], 60.0),
        catalog(2, &["action-simplified"], 300.0),
        catalog(3, &["fig1", "fig2", "eq-jomega", "eq-fourth", "eq-fifth"], f64::INFINITY),
        catalog(4, &["group-xy", "group-xx", "group-yz", "group-zz"], f64::INFINITY),
        catalog(5, &["theorem-obstruction"], 120.0),
        catalog(6, &["prop-3.3", "prop-3.4", "prop-5.2"], f64::INFINITY),
        catalog(7, &["dim4-bach"], f64::INFINITY),
        torus_action(),
        property_suites(),
    ];
    for l in &lines {
        println!("criterion {}: {} — {}", l.criterion, if l.ok { "PASS" } else { "FAIL" }, l.detail);
    }
    if !lines.iter().all(|l| l.ok) {
        std::process::exit(1);
    }
}
