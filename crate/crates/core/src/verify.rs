//! Named reproductions of the displayed computations, each producing a
//! [`CheckReport`] that records which kind of certificate closed it.

use std::collections::BTreeMap;
use std::sync::OnceLock;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::canon::canonicalize;
use crate::coeff::Coeff;
use crate::expr::{Expr, Index, Term};
use crate::forms::{
    bracket, d_a, d_operator, delta_a, gauge_curvature, iota_ups, pairing, q2, times_ups, tractor_form, FormExpr,
};
use crate::hat::hat_transform;
use crate::numeric::eval::{required_degree, Evaluator};
use crate::numeric::geometry::Geometry;
use crate::numeric::scalar::{ModP, Scalar};
use crate::numeric::spec::{
    conformal_rescale, random_polynomial_gauge, random_polynomial_metric, random_polynomial_scalar, MetricSpec,
};
use crate::obstruction::{expand6, obstruction_embedding, obstruction_from, partition, summands, tractor_d};
use crate::parse::{ex, parse};
use crate::print::to_text;
use crate::reduce::{prepare, reduce, ReduceConfig};
use crate::symbols::{decl, IndexFamily};
use crate::tractor::tractor_divergence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

/// Strength of the evidence, weakest last.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certificate {
    Symbolic,
    RationalJet,
    ModularJet,
    FloatJet,
    FloatQuadrature,
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub name: String,
    pub status: Status,
    pub certificate: Certificate,
    pub residual_repr: String,
    pub elapsed_s: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub steps: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VerifyError {
    #[error("unknown check {0:?}")]
    Unknown(String),
}

pub const CATALOG: &[&str] = &[
    "eq-conformal",
    "action-simplified",
    "fig-ddeltaomega",
    "fig1",
    "fig2",
    "eq-jomega",
    "eq-fourth",
    "eq-fifth",
    "group-xy",
    "group-xx",
    "group-yz",
    "group-zz",
    "theorem-obstruction",
    "prop-3.3",
    "prop-3.4",
    "prop-5.2",
    "identities",
    "dim4-bach",
];

const REFERENCE: &str = include_str!("../data/reference_expansions.txt");

fn references() -> &'static BTreeMap<String, Expr> {
    static R: OnceLock<BTreeMap<String, Expr>> = OnceLock::new();
    R.get_or_init(|| {
        let mut out = BTreeMap::new();
        let mut cur: Option<(String, String)> = None;
        let flush = |c: Option<(String, String)>, out: &mut BTreeMap<String, Expr>| {
            if let Some((name, body)) = c {
                let e = parse(&body).unwrap_or_else(|err| panic!("reference {name}: {err}"));
                out.insert(name, e);
            }
        };
        for line in REFERENCE.lines() {
            if let Some(name) = line.strip_prefix("== ") {
                flush(cur.take(), &mut out);
                cur = Some((name.trim().to_string(), String::new()));
            } else if let Some((_, body)) = cur.as_mut() {
                body.push(' ');
                body.push_str(line);
            }
        }
        flush(cur.take(), &mut out);
        out
    })
}

/// A transcribed reference expansion by name.
pub fn reference_expansion(name: &str) -> Option<Expr> {
    references().get(name).cloned()
}

pub fn reference_names() -> Vec<String> {
    references().keys().cloned().collect()
}

/// `½(T − T')` where `T'` exchanges the lower occurrence of `a` with the
/// free index `b` in each term; upper occurrences of `a` stay put.
pub fn antisymmetrize_lower(e: &Expr, a: &str, b: &str) -> Expr {
    let (a, b) = (crate::expr::name(a), crate::expr::name(b));
    let mut out = Expr::zero();
    for t in &e.terms {
        let mut s: Term = t.clone();
        for f in s.factors.iter_mut() {
            for ix in f.indices_mut() {
                if ix.family != IndexFamily::Spacetime || ix.up {
                    continue;
                }
                if ix.name == a {
                    ix.name = b;
                } else if ix.name == b {
                    ix.name = a;
                }
            }
        }
        out.push(t.clone());
        out.push(s.scaled(&Coeff::int(-1)));
    }
    out.scale(&Coeff::rational(1, 2))
}

/// Outcome of one identity test.
struct Log {
    steps: Vec<String>,
    failure: Option<String>,
    cert: Certificate,
}

impl Log {
    fn new() -> Self {
        Log { steps: Vec::new(), failure: None, cert: Certificate::Symbolic }
    }

    fn fail(&mut self, label: &str, residual: String) {
        self.steps.push(format!("{label}: FAIL"));
        if self.failure.is_none() {
            self.failure = Some(format!("{label}: {residual}"));
        }
    }

    fn ok(&mut self, label: &str, how: &str) {
        self.steps.push(format!("{label}: 0 ({how})"));
    }

    fn check(&mut self, label: &str, cond: bool, detail: impl FnOnce() -> String) {
        if cond {
            self.steps.push(format!("{label}: ok"));
        } else {
            self.fail(label, detail());
        }
    }

    /// `e = 0` at `dim` (or symbolic `n`): canonical form first, then the
    /// curvature-identity reducer (deepened once), then modular jets on
    /// random metrics.
    fn zero(&mut self, label: &str, e: &Expr, dim: Option<i64>) {
        let e = match dim {
            Some(n) => canonicalize(&e.specialize(n)),
            None => canonicalize(e),
        };
        if e.is_zero() {
            return self.ok(label, "canonical");
        }
        let cfg = match dim {
            Some(n) => ReduceConfig::at_dim(n),
            None => ReduceConfig::general(),
        };
        let mut r = reduce(&e, &cfg);
        if !r.residual.is_zero() {
            r = reduce(&e, &cfg.depth(5));
        }
        if r.residual.is_zero() {
            return self.ok(label, &format!("identities, rank {}", r.rank));
        }
        match jet_zero(&r.residual, dim.unwrap_or(6) as usize) {
            Some(true) => {
                self.cert = self.cert.max(Certificate::ModularJet);
                self.ok(label, "modular jets")
            }
            _ => self.fail(label, to_text(&r.residual)),
        }
    }

    /// `a = b` (see [`Log::zero`]).
    fn equal(&mut self, label: &str, a: &Expr, b: &Expr, dim: Option<i64>) {
        self.zero(label, &a.sub(b), dim)
    }

    fn zero_mod_div(&mut self, label: &str, e: &Expr, dim: i64) {
        let r = reduce(&e.specialize(dim), &ReduceConfig::at_dim(dim).modulo_divergences());
        if r.residual.is_zero() {
            self.ok(label, &format!("modulo divergences, rank {}", r.rank))
        } else {
            self.fail(label, to_text(&r.residual))
        }
    }

    fn finish(self, name: &str, start: Instant) -> CheckReport {
        let (status, residual_repr) = match self.failure {
            None => (Status::Pass, "0".to_string()),
            Some(r) => (Status::Fail, r),
        };
        CheckReport {
            name: name.into(),
            status,
            certificate: self.cert,
            residual_repr,
            elapsed_s: start.elapsed().as_secs_f64(),
            steps: self.steps,
        }
    }
}

/// Evaluates `e` (no splitting operators) on three random polynomial
/// metrics with gauge data and conformal factor, in `F_p`. `None` if the
/// expression is outside the oracle's scope.
pub fn jet_zero(e: &Expr, n: usize) -> Option<bool> {
    let deg = required_degree(e) + 1;
    for seed in [11u64, 12, 13] {
        let mut spec: MetricSpec = random_polynomial_metric(n, 2, seed);
        spec.gauge = Some(random_polynomial_gauge(n, 2, seed + 100));
        spec.conformal_factor = Some(random_polynomial_scalar(n, seed + 200));
        let c = spec.compile().ok()?;
        let x0: Vec<ModP> = (0..n).map(|k| ModP::from_i64((k as i64 + seed as i64) % 3 - 1)).collect();
        let mut g = Geometry::new(&c, &x0, deg, seed).ok()?;
        let v = Evaluator::new(&mut g).eval(&e.specialize(n as i64)).ok()?;
        if !v.is_zero() {
            return Some(false);
        }
    }
    Some(true)
}

fn reference(name: &str) -> Expr {
    reference_expansion(name).unwrap_or_else(|| panic!("missing reference expansion {name}"))
}

fn terms_with(e: &Expr, pred: impl Fn(&str) -> bool) -> Expr {
    Expr { terms: e.terms.iter().filter(|t| t.factors.iter().any(|f| pred(decl(f.sym).name))).cloned().collect() }
}

fn run_eq_conformal(log: &mut Log) {
    let a = crate::forms::action_density(&tractor_form()).expect("tractor curvature");
    log.equal("density = four-term display", &prepare(&a, Some(6)), &reference("action-density"), Some(6));
}

fn run_action_simplified(log: &mut Log) {
    let a = crate::forms::action_density(&tractor_form()).expect("tractor curvature");
    let target = ex("8*A[a,b,c]*nd[^c](P[^a,^b]) - J[]*C[a,b,c,d]*C[^a,^b,^c,^d] + 4*P[a,b]*C[^a,c,d,e]*C[^b,^c,^d,^e]");
    log.zero_mod_div("density ~ simplified display", &a.sub(&target), 6);
}

fn run_fig_ddeltaomega(log: &mut Log) {
    let d_om = delta_a(&tractor_form()).expect("2-form");
    let dd = d_a(&d_om).with_form_names(&["a1", "a2"]);
    let r = reference("d-delta-omega");
    let swapped = r.rename(&[("a1", "a2"), ("a2", "a1")]);
    let target = r.sub(&swapped).scale(&Coeff::rational(1, 2));
    log.equal("dδΩ", &expand6(&dd.e), &expand6(&target), Some(6));
}

fn summand_check(log: &mut Log, i: usize, refname: &str, label: &str) {
    let s = &summands()[i];
    let mut r = reference(refname);
    if refname == "fig1" {
        r = antisymmetrize_lower(&r, "a1", "a2").rename(&[("a2", "c")]);
    }
    log.equal(label, &expand6(s), &expand6(&r), Some(6));
}

fn groups() -> &'static BTreeMap<String, Expr> {
    static G: OnceLock<BTreeMap<String, Expr>> = OnceLock::new();
    G.get_or_init(|| partition(&tractor_d()))
}

fn group(k: &str) -> Expr {
    groups().get(k).cloned().unwrap_or_default()
}

fn run_group_xy(log: &mut Log) {
    log.zero("∇_aB^a_c + 2P^{ek}A_{ekc}", &ex("nd[^a](B[a,c]) + 2*P[^e,^k]*A[e,k,c]"), Some(6));
    let r = expand6(&reference("group-xy"));
    log.equal("XY terms = display", &group("XY"), &r, Some(6));
    log.zero("XY display", &r, Some(6));
    log.zero("XY terms of 𝔇", &group("XY"), Some(6));
}

fn run_group_xx(log: &mut Log) {
    let r = expand6(&reference("group-xx"));
    log.check("XX display cancels by symmetry alone", r.is_zero(), || to_text(&r));
    log.zero("XX terms of 𝔇", &group("XX"), Some(6));
}

fn run_group_yz(log: &mut Log) {
    let r = expand6(&reference("group-yz"));
    let r2 = expand6(&reference("group-yz-reduced"));
    log.equal("YZ terms = display", &group("YZ"), &r, Some(6));
    log.equal("display = trace-reduced form", &r, &r2, Some(6));
    log.zero("∇^aA_{abc}", &ex("nd[^a](A[a,b,c])"), None);
    log.zero("YZ reduced form", &r2, Some(6));
    log.zero("YZ terms of 𝔇", &group("YZ"), Some(6));
}

fn run_group_zz(log: &mut Log) {
    let lhs = expand6(&reference("group-zz"));
    let rhs = expand6(&reference("group-zz-reduced"));
    log.equal("ZZ terms = figure left side", &group("ZZ"), &lhs, Some(6));
    log.equal("figure left = right", &lhs, &rhs, Some(6));
    log.zero("figure right side", &rhs, Some(6));
    log.zero("ZZ terms of 𝔇", &group("ZZ"), Some(6));
}

fn run_theorem(log: &mut Log) {
    let d = tractor_d();
    let keys: Vec<&String> = groups().keys().collect();
    log.check("no YY or operator-free terms", !groups().contains_key("YY") && !groups().contains_key(""), || {
        format!("{keys:?}")
    });
    let o = obstruction_from(&d);
    log.equal("𝔇∇ = (X_EZ^{Dd} − X^DZ_E^d)·16·O_cd", &d, &expand6(&obstruction_embedding(&o)), Some(6));
    let xz_fig = expand6(&reference("group-xz"));
    log.equal("XZ terms = figure left member", &group("XZ"), &xz_fig, Some(6));
    log.equal("figure left = middle", &xz_fig, &expand6(&reference("group-xz-collected")), Some(6));
    log.equal("figure middle = right", &xz_fig, &expand6(&reference("group-xz-reduced")), Some(6));
    log.zero("O_cd − O_dc", &o.sub(&o.rename(&[("c", "d"), ("d", "c")])), Some(6));
    log.zero("ḡ^{cd}O_cd", &ex("g[^c,^d]").mul(&o), Some(6));
    let flat = o.terms.iter().all(|t| t.factors.iter().any(|f| matches!(decl(f.sym).name, "C" | "A" | "B")));
    log.check("every term carries C, A or B", flat, || "a term survives on conformally flat metrics".into());
    obstruction_oracle(log, &o);
}

/// Float jets of degree 7 on three random metrics (symmetry, trace) and
/// exact `F_p` jets on a conformally flat metric (vanishing).
fn obstruction_oracle(log: &mut Log, o: &Expr) {
    let asym = o.sub(&o.rename(&[("c", "d"), ("d", "c")]));
    let trace = ex("g[^c,^d]").mul(o);
    for seed in [1u64, 2, 3] {
        let res = (|| -> Option<(f64, f64)> {
            let spec = random_polynomial_metric(6, 2, seed).compile().ok()?;
            let x0: Vec<f64> = (0..6).map(|k| ((k as u64 * 7 + seed * 3) % 5) as f64 / 10.0 - 0.2).collect();
            let mut g = Geometry::<f64>::new(&spec, &x0, 7, seed).ok()?;
            let mut ev = Evaluator::new(&mut g);
            let scale = ev.eval(o).ok()?.max_abs().max(f64::MIN_POSITIVE);
            Some((ev.eval(&asym).ok()?.max_abs() / scale, ev.eval(&trace).ok()?.max_abs() / scale))
        })();
        let label = format!("float jets, metric seed {seed}: |O−Oᵀ|, |tr O| < 1e-8 relative");
        match res {
            Some((s, t)) => log.check(&label, s < 1e-8 && t < 1e-8, || format!("{s:e}, {t:e}")),
            None => log.fail(&label, "evaluation failed".into()),
        }
    }
    let flat = (|| -> Option<bool> {
        let phi = random_polynomial_scalar(6, 17);
        let spec = conformal_rescale(&flat_metric(6), &phi).compile().ok()?;
        let x0 = vec![ModP::zero(); 6];
        let mut g = Geometry::<ModP>::new(&spec, &x0, 7, 17).ok()?;
        Some(Evaluator::new(&mut g).eval(o).ok()?.is_zero())
    })();
    log.check("exact zero on a conformally flat metric (F_p jets)", flat == Some(true), || format!("{flat:?}"));
}

fn flat_metric(n: usize) -> MetricSpec {
    let metric = (0..n).map(|i| (0..n).map(|j| if i == j { "1" } else { "0" }.to_string()).collect()).collect();
    MetricSpec { dimension: n, metric, conformal_factor: None, gauge: None, periodic: vec![false; n], seed: None }
}

fn run_prop_33(log: &mut Log) {
    // ω = F is d_A-closed by the Bianchi identity
    let f = gauge_curvature();
    let q = q2(&f).expect("weight-0 2-form");
    let hat = hat_transform(&q.e).expect("hat rules");
    let names: Vec<&str> = q.form.iter().map(|i| i.name.as_str()).collect();
    let corr = delta_a(&d_a(&times_ups(&f))).expect("3-form").with_form_names(&names);
    let e = hat.sub(&q.e).sub(&corr.e.scale(&Coeff::int(2)));
    log.zero("Q̂₂ω − Q₂ω − 2δd(Υω)", &e, Some(6));
}

fn run_prop_34(log: &mut Log) {
    let w = FormExpr::new(ex("om[a,b,^%B,%C]"), &["a", "b"]).expect("2-form");
    let eta = FormExpr::new(ex("et[a,b,^%B,%C]"), &["a", "b"]).expect("2-form");
    let sa = pairing(&eta, &q2(&w).expect("q2"), 6).expect("pairing")
        .sub(&pairing(&w, &q2(&eta).expect("q2"), 6).expect("pairing"));
    log.zero_mod_div("⟨η,Q₂ω⟩ − ⟨ω,Q₂η⟩", &sa, 6);
    let lhs = pairing(&w, &delta_a(&d_a(&eta)).expect("3-form"), 6).expect("pairing");
    let rhs = pairing(&d_a(&w), &d_a(&eta), 6).expect("pairing");
    log.zero_mod_div("⟨ω,δdη⟩ − ⟨dω,dη⟩", &lhs.sub(&rhs), 6);
}

fn run_prop_52(log: &mut Log) {
    let f = gauge_curvature();
    let dd = delta_a(&delta_a(&d_a(&times_ups(&f))).expect("3-form")).expect("2-form");
    let dd = dd.with_form_names(&["c"]);
    let br = bracket(&iota_ups(&f).expect("2-form"), &f).expect("shapes").with_form_names(&["c"]);
    let exp = reference("suffices-expansion");
    let exp = rename_gauge(&exp, &dd.value);
    log.equal("δ²d(ΥF) = expansion", &dd.e, &exp, None);
    let (curv, quad): (Vec<Term>, Vec<Term>) = exp.terms.iter().cloned().partition(|t| {
        t.factors.iter().any(|f| decl(f.sym).name == "R")
    });
    log.zero("Riemann terms of the expansion", &Expr { terms: curv }, None);
    let last_two = Expr { terms: quad[2..].to_vec() };
    log.zero("last two terms of the expansion", &last_two, None);
    log.zero("δ²d(ΥF) + [ι(dΥ)F, F]", &dd.e.add(&br.e), None);
    let d = d_operator(&f).expect("𝔇");
    let hat = hat_transform(&d.e).expect("hat rules");
    log.zero("𝔇̂ − 𝔇", &hat.sub(&d.e), Some(6));
}

/// Renames the gauge value indices `G, H` of a transcription onto `value`.
fn rename_gauge(e: &Expr, value: &[Index]) -> Expr {
    let pairs = [("G", value[0].name.as_str()), ("H", value[1].name.as_str())];
    e.rename(&pairs)
}

fn run_identities(log: &mut Log) {
    log.zero("∇^aP_ab − ∇_bJ", &ex("nd[^a](P[a,b]) - nd[b](J[])"), None);
    log.zero("∇^aA_abc", &ex("nd[^a](A[a,b,c])"), None);
    log.zero("A_[abc]", &ex("A[a,b,c] + A[b,c,a] + A[c,a,b]"), None);
    log.zero("∇^aC_abcd − (n−3)A_bcd", &ex("nd[^a](C[a,b,c,d]) - (n - 3)*A[b,c,d]"), None);
    let div_b = ex("nd[^a](B[a,c]) + 2*P[^e,^k]*A[e,k,c]");
    log.zero("∇^aB_ac + 2P^{ek}A_{ekc} at n = 6", &div_b, Some(6));
    let general = reduce(&div_b, &ReduceConfig::general());
    log.check("… nonzero at symbolic n", !general.residual.is_zero(), || "vanishes identically".into());
    log.zero("B_ab − B_ba", &ex("B[a,b] - B[b,a]"), None);
}

fn run_dim4_bach(log: &mut Log) {
    match tractor_divergence() {
        Ok(f) => {
            log.ok("∇^aΩ_ac = displayed formula", "identities, symbolic n");
            log.equal("formula = reference", &f, &reference("divergence-curvature"), None);
            let at4 = canonicalize(&f.specialize(4));
            let has_a = !terms_with(&at4, |n| n == "A").is_zero();
            log.check("A-term coefficient (n − 4) vanishes at n = 4", !has_a, || to_text(&at4));
            let b_only = at4.terms.iter().all(|t| t.factors.iter().any(|f| decl(f.sym).name == "B"));
            log.check("only Bach terms remain", b_only && !at4.is_zero(), || to_text(&at4));
        }
        Err(e) => log.fail("∇^aΩ_ac", e.residual),
    }
}

/// Runs one catalog entry.
pub fn run_check(name: &str) -> Result<CheckReport, VerifyError> {
    let start = Instant::now();
    let mut log = Log::new();
    match name {
        "eq-conformal" => run_eq_conformal(&mut log),
        "action-simplified" => run_action_simplified(&mut log),
        "fig-ddeltaomega" => run_fig_ddeltaomega(&mut log),
        "fig1" => summand_check(&mut log, 0, "fig1", "δdδΩ"),
        "fig2" => summand_check(&mut log, 1, "fig2", "−4δ(P#Ω)"),
        "eq-jomega" => summand_check(&mut log, 2, "eq-jomega", "2δ(JΩ)"),
        "eq-fourth" => summand_check(&mut log, 3, "eq-fourth", "−(δΩ)Ω"),
        "eq-fifth" => summand_check(&mut log, 4, "eq-fifth", "Ω(δΩ)"),
        "group-xy" => run_group_xy(&mut log),
        "group-xx" => run_group_xx(&mut log),
        "group-yz" => run_group_yz(&mut log),
        "group-zz" => run_group_zz(&mut log),
        "theorem-obstruction" => run_theorem(&mut log),
        "prop-3.3" => run_prop_33(&mut log),
        "prop-3.4" => run_prop_34(&mut log),
        "prop-5.2" => run_prop_52(&mut log),
        "identities" => run_identities(&mut log),
        "dim4-bach" => run_dim4_bach(&mut log),
        _ => return Err(VerifyError::Unknown(name.into())),
    }
    Ok(log.finish(name, start))
}

/// Runs checks in parallel; `"all"` expands to the catalog. Reports come
/// back in request order.
pub fn run_checks(names: &[String]) -> Result<Vec<CheckReport>, VerifyError> {
    let mut list: Vec<String> = Vec::new();
    for n in names {
        if n == "all" {
            list.extend(CATALOG.iter().map(|s| s.to_string()));
        } else if CATALOG.contains(&n.as_str()) {
            list.push(n.clone());
        } else {
            return Err(VerifyError::Unknown(n.clone()));
        }
    }
    list.par_iter().map(|n| run_check(n)).collect()
}

/// Output formats for [`emit_obstruction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Latex,
    Json,
}

#[derive(Serialize)]
struct JsonTerm {
    coeff: String,
    factors: Vec<String>,
}

/// The obstruction tensor `O_cd` in the Weyl–Schouten basis.
pub fn emit_obstruction(format: Format) -> String {
    let o = canonicalize(&obstruction_from(&tractor_d()));
    match format {
        Format::Text => crate::print::to_text_ordered(&o),
        Format::Latex => crate::print::to_latex(&o),
        Format::Json => {
            let mut terms: Vec<&Term> = o.terms.iter().collect();
            terms.sort_by(|a, b| crate::print::term_order(a, b));
            let list: Vec<JsonTerm> = terms
                .iter()
                .map(|t| JsonTerm {
                    coeff: t.coeff.to_string(),
                    factors: t.factors.iter().map(crate::print::factor_text).collect(),
                })
                .collect();
            serde_json::to_string_pretty(&serde_json::json!({ "indices": ["c", "d"], "weight": -4, "terms": list }))
                .expect("serializable")
        }
    }
}

/// Oracle checks on a torus metric spec.
pub const NUMERIC_CHECKS: &[&str] = &["action-invariance", "divergence-theorem"];

#[derive(Debug, Clone, Copy)]
pub struct NumericConfig {
    pub jet_degree: usize,
    /// Coarse grid per used coordinate; the fine grid is twice as dense.
    pub grid: usize,
    /// Relative tolerance; `None` uses the check's default.
    pub tolerance: Option<f64>,
}

impl Default for NumericConfig {
    fn default() -> Self {
        NumericConfig { jet_degree: 4, grid: 16, tolerance: None }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum NumericError {
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Quadrature(#[from] crate::numeric::quadrature::QuadError),
}

/// Fills in whatever the torus spec lacks from `seed`: a periodic metric,
/// a rank-2 potential and a conformal factor.
pub fn torus_spec(base: Option<MetricSpec>, seed: u64) -> MetricSpec {
    use crate::numeric::spec::{random_periodic_gauge, random_periodic_metric, random_periodic_scalar};
    let mut m = base.unwrap_or_else(|| random_periodic_metric(6, seed, 0.1));
    if m.gauge.is_none() {
        m.gauge = Some(random_periodic_gauge(m.dimension, 2, seed.wrapping_add(1), 0.3));
        m.seed = Some(seed);
    }
    if m.conformal_factor.is_none() {
        m.conformal_factor = Some(random_periodic_scalar(seed.wrapping_add(2), 0.2));
        m.seed = Some(seed);
    }
    m
}

/// `∇^a(J∇_aJ) + ∇^a(J∇^bP_ab)`, written out by the Leibniz rule.
pub fn divergence_sample() -> Expr {
    ex("nd[^a](J[])*nd[a](J[]) + J[]*nd[^a](nd[a](J[])) + nd[^a](J[])*nd[^b](P[a,b]) + J[]*nd[^a](nd[^b](P[a,b]))")
}

pub fn run_numeric(name: &str, spec: &MetricSpec, cfg: &NumericConfig) -> Result<CheckReport, NumericError> {
    use crate::numeric::quadrature::{action_invariance, richardson};
    let start = Instant::now();
    let mut steps = Vec::new();
    let (residual, tol) = match name {
        "action-invariance" => {
            let r = action_invariance(spec, cfg.jet_degree, cfg.grid)?;
            for (label, q) in [("S(g)", r.original), ("S(ĝ)", r.rescaled)] {
                steps.push(format!(
                    "{label}: {:.15e} (grid {}), {:.15e} (grid {})",
                    q.coarse, q.coarse_grid, q.fine, q.fine_grid
                ));
            }
            steps.push(format!("relative difference: {:.3e} coarse, {:.3e} fine", r.relative_coarse, r.relative_fine));
            (r.relative_fine, cfg.tolerance.unwrap_or(1e-6))
        }
        "divergence-theorem" => {
            let d = richardson(spec, &divergence_sample(), cfg.jet_degree, cfg.grid)?;
            let s = richardson(spec, &ex("J[]*J[]"), cfg.jet_degree, cfg.grid)?;
            steps.push(format!("∫div: {:.3e} (grid {}), {:.3e} (grid {})", d.coarse, d.coarse_grid, d.fine, d.fine_grid));
            steps.push(format!("∫J²: {:.15e}", s.fine));
            (d.fine.abs() / s.fine.abs().max(1.0), cfg.tolerance.unwrap_or(1e-10))
        }
        _ => return Err(VerifyError::Unknown(name.into()).into()),
    };
    if let Some(seed) = spec.seed {
        steps.push(format!("seed {seed}"));
    }
    Ok(CheckReport {
        name: name.into(),
        status: if residual < tol { Status::Pass } else { Status::Fail },
        certificate: Certificate::FloatQuadrature,
        residual_repr: format!("{residual:.3e}"),
        elapsed_s: start.elapsed().as_secs_f64(),
        steps,
    })
}
