//! Geometric rewrites: curvature-basis substitution, derivative commutation
//! with curvature corrections on all three index families, and the
//! Bianchi-aware simplification entry points.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use serde::Serialize;

use crate::canon::{canonicalize, metric_normalize};
use crate::coeff::Coeff;
use crate::expr::{fresh_name, Expr, Factor, Index, Name, Term};
use crate::parse::ex;
use crate::symbols::{decl, sym, IndexFamily};
use crate::tractor::{plain_omega, splice, wrap_derivs};

/// `R_{abcd}` (third slot lowered) in Weyl–Schouten form; each argument
/// keeps its own variance.
pub fn riemann_low(a: Index, b: Index, c: Index, d: Index) -> Expr {
    ex(&format!(
        "C[{a},{b},{c},{d}] - g[{c},{b}]*P[{a},{d}] + g[{c},{a}]*P[{b},{d}] - g[{d},{a}]*P[{b},{c}] + g[{d},{b}]*P[{a},{c}]"
    ))
}

fn fresh_pair(family: IndexFamily, used: &mut BTreeSet<Name>) -> Name {
    let k = fresh_name(family, used);
    used.insert(k);
    k
}

/// `[∇_a, ∇_b]` applied to `f` (a factor including its inner derivatives):
/// `+R_{ab}{}^c{}_k` per upper spacetime index, `−R_{ab}{}^k{}_c` per lower,
/// and likewise with `Ω` on tractor and `F` on gauge indices. Density
/// weight contributes nothing.
pub fn curvature_action(f: &Factor, a: Index, b: Index, used: &BTreeSet<Name>) -> Expr {
    let mut used = used.clone();
    used.extend(f.indices().map(|i| i.name));
    used.extend([a.name, b.name]);
    let mut out = Expr::zero();
    let nd = f.derivs.len();
    let all: Vec<Index> = f.indices().copied().collect();
    for (p, &x) in all.iter().enumerate() {
        let k = Index { family: x.family, name: fresh_pair(x.family, &mut used), up: x.up };
        let curv_sym = match x.family {
            IndexFamily::Spacetime => "R",
            IndexFamily::Tractor => "Omega",
            IndexFamily::Gauge => "F",
        };
        let (slot2, slot3, sign) = if x.up { (x, k.flipped(), 1) } else { (k.flipped(), x, -1) };
        let curv = Factor::new(sym(curv_sym), vec![a, b, slot2, slot3]);
        let mut g = f.clone();
        if p < nd {
            g.derivs[p] = k;
        } else {
            g.slots[p - nd] = k;
        }
        out.push(Term::new(Coeff::int(sign), vec![curv, g]));
    }
    out
}

/// Target order for derivative strings.
#[derive(Clone, Debug)]
pub enum DerivOrder {
    /// By index name, then lower before upper.
    Alphabetical,
    /// Listed names first in the given order, the rest alphabetically.
    Ranked(Vec<String>),
}

impl DerivOrder {
    fn cmp(&self, x: &Index, y: &Index) -> Ordering {
        let rank = |i: &Index| match self {
            DerivOrder::Alphabetical => usize::MAX,
            DerivOrder::Ranked(v) => v.iter().position(|s| s.as_str() == i.name.as_str()).unwrap_or(usize::MAX),
        };
        rank(x).cmp(&rank(y)).then(x.name.cmp(&y.name)).then(x.up.cmp(&y.up))
    }
}

/// Sorts every derivative string by `order`, inserting curvature terms.
pub fn commute_to_order(e: &Expr, order: &DerivOrder) -> Expr {
    let mut out = Vec::new();
    let mut work = e.terms.clone();
    while let Some(t) = work.pop() {
        let hit = t.factors.iter().enumerate().find_map(|(fi, f)| {
            (0..f.derivs.len().saturating_sub(1))
                .find(|&j| order.cmp(&f.derivs[j], &f.derivs[j + 1]) == Ordering::Greater)
                .map(|j| (fi, j))
        });
        let Some((fi, j)) = hit else {
            out.push(t);
            continue;
        };
        let (swapped, corr) = swap_pair(&t, fi, j);
        work.push(swapped);
        work.extend(corr.terms);
    }
    Expr { terms: out }
}

/// `∇_{d_j}∇_{d_{j+1}}X = ∇_{d_{j+1}}∇_{d_j}X + [∇_{d_j},∇_{d_{j+1}}]X`
/// inside factor `fi`; returns the swapped term and the correction.
pub fn swap_pair(t: &Term, fi: usize, j: usize) -> (Term, Expr) {
    let f = &t.factors[fi];
    let mut swapped = t.clone();
    swapped.factors[fi].derivs.swap(j, j + 1);
    let inner = Factor { sym: f.sym, derivs: f.derivs[j + 2..].to_vec(), slots: f.slots.clone() };
    let used = t.used_names();
    let act = curvature_action(&inner, f.derivs[j], f.derivs[j + 1], &used);
    let corr = splice(t, fi, &wrap_derivs(act, &f.derivs[..j]));
    (swapped, corr)
}

/// Curvature bases for [`substitute_basis`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Basis {
    /// Eliminate `R`, `Ric`, `Sc` in favour of `C`, `P`, `J`.
    WeylSchouten,
    /// Eliminate `C`, `A`, `B`, `P`, `J` in favour of `R`, `Ric`, `Sc`.
    Riemann,
    /// Jets of `C` and `P` only: additionally expands `A`, `B`, `J` and
    /// the tractor curvature. Used by the reducer.
    SchoutenJets,
}

/// Replacement for one bare factor (derivatives stripped), or `None`.
fn definition(f: &Factor, basis: Basis, used: &BTreeSet<Name>) -> Option<Expr> {
    let d = decl(f.sym);
    let s = &f.slots;
    let mut used = used.clone();
    let to_ws = basis != Basis::Riemann;
    let jets = basis == Basis::SchoutenJets;
    let e = match (d.name, basis) {
        ("R", _) if to_ws => riemann_low(s[0], s[1], s[2], s[3]),
        ("Ric", _) if to_ws => {
            ex(&format!("(n - 2)*P[{},{}] + J[]*g[{},{}]", s[0], s[1], s[0], s[1]))
        }
        ("Sc", _) if to_ws => ex("(2*n - 2)*J[]"),
        ("J", _) if jets => {
            let k = fresh_pair(IndexFamily::Spacetime, &mut used);
            ex(&format!("P[^{k},{k}]"))
        }
        ("A", Basis::Riemann | Basis::SchoutenJets) => ex(&format!(
            "nd[{b}](P[{c},{a}]) - nd[{c}](P[{b},{a}])",
            a = s[0],
            b = s[1],
            c = s[2]
        )),
        ("B", Basis::Riemann | Basis::SchoutenJets) => {
            let k = fresh_pair(IndexFamily::Spacetime, &mut used);
            let l = fresh_pair(IndexFamily::Spacetime, &mut used);
            ex(&format!(
                "nd[^{k}](A[{a},{k},{b}]) + P[^{k},^{l}]*C[{k},{a},{l},{b}]",
                a = s[0],
                b = s[1]
            ))
        }
        ("Omega", Basis::SchoutenJets) => plain_omega(s[0], s[1], s[2], s[3], &used),
        ("C", Basis::Riemann) => {
            let (a, b, c, dd) = (s[0], s[1], s[2], s[3]);
            ex(&format!(
                "R[{a},{b},{c},{dd}] + g[{c},{b}]*P[{a},{dd}] - g[{c},{a}]*P[{b},{dd}] + g[{dd},{a}]*P[{b},{c}] - g[{dd},{b}]*P[{a},{c}]"
            ))
        }
        ("P", Basis::Riemann) => ex(&format!(
            "(1)/(n - 2)*Ric[{a},{b}] - (1)/(2*n^2 - 6*n + 4)*Sc[]*g[{a},{b}]",
            a = s[0],
            b = s[1]
        )),
        ("J", Basis::Riemann) => ex("(1)/(2*n - 2)*Sc[]"),
        _ => return None,
    };
    Some(e)
}

/// Rewrites every factor by `rule` until no rule applies; derivatives on a
/// replaced factor are re-applied by Leibniz.
pub fn rewrite_factors(e: &Expr, rule: &dyn Fn(&Factor, &BTreeSet<Name>) -> Option<Expr>) -> Expr {
    let mut out = Vec::new();
    let mut work = e.terms.clone();
    while let Some(t) = work.pop() {
        let used = t.used_names();
        let hit = t.factors.iter().enumerate().find_map(|(fi, f)| {
            let bare = Factor { sym: f.sym, derivs: Vec::new(), slots: f.slots.clone() };
            rule(&bare, &used).map(|r| (fi, wrap_derivs(r, &f.derivs)))
        });
        match hit {
            Some((fi, repl)) => work.extend(splice(&t, fi, &repl).terms),
            None => out.push(t),
        }
    }
    Expr { terms: out }
}

/// Eliminates symbols in favour of `basis`.
pub fn substitute_basis(e: &Expr, basis: Basis) -> Expr {
    let out = rewrite_factors(e, &|f, used| definition(f, basis, used));
    match basis {
        Basis::WeylSchouten => restore_traces(&metric_normalize(&out)),
        _ => out,
    }
}

/// Replaces a self-traced `P` by `J` (cosmetic inverse of the jets basis).
pub fn restore_traces(e: &Expr) -> Expr {
    let j = sym("J");
    let p = sym("P");
    let mut out = e.clone();
    for t in &mut out.terms {
        for f in &mut t.factors {
            if f.sym == p && f.slots[0].key() == f.slots[1].key() {
                *f = Factor { sym: j, derivs: f.derivs.clone(), slots: Vec::new() };
            }
        }
    }
    out
}

/// One entry of the audit dump.
#[derive(Clone, Debug, Serialize)]
pub struct Rule {
    pub group: &'static str,
    pub name: String,
    pub pattern: String,
    pub replacement: String,
    pub guard: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
}

impl RuleSet {
    /// Registers a rule after checking that both sides agree in free
    /// indices and weight.
    pub fn register(&mut self, group: &'static str, name: &str, pattern: &str, replacement: &str, guard: &str) {
        let (l, r) = (ex(pattern), ex(replacement));
        if !r.is_zero() {
            assert_eq!(l.free_indices(), r.free_indices(), "rule {name}: free indices");
            assert_eq!(l.weight_of().unwrap(), r.weight_of().unwrap(), "rule {name}: weight");
        }
        self.rules.push(Rule {
            group,
            name: name.into(),
            pattern: pattern.into(),
            replacement: replacement.into(),
            guard: guard.into(),
        });
    }

    /// The rule families used by the engine, in application order.
    pub fn standard() -> RuleSet {
        let mut rs = RuleSet::default();
        rs.rules.push(Rule {
            group: "leibniz",
            name: "product".into(),
            pattern: "nd[a](X*Y)".into(),
            replacement: "nd[a](X)*Y + X*nd[a](Y)".into(),
            guard: "always".into(),
        });
        rs.register("commute", "spacetime", "nd[a,b](v[^c]) - nd[b,a](v[^c])", "R[a,b,^c,d]*v[^d]", "derivative pair out of target order");
        rs.register("commute", "spacetime-lower", "nd[a,b](u[c]) - nd[b,a](u[c])", "-R[a,b,^d,c]*u[d]", "derivative pair out of target order");
        rs.register("commute", "gauge", "nd[a,b](s[^%B]) - nd[b,a](s[^%B])", "F[a,b,^%B,%E]*s[^%E]", "derivative pair out of target order");
        rs.register("commute", "tractor", "nd[a,b](V[^D]) - nd[b,a](V[^D])", "Omega[a,b,^D,E]*V[^E]", "derivative pair out of target order");
        rs.register("commute", "density", "nd[a,b](f[]) - nd[b,a](f[])", "0", "scalar of any weight");
        for (n, p) in [
            ("riemann", "R[a,b,c,d]"),
            ("ricci", "Ric[a,b]"),
            ("scalar", "Sc[]"),
        ] {
            let rhs = canonicalize(&substitute_basis(&ex(p), Basis::WeylSchouten));
            rs.register("to_weyl_schouten", n, p, &crate::print::to_text(&rhs), "basis = weyl_schouten");
        }
        for (n, p) in [
            ("weyl", "C[a,b,c,d]"),
            ("schouten", "P[a,b]"),
            ("schouten-trace", "J[]"),
            ("cotton", "A[a,b,c]"),
            ("bach", "B[a,b]"),
        ] {
            let rhs = canonicalize(&substitute_basis(&ex(p), Basis::Riemann));
            rs.register("to_riemann", n, p, &crate::print::to_text(&rhs), "basis = riemann");
        }
        rs.register("bianchi", "first", "C[a,b,c,d] + C[b,c,a,d] + C[c,a,b,d]", "0", "Riemann-type slots");
        rs.register(
            "bianchi",
            "second",
            "nd[e](R[a,b,^c,d]) + nd[a](R[b,e,^c,d]) + nd[b](R[e,a,^c,d])",
            "0",
            "innermost derivative",
        );
        rs.register("bianchi", "contracted-schouten", "nd[^a](P[a,b])", "nd[b](J[])", "innermost derivative contracted");
        rs.register("bianchi", "closed-curvature", "nd[e](F[a,b,^%B,%C]) + nd[a](F[b,e,^%B,%C]) + nd[b](F[e,a,^%B,%C])", "0", "innermost derivative");
        rs.register("traces", "weyl", "C[a,b,^a,d]", "0", "trace-free");
        rs.register("traces", "cotton", "A[a,^a,c]", "0", "trace-free");
        rs.register("traces", "bach", "B[a,^a]", "0", "trace-free");
        rs.register("traces", "schouten", "P[a,^a]", "J[]", "always");
        rs
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::equivalent;
    use crate::print::to_text;

    #[test]
    fn commutator_on_vector() {
        let e = ex("nd[b,a](v[^c]) - nd[a,b](v[^c])");
        let r = canonicalize(&commute_to_order(&e, &DerivOrder::Alphabetical));
        assert!(equivalent(&r, &ex("-R[a,b,^c,d]*v[^d]")).unwrap(), "{}", to_text(&r));
    }

    #[test]
    fn commutator_on_gauge_and_density() {
        let e = ex("nd[b,a](s[^%B]) - nd[a,b](s[^%B])");
        let r = canonicalize(&commute_to_order(&e, &DerivOrder::Alphabetical));
        assert!(equivalent(&r, &ex("-F[a,b,^%B,%E]*s[^%E]")).unwrap());
        let e = ex("nd[b,a](f[]) - nd[a,b](f[])");
        assert!(canonicalize(&commute_to_order(&e, &DerivOrder::Alphabetical)).is_zero());
    }

    #[test]
    fn ranked_order() {
        let e = ex("nd[a,b](u[c])");
        let r = commute_to_order(&e, &DerivOrder::Ranked(vec!["b".into()]));
        assert!(r.terms.iter().all(|t| t.factors.iter().all(|f| f.derivs.is_empty() || f.derivs[0].name.as_str() == "b")));
        assert_eq!(r.len(), 2);
    }

    #[test]
    fn ricci_round_trip() {
        let r = canonicalize(&substitute_basis(&ex("Ric[a,b]"), Basis::WeylSchouten));
        assert!(equivalent(&r, &ex("(n - 2)*P[a,b] + J[]*g[a,b]")).unwrap());
        let back = canonicalize(&substitute_basis(&r, Basis::Riemann));
        assert!(equivalent(&back, &ex("Ric[a,b]")).unwrap(), "{}", to_text(&back));
    }

    #[test]
    fn riemann_traces_to_ricci() {
        let r = canonicalize(&substitute_basis(&ex("R[k,a,^k,b]"), Basis::WeylSchouten));
        assert!(equivalent(&r, &ex("(n - 2)*P[a,b] + J[]*g[a,b]")).unwrap(), "{}", to_text(&r));
    }

    #[test]
    fn weyl_round_trip() {
        let r = substitute_basis(&ex("C[a,b,c,d]"), Basis::Riemann);
        let back = canonicalize(&substitute_basis(&r, Basis::WeylSchouten));
        assert_eq!(to_text(&back), "C[a,b,c,d]");
    }

    #[test]
    fn bach_in_riemann_basis() {
        let r = canonicalize(&substitute_basis(&ex("B[a,b]"), Basis::Riemann));
        let syms: BTreeSet<&str> = r.symbols().into_iter().map(|s| decl(s).name).collect();
        assert!(syms.iter().all(|s| ["R", "Ric", "Sc", "g"].contains(s)), "{syms:?}");
    }

    #[test]
    fn rules_dump() {
        let rs = RuleSet::standard();
        assert!(rs.rules.len() > 15);
        let v: serde_json::Value = serde_json::from_str(&rs.to_json()).unwrap();
        assert!(v["rules"].as_array().unwrap().iter().any(|r| r["group"] == "bianchi"));
    }
}
