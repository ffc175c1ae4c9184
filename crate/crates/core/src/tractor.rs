//! Splitting-operator algebra for the standard tractor bundle: derivatives
//! of X, Y, Z, the contraction table, the tractor curvature and its
//! divergence.

use std::collections::BTreeSet;

use crate::canon::{canonicalize, metric_normalize};
use crate::expr::{fresh_name, Expr, Factor, Index, Name, Term};
use crate::parse::ex;
use crate::reduce::{reduce, ReduceConfig};
use crate::symbols::{decl, IndexFamily, Role};

/// Applies `∇_{d0}···∇_{d(k-1)}` (d0 outermost) to `e` by Leibniz.
pub fn wrap_derivs(mut e: Expr, derivs: &[Index]) -> Expr {
    for d in derivs.iter().rev() {
        e = e.nabla(*d);
    }
    e
}

/// Replaces factor `fi` of `t` by `repl` (an expression with the factor's
/// free indices) and returns the expanded product.
pub fn splice(t: &Term, fi: usize, repl: &Expr) -> Expr {
    let mut rest = t.clone();
    rest.factors.remove(fi);
    let rest = Expr::from(rest);
    repl.mul(&rest)
}

fn is_split(f: &Factor) -> bool {
    matches!(decl(f.sym).role, Role::SplitX | Role::SplitY | Role::SplitZ)
}

/// `∇_a` of a bare splitting operator per the connection identities.
fn split_derivative(f: &Factor, a: Index, used: &BTreeSet<Name>) -> Expr {
    let b = f.slots[0];
    match decl(f.sym).role {
        Role::SplitX => ex(&format!("Z[{b},{a}]")),
        Role::SplitY => {
            let k = fresh_name(IndexFamily::Spacetime, used);
            ex(&format!("P[{a},{k}]*Z[{b},^{k}]"))
        }
        Role::SplitZ => {
            let c = f.slots[1];
            ex(&format!("-P[{a},{c}]*X[{b}] - g[{a},{c}]*Y[{b}]"))
        }
        _ => unreachable!(),
    }
}

/// Expands every derivative resting on X, Y or Z.
pub fn nabla_splitting(e: &Expr) -> Expr {
    let mut out = Vec::new();
    let mut work: Vec<Term> = e.terms.clone();
    while let Some(t) = work.pop() {
        let Some(fi) = t.factors.iter().position(|f| is_split(f) && !f.derivs.is_empty()) else {
            out.push(t);
            continue;
        };
        let f = &t.factors[fi];
        let k = f.derivs.len();
        let used = t.used_names();
        let bare = Factor { sym: f.sym, derivs: Vec::new(), slots: f.slots.clone() };
        let inner = split_derivative(&bare, f.derivs[k - 1], &used);
        let repl = wrap_derivs(inner, &f.derivs[..k - 1]);
        work.extend(splice(&t, fi, &repl).terms);
    }
    Expr { terms: out }
}

/// Eliminates splitting-operator pairs (`Y·X = 1`, `Z·Z = ḡ`, others 0) and
/// tractor metrics.
pub fn tractor_contract(e: &Expr) -> Expr {
    metric_normalize(e)
}

/// `h_{BC} = Y_B X_C + X_B Y_C + Z_B{}^c Z_{Cc}`.
pub fn tractor_metric_expansion(b: Index, c: Index) -> Expr {
    ex(&format!("Y[{b}]*X[{c}] + X[{b}]*Y[{c}] + Z[{b},^k9]*Z[{c},k9]"))
}

/// `Ω_{ab}{}^D{}_E` in terms of splitting operators, Weyl and Cotton.
pub fn plain_omega(a: Index, b: Index, d: Index, e: Index, used: &BTreeSet<Name>) -> Expr {
    let mut used = used.clone();
    used.extend([a.name, b.name, d.name, e.name]);
    let k = fresh_name(IndexFamily::Spacetime, &used);
    used.insert(k);
    let l = fresh_name(IndexFamily::Spacetime, &used);
    ex(&format!(
        "Z[{d},^{k}]*Z[{e},^{l}]*C[{a},{b},{k},{l}] - X[{d}]*Z[{e},^{l}]*A[{l},{a},{b}] + X[{e}]*Z[{d},^{l}]*A[{l},{a},{b}]"
    ))
}

/// Expands `Ω` by the curvature formula, differentiates the splitting
/// operators and contracts tractor indices; `A`, `B` stay as symbols.
pub fn expand_tractor(e: &Expr) -> Expr {
    let e = crate::rules::rewrite_factors(e, &|f, used| {
        (decl(f.sym).name == "Omega").then(|| plain_omega(f.slots[0], f.slots[1], f.slots[2], f.slots[3], used))
    });
    canonicalize(&tractor_contract(&nabla_splitting(&e)))
}

/// The tractor curvature with indices `a, b, ^D, E`.
pub fn tractor_curvature() -> Expr {
    let st = |n: &str, up| Index::new(IndexFamily::Spacetime, n, up);
    let tr = |n: &str, up| Index::new(IndexFamily::Tractor, n, up);
    plain_omega(st("a", false), st("b", false), tr("D", true), tr("E", false), &BTreeSet::new())
}

#[derive(Debug, thiserror::Error)]
#[error("tractor identity {name} failed; residual {residual}")]
pub struct ConsistencyError {
    pub name: String,
    pub residual: String,
}

fn commutator_on(v: &str) -> Expr {
    let e = ex(v);
    let ab = e.nabla(Index::new(IndexFamily::Spacetime, "b", false)).nabla(Index::new(IndexFamily::Spacetime, "a", false));
    let ba = e.nabla(Index::new(IndexFamily::Spacetime, "a", false)).nabla(Index::new(IndexFamily::Spacetime, "b", false));
    nabla_splitting(&ab.sub(&ba))
}

/// Checks `(∇_a∇_b − ∇_b∇_a)V^D = Ω_{ab}{}^D{}_E V^E` for `V = X, Y, Z_c`
/// (with the Riemann term on the spacetime index of Z).
pub fn check_tractor_curvature() -> Result<(), ConsistencyError> {
    let omega = tractor_curvature();
    let cases = [
        ("X", "X[^D]", "X[^E]", ""),
        ("Y", "Y[^D]", "Y[^E]", ""),
        ("Z", "Z[^D,c]", "Z[^E,c]", "R[a,b,^k8,c]*Z[^D,k8]"),
    ];
    for (label, v, ve, riem) in cases {
        let lhs = commutator_on(v);
        let mut rhs = omega.mul(&ex(ve));
        if !riem.is_empty() {
            rhs = rhs.sub(&ex(riem));
        }
        let diff = tractor_contract(&lhs.sub(&rhs));
        let r = reduce(&diff, &ReduceConfig::general());
        if !r.residual.is_zero() {
            return Err(ConsistencyError {
                name: format!("curvature on {label}"),
                residual: crate::print::to_text(&r.residual),
            });
        }
    }
    Ok(())
}

/// The displayed divergence formula
/// `(n−4)Z^{Dd}Z_E{}^eA_{cde} − X^DZ_E{}^eB_{ec} + X_EZ^{De}B_{ec}`.
pub fn tractor_divergence_formula() -> Expr {
    ex("(n - 4)*Z[^D,^d]*Z[E,^e]*A[c,d,e] - X[^D]*Z[E,^e]*B[e,c] + X[E]*Z[^D,^e]*B[e,c]")
}

/// Computes `∇^aΩ_{ac}{}^D{}_E` from the curvature formula and verifies it
/// against [`tractor_divergence_formula`] at symbolic `n`.
pub fn tractor_divergence() -> Result<Expr, ConsistencyError> {
    let st = |n: &str, up| Index::new(IndexFamily::Spacetime, n, up);
    let tr = |n: &str, up| Index::new(IndexFamily::Tractor, n, up);
    let omega = plain_omega(st("a", false), st("c", false), tr("D", true), tr("E", false), &BTreeSet::new());
    let div = tractor_contract(&nabla_splitting(&omega.nabla(st("a", true))));
    let formula = tractor_divergence_formula();
    let r = reduce(&div.sub(&formula), &ReduceConfig::general());
    if !r.residual.is_zero() {
        return Err(ConsistencyError { name: "tractor divergence".into(), residual: crate::print::to_text(&r.residual) });
    }
    Ok(canonicalize(&formula))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::print::to_text;

    fn canon(e: &Expr) -> String {
        to_text(&canonicalize(e))
    }

    #[test]
    fn connection_identities() {
        assert_eq!(canon(&nabla_splitting(&ex("nd[a](X[^B])"))), "Z[^B,a]");
        assert_eq!(canon(&nabla_splitting(&ex("nd[a](Y[^B])"))), canon(&ex("P[a,c]*Z[^B,^c]")));
        assert_eq!(
            canon(&nabla_splitting(&ex("nd[a,b](X[^B])"))),
            canon(&ex("-P[a,b]*X[^B] - g[a,b]*Y[^B]"))
        );
    }

    #[test]
    fn contraction_table() {
        assert_eq!(canon(&ex("Y[B]*X[^B]")), "1");
        assert_eq!(canon(&ex("X[B]*X[^B]")), "0");
        assert_eq!(canon(&ex("Z[B,a]*Z[^B,c]*g[^a,^c]")), "(n)");
    }

    #[test]
    fn tractor_metric_is_parallel() {
        let b = Index::new(IndexFamily::Tractor, "B", false);
        let c = Index::new(IndexFamily::Tractor, "C", false);
        let h = tractor_metric_expansion(b, c);
        let d = nabla_splitting(&h.nabla(Index::new(IndexFamily::Spacetime, "a", false)));
        assert!(canonicalize(&d).is_zero());
        // and it acts as the identity on splitting operators
        let hz = canonicalize(&h.mul(&ex("Z[^C,e]")));
        assert_eq!(to_text(&hz), "Z[B,e]");
    }

    #[test]
    fn curvature_is_antisymmetric_and_flat_limit() {
        let om = tractor_curvature();
        assert!(canonicalize(&om.add(&om.rename(&[("a", "b"), ("b", "a")]))).is_zero());
        let flat: Vec<Term> = canonicalize(&om)
            .terms
            .into_iter()
            .filter(|t| !t.factors.iter().any(|f| matches!(decl(f.sym).name, "C" | "A")))
            .collect();
        assert!(flat.is_empty());
    }

    #[test]
    fn curvature_consistency() {
        check_tractor_curvature().unwrap();
    }

    #[test]
    fn divergence_of_curvature() {
        let f = tractor_divergence().unwrap();
        let at4 = canonicalize(&f.specialize(4));
        assert!(at4.terms.iter().all(|t| t.factors.iter().any(|f| decl(f.sym).name == "B")));
        let at6 = f.specialize(6);
        assert!(at6.terms.iter().any(|t| t.coeff == crate::coeff::Coeff::int(2)));
    }
}
