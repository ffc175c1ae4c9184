//! The Euler–Lagrange operator at the tractor connection in dimension 6:
//! its five summands, the partition by splitting-operator pairs and the
//! extracted obstruction tensor.

use std::collections::BTreeMap;

use crate::canon::canonicalize;
use crate::coeff::Coeff;
use crate::expr::Expr;
use crate::forms::{bracket_parts, d_a, d_operator, delta_a, p_hash, tractor_form, FormExpr};
use crate::parse::ex;
use crate::symbols::decl;
use crate::tractor::expand_tractor;

/// `expand_tractor` followed by specialization to `n = 6`.
pub fn expand6(e: &Expr) -> Expr {
    canonicalize(&expand_tractor(e).specialize(6))
}

/// The summands `δdδΩ`, `−4δ(P#Ω)`, `2δ(JΩ)`, `−(δΩ)_b Ω^b{}_c`,
/// `Ω^b{}_c(δΩ)_b`, each with free indices `c, ^D, E`, unexpanded.
pub fn summands() -> [Expr; 5] {
    let om = tractor_form();
    let d_om = delta_a(&om).expect("2-form");
    let c = |f: FormExpr| f.with_form_names(&["c"]).e;
    let first = c(delta_a(&d_a(&d_om)).expect("2-form"));
    let second = c(delta_a(&p_hash(&om).expect("2-form")).expect("2-form")).scale(&Coeff::int(-4));
    let jom = FormExpr::new(ex("J[]*Omega[a,b,^D,E]"), &["a", "b"]).expect("antisymmetric");
    let third = c(delta_a(&jom).expect("2-form")).scale(&Coeff::int(2));
    let (x1f1, f2x2) = bracket_parts(&d_om, &om).expect("shapes");
    [first, second, third, c(x1f1).neg(), c(f2x2)]
}

/// `(𝔇∇)_c{}^D{}_E` with `Ω` and the splitting operators expanded at n = 6.
pub fn tractor_d() -> Expr {
    let d = d_operator(&tractor_form()).expect("tractor curvature is a weight-0 2-form");
    expand6(&d.with_form_names(&["c"]).e)
}

/// Key of the splitting-operator pair in a term, e.g. `"XZ"`; `""` if none.
pub fn pair_key(t: &crate::expr::Term) -> String {
    let mut k: Vec<&str> = t.factors.iter().map(|f| decl(f.sym).name).filter(|n| matches!(*n, "X" | "Y" | "Z")).collect();
    k.sort_unstable();
    k.concat()
}

/// Splits an expanded expression by splitting-operator pair.
pub fn partition(e: &Expr) -> BTreeMap<String, Expr> {
    let mut out: BTreeMap<String, Expr> = BTreeMap::new();
    for t in &e.terms {
        out.entry(pair_key(t)).or_default().push(t.clone());
    }
    out
}

/// `(X_EZ^{Dd} − X^DZ_E{}^d)·16·O_{cd}`.
pub fn obstruction_embedding(o: &Expr) -> Expr {
    ex("X[E]*Z[^D,^d] - X[^D]*Z[E,^d]").mul(o).scale(&Coeff::int(16))
}

/// `O_{cd} = (1/32)(Y^EZ_{Dd} − Y_DZ^E{}_d)(𝔇∇)_c{}^D{}_E`, in the
/// Weyl–Schouten basis (C, A, B, P, J and their derivatives).
pub fn obstruction_from(d: &Expr) -> Expr {
    let proj = ex("Y[^E]*Z[D,d] - Y[D]*Z[^E,d]");
    expand6(&proj.mul(d)).scale(&Coeff::rational(1, 32))
}

pub fn obstruction() -> Expr {
    obstruction_from(&tractor_d())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summands_add_up_to_the_operator() {
        let s = summands();
        let total = expand6(&Expr::sum(s.iter().cloned()));
        assert!(canonicalize(&total.sub(&tractor_d())).is_zero());
    }

    #[test]
    fn partition_has_no_yy_or_bare_terms() {
        let p = partition(&tractor_d());
        assert!(!p.contains_key("YY") && !p.contains_key(""));
        assert!(p.keys().all(|k| k.len() == 2));
    }

    #[test]
    fn obstruction_is_free_in_c_d() {
        let o = obstruction();
        let mut free: Vec<String> = o.free_indices().iter().map(|i| i.to_string()).collect();
        free.sort();
        assert_eq!(free, ["c", "d"]);
        assert_eq!(o.weight_of().unwrap(), Some(-4));
    }
}
