//! Conformal change `ĝ = e^{2Υ}g`: every metric-dependent constituent is
//! rewritten in the old scale. A weight-`w` quantity `E` satisfies
//! `E|_ĝ = e^{wΥ}·hat(E)|_g`.

use std::collections::BTreeSet;

use crate::coeff::Coeff;
use crate::expr::{fresh_name, Expr, Factor, Index, Name};
use crate::forms::replace_free;
use crate::parse::ex;
use crate::rules::{rewrite_factors, substitute_basis, Basis};
use crate::symbols::{decl, sym, IndexFamily, Role};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HatError {
    #[error("no conformal transformation rule for {0}")]
    NoRule(String),
}

fn ups1(ix: Index) -> Factor {
    Factor { sym: sym("Ups"), derivs: vec![ix], slots: vec![] }
}

fn used_in(e: &Expr) -> BTreeSet<Name> {
    e.terms.iter().flat_map(|t| t.used_names()).collect()
}

/// `∇̂_a E` for `E` of uniform weight `w` in terms of `∇`, `Υ_a` and `ḡ`:
/// `∇_aE + wΥ_aE + Σ_{lower b}(−Υ_aE − Υ_bE[b→a] + ḡ_{ab}Υ^kE[b→k])
/// + Σ_{upper c}(Υ_aE − Υ^cE[c→a] + δ_a^cΥ_kE[c→k])`.
pub fn nabla_hat(e: &Expr, a: Index) -> Expr {
    if e.is_zero() {
        return Expr::zero();
    }
    if a.up {
        let mut used = used_in(e);
        used.insert(a.name);
        let t = Index { family: IndexFamily::Spacetime, name: fresh_name(IndexFamily::Spacetime, &used), up: false };
        let lowered = nabla_hat(e, t);
        return Expr::factor(Factor::new(sym("g"), vec![a, t.flipped()])).mul(&lowered);
    }
    let w = e.weight_of().expect("uniform weight").unwrap_or(0);
    let mut out = e.nabla(a);
    let ua = Expr::factor(ups1(a));
    let mut coef = w as i64;
    for x in e.free_indices().into_iter().filter(|i| i.family == IndexFamily::Spacetime) {
        let mut used = used_in(e);
        used.insert(a.name);
        let k = fresh_name(IndexFamily::Spacetime, &used);
        let kx = Index { name: k, ..x };
        let moved_to_a = replace_free(e, x, Index { up: x.up, ..a }.with_up(false));
        let moved_to_k = replace_free(e, x, kx);
        if x.up {
            coef += 1;
            out = out
                .sub(&Expr::factor(ups1(x)).mul(&moved_to_a))
                .add(&Expr::factor(Factor::new(sym("g"), vec![a, x])).mul(&Expr::factor(ups1(kx.flipped())).mul(&moved_to_k)));
        } else {
            coef -= 1;
            out = out
                .sub(&Expr::factor(ups1(x)).mul(&moved_to_a))
                .add(&Expr::factor(Factor::new(sym("g"), vec![a, x])).mul(&Expr::factor(ups1(kx.flipped())).mul(&moved_to_k)));
        }
    }
    out.add(&ua.mul(e).scale(&Coeff::int(coef)))
}

/// The transformed undifferentiated factor.
fn hat_base(f: &Factor, used: &BTreeSet<Name>) -> Result<Expr, HatError> {
    let d = decl(f.sym);
    let s = &f.slots;
    Ok(match d.name {
        "P" => {
            let k = fresh_name(IndexFamily::Spacetime, used);
            ex(&format!(
                "P[{a},{b}] - nd[{a},{b}](Ups[]) + Ups1[{a}]*Ups1[{b}] - 1/2*g[{a},{b}]*Ups1[{k}]*Ups1[^{k}]",
                a = s[0],
                b = s[1]
            ))
        }
        "J" => {
            let k = fresh_name(IndexFamily::Spacetime, used);
            ex(&format!("J[] - nd[^{k},{k}](Ups[]) + (2 - n)/(2)*Ups1[{k}]*Ups1[^{k}]"))
        }
        _ if matches!(d.role, Role::SplitX | Role::SplitY | Role::SplitZ) || d.name == "Omega" => {
            return Err(HatError::NoRule(d.name.into()))
        }
        "R" | "Ric" | "Sc" | "A" | "B" => return Err(HatError::NoRule(d.name.into())),
        _ => Expr::factor(f.clone()),
    })
}

fn hat_factor(f: &Factor, used: &BTreeSet<Name>) -> Result<Expr, HatError> {
    let bare = Factor { sym: f.sym, derivs: Vec::new(), slots: f.slots.clone() };
    let mut e = hat_base(&bare, used)?;
    for d in f.derivs.iter().rev() {
        e = nabla_hat(&e, *d);
    }
    Ok(e)
}

/// Rewrites `e` under `ĝ = e^{2Υ}g`. Riemann-basis symbols, the Cotton and
/// Bach tensors are first expanded through Weyl and Schouten.
pub fn hat_transform(e: &Expr) -> Result<Expr, HatError> {
    let e = substitute_basis(e, Basis::WeylSchouten);
    let e = rewrite_factors(&e, &|f, used| {
        let s = &f.slots;
        match decl(f.sym).name {
            "A" => Some(ex(&format!("nd[{b}](P[{c},{a}]) - nd[{c}](P[{b},{a}])", a = s[0], b = s[1], c = s[2]))),
            "B" => {
                let k = fresh_name(IndexFamily::Spacetime, used);
                let mut u2 = used.clone();
                u2.insert(k);
                let l = fresh_name(IndexFamily::Spacetime, &u2);
                Some(ex(&format!("nd[^{k}](A[{a},{k},{b}]) + P[^{k},^{l}]*C[{k},{a},{l},{b}]", a = s[0], b = s[1])))
            }
            _ => None,
        }
    });
    let mut out = Expr::zero();
    for t in &e.terms {
        let used = t.used_names();
        let mut acc = Expr::constant(t.coeff.clone());
        for f in &t.factors {
            let h = hat_factor(f, &used)?;
            acc = acc.mul(&h);
        }
        out = out.add(&acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::equivalent;
    use crate::numeric::eval::{required_degree, Evaluator};
    use crate::numeric::geometry::Geometry;
    use crate::numeric::scalar::{ModP, Scalar};
    use crate::numeric::spec::{conformal_rescale, random_polynomial_gauge, random_polynomial_metric, random_polynomial_scalar};
    use crate::print::to_text;

    /// At a point where Υ = 0 the value in ĝ equals hat(E) in g.
    fn numerically_sound(src: &str, extra: &str, seed: u64) {
        let n = 6;
        let e = ex(src).specialize(n as i64);
        let mut h = hat_transform(&e).unwrap().specialize(n as i64);
        if !extra.is_empty() {
            h = h.add(&ex(extra));
        }
        let ups = random_polynomial_scalar(n, seed + 1);
        let mut spec = random_polynomial_metric(n, 2, seed);
        spec.gauge = Some(random_polynomial_gauge(n, 2, seed + 2));
        spec.conformal_factor = Some(ups.clone());
        let hatted = conformal_rescale(&spec, &ups).compile().unwrap();
        let plain = spec.compile().unwrap();
        let x0 = vec![ModP::zero(); n];
        let deg = required_degree(&h).max(required_degree(&e)) + 1;
        let mut g0 = Geometry::<ModP>::new(&plain, &x0, deg, 7).unwrap();
        let mut g1 = Geometry::<ModP>::new(&hatted, &x0, deg, 7).unwrap();
        let v0 = Evaluator::new(&mut g0).eval(&h).unwrap();
        let v1 = Evaluator::new(&mut g1).eval(&e).unwrap();
        assert!(v0.sub(&v1).is_zero(), "{src}: {}", to_text(&h));
    }

    #[test]
    fn one_form_rule() {
        let h = hat_transform(&ex("nd[a](u[b])")).unwrap();
        let rule = ex("nd[a](u[b]) - Ups1[a]*u[b] - Ups1[b]*u[a] + g[a,b]*Ups1[^k]*u[k]");
        assert!(equivalent(&h, &rule).unwrap(), "{}", to_text(&crate::canon::canonicalize(&h)));
    }

    #[test]
    fn two_form_rule() {
        let h = hat_transform(&ex("nd[a](om[b,c,^%B,%C])")).unwrap();
        let rule = ex("nd[a](om[b,c,^%B,%C]) - 2*Ups1[a]*om[b,c,^%B,%C] - Ups1[b]*om[a,c,^%B,%C] - Ups1[c]*om[b,a,^%B,%C] + g[a,b]*Ups1[^k]*om[k,c,^%B,%C] + g[a,c]*Ups1[^k]*om[b,k,^%B,%C]");
        assert!(equivalent(&h, &rule).unwrap());
    }

    #[test]
    fn codifferential_rule() {
        // δ̂ω − δω = (4 − n − w)Υ^aω_{ac} at w = 0
        let h = hat_transform(&ex("-nd[^a](om[a,c,^%B,%C])")).unwrap();
        let rule = ex("-nd[^a](om[a,c,^%B,%C]) + (4 - n)*Ups1[^a]*om[a,c,^%B,%C]");
        assert!(equivalent(&h, &rule).unwrap(), "{}", to_text(&crate::canon::canonicalize(&h)));
    }

    #[test]
    fn weyl_is_invariant_and_unknowns_error() {
        assert!(equivalent(&hat_transform(&ex("C[a,b,c,d]")).unwrap(), &ex("C[a,b,c,d]")).unwrap());
        assert_eq!(hat_transform(&ex("X[^A]")), Err(HatError::NoRule("X".into())));
    }

    #[test]
    fn rules_agree_with_rescaled_metric() {
        for (i, (src, extra)) in [
            ("P[a,b]", ""),
            ("J[]", ""),
            ("P[a,^b]", ""),
            ("C[a,b,c,d]", ""),
            ("nd[a](P[b,c])", ""),
            ("nd[a,b](J[])", ""),
            ("A[a,b,c]", ""),
            ("nd[a](u[b])", ""),
            // test fields are stored lowered, so v̂^b = e^{-2Υ}v^b
            ("nd[a](v[^b])", "-2*Ups1[a]*v[^b]"),
            ("nd[^a](om[a,c,^%B,%C])", ""),
            ("nd[a,b](om[c,d,^%B,%C])", ""),
            ("nd[a](F[b,c,^%B,%C])", ""),
            ("R[a,b,^c,d]", ""),
        ]
        .iter()
        .enumerate()
        {
            numerically_sound(src, extra, 40 + i as u64);
        }
    }
}
