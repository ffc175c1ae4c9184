//! Text (re-parseable) and LaTeX printers.

use std::cmp::Ordering;
use std::fmt::Write;

use crate::coeff::Coeff;
use crate::expr::{Expr, Factor, Index, Term};
use crate::symbols::{decl, Role};

/// Deterministic printing order: factor structure, then coefficient.
pub fn term_order(a: &Term, b: &Term) -> Ordering {
    let ka: Vec<_> = a.factors.iter().map(factor_key).collect();
    let kb: Vec<_> = b.factors.iter().map(factor_key).collect();
    ka.cmp(&kb).then_with(|| a.coeff.cmp_key(&b.coeff))
}

fn factor_key(f: &Factor) -> (&'static str, usize, Vec<Index>, Vec<Index>) {
    (decl(f.sym).name, f.derivs.len(), f.derivs.clone(), f.slots.clone())
}

fn is_ups1(f: &Factor) -> bool {
    decl(f.sym).role == Role::ConformalFactor && !f.derivs.is_empty()
}

fn index_list(ix: &[Index]) -> String {
    ix.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",")
}

pub fn factor_text(f: &Factor) -> String {
    let (outer, core) = if is_ups1(f) {
        let k = f.derivs.len() - 1;
        (&f.derivs[..k], format!("Ups1[{}]", f.derivs[k]))
    } else {
        (&f.derivs[..], format!("{}[{}]", decl(f.sym).name, index_list(&f.slots)))
    };
    if outer.is_empty() {
        core
    } else {
        format!("nd[{}]({})", index_list(outer), core)
    }
}

/// Splits off the sign so that terms print as `a - 3/2*B`.
fn sign_and_magnitude(c: &Coeff) -> (bool, Coeff) {
    if c.is_negative_leading() {
        (true, -c)
    } else {
        (false, c.clone())
    }
}

fn term_body(t: &Term, mag: &Coeff) -> String {
    let mut parts: Vec<String> = Vec::new();
    if !mag.is_one() || t.factors.is_empty() {
        parts.push(mag.to_string());
    }
    parts.extend(t.factors.iter().map(factor_text));
    parts.join("*")
}

/// Prints terms in the given order.
pub fn to_text_ordered(e: &Expr) -> String {
    if e.is_zero() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, t) in e.terms.iter().enumerate() {
        let (neg, mag) = sign_and_magnitude(&t.coeff);
        match (i, neg) {
            (0, true) => s.push('-'),
            (0, false) => {}
            (_, true) => s.push_str(" - "),
            (_, false) => s.push_str(" + "),
        }
        s.push_str(&term_body(t, &mag));
    }
    s
}

/// Prints terms sorted by [`term_order`].
pub fn to_text(e: &Expr) -> String {
    let mut sorted = e.clone();
    sorted.terms.sort_by(term_order);
    to_text_ordered(&sorted)
}

fn latex_indices(ix: &[Index]) -> String {
    let mut s = String::new();
    let mut i = 0;
    while i < ix.len() {
        let up = ix[i].up;
        let mut j = i;
        let mut group = String::new();
        while j < ix.len() && ix[j].up == up {
            group.push_str(&ix[j].name);
            j += 1;
        }
        if i > 0 {
            s.push_str("{}");
        }
        let _ = write!(s, "{}{{{}}}", if up { "^" } else { "_" }, group);
        i = j;
    }
    s
}

pub fn factor_latex(f: &Factor) -> String {
    let d = decl(f.sym);
    let mut s = String::new();
    let derivs: &[Index] = if is_ups1(f) { &f.derivs[..f.derivs.len() - 1] } else { &f.derivs };
    for ix in derivs {
        let _ = write!(s, "\\nabla{}", latex_indices(std::slice::from_ref(ix)));
    }
    if is_ups1(f) {
        let _ = write!(s, "\\Upsilon{}", latex_indices(&f.derivs[f.derivs.len() - 1..]));
    } else {
        s.push_str(d.latex);
        s.push_str(&latex_indices(&f.slots));
    }
    s
}

fn coeff_latex(c: &Coeff) -> String {
    if let Some(r) = c.as_rational() {
        return if r.is_integer() {
            r.numer().to_string()
        } else {
            format!("\\frac{{{}}}{{{}}}", r.numer(), r.denom())
        };
    }
    let num = format!("{}", c.numer()).replace('*', "");
    if c.denom().is_constant() {
        format!("({num})")
    } else {
        format!("\\frac{{{num}}}{{{}}}", format!("{}", c.denom()).replace('*', ""))
    }
}

pub fn to_latex(e: &Expr) -> String {
    if e.is_zero() {
        return "0".into();
    }
    let mut sorted = e.clone();
    sorted.terms.sort_by(term_order);
    let mut s = String::new();
    for (i, t) in sorted.terms.iter().enumerate() {
        let (neg, mag) = sign_and_magnitude(&t.coeff);
        if neg {
            s.push_str(if i == 0 { "-" } else { " - " });
        } else if i > 0 {
            s.push_str(" + ");
        }
        if !mag.is_one() || t.factors.is_empty() {
            s.push_str(&coeff_latex(&mag));
            s.push(' ');
        }
        let fs: Vec<String> = t.factors.iter().map(factor_latex).collect();
        s.push_str(&fs.join(" "));
    }
    s.trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::ex;

    #[test]
    fn round_trip() {
        for src in [
            "nd[^c](A[a,c,b]) + P[^c,^d]*C[c,a,d,b]",
            "-(n - 4)*Z[^D,^d]*Z[E,^e]*A[c,d,e] + 1/2*X[^D]*Z[E,^e]*B[e,c]",
            "(1)/(n - 2)*Ric[a,b] - (1)/(2*n^2 - 6*n + 4)*Sc[]*g[a,b]",
            "Ups1[a]*nd[b](Ups1[c])*u[^b] - 3*F[a,c,^%B,%C]*om[^b,^d,%B,^%C]*g[b,d]",
            "2",
        ] {
            let e = ex(src);
            let printed = to_text(&e);
            let back = ex(&printed);
            assert_eq!(to_text(&back), printed, "{src}");
            let mut a = e.terms.clone();
            let mut b = back.terms.clone();
            a.sort_by(term_order);
            b.sort_by(term_order);
            assert_eq!(a, b, "{src}");
        }
    }

    #[test]
    fn latex_stacks_indices() {
        let e = ex("nd[^c](A[a,c,b])");
        assert_eq!(to_latex(&e), "\\nabla^{c}A_{acb}");
        let e = ex("Z[^D,^d]*Z[E,^e]");
        assert_eq!(to_latex(&e), "Z^{Dd} Z_{E}{}^{e}");
    }
}
