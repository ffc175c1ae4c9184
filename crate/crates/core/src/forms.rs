//! Bundle-valued differential forms: exterior derivative, codifferential,
//! the Schouten derivation `P#`, the pairing, `Q₂`, the action density and
//! the Euler–Lagrange operator.

use std::collections::BTreeSet;

use crate::canon::canonicalize;
use crate::coeff::Coeff;
use crate::expr::{fresh_name, Expr, Factor, Index, Name};
use crate::parse::ex;
use crate::symbols::{sym, IndexFamily};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormError {
    #[error("form index {0} is not a free lower spacetime index")]
    BadFormIndex(String),
    #[error("expression is not antisymmetric in {0} and {1}")]
    NotAntisymmetric(String, String),
    #[error("operation needs a {expected}-form, got a {got}-form")]
    Arity { expected: usize, got: usize },
    #[error("weight {got} where {expected} is required")]
    Weight { expected: i32, got: i32 },
    #[error("value indices {0} and {1} cannot be paired")]
    Values(String, String),
    #[error("{0}")]
    Expr(String),
}

/// `e` viewed as a `k`-form in `form` with values in the remaining free
/// indices (`value`, upper before lower).
#[derive(Clone, Debug, PartialEq)]
pub struct FormExpr {
    pub e: Expr,
    pub form: Vec<Index>,
    pub value: Vec<Index>,
    pub weight: i32,
}

const FORM_NAMES: [&str; 12] = ["a", "b", "c", "d", "e", "f", "h", "p", "q", "r", "s", "t"];

/// A lowercase name neither free in `e` nor in `avoid`.
fn fresh_free(e: &Expr, avoid: &[Index]) -> Name {
    let taken: BTreeSet<Name> = e.free_indices().iter().chain(avoid).map(|i| i.name).collect();
    FORM_NAMES
        .iter()
        .map(|s| crate::expr::name(s))
        .find(|n| !taken.contains(n))
        .unwrap_or_else(|| fresh_name(IndexFamily::Spacetime, &taken))
}

fn temp(e: &Expr, fam: IndexFamily, also: &[&Expr]) -> Name {
    let mut used: BTreeSet<Name> = e.terms.iter().flat_map(|t| t.used_names()).collect();
    for x in also {
        used.extend(x.terms.iter().flat_map(|t| t.used_names()));
    }
    fresh_name(fam, &used)
}

/// Changes the free index named `from` into `to` (name and variance).
pub fn replace_free(e: &Expr, from: Index, to: Index) -> Expr {
    let mut out = e.rename(&[(from.name.as_str(), to.name.as_str())]);
    for t in &mut out.terms {
        for f in &mut t.factors {
            for ix in f.indices_mut() {
                if ix.key() == to.key() {
                    ix.up = to.up;
                }
            }
        }
    }
    out
}

/// Raises (or lowers) the free index `ix` through the metric.
pub fn flip_free(e: &Expr, ix: Index) -> Expr {
    let t = Index { family: ix.family, name: temp(e, ix.family, &[]), up: ix.up };
    let moved = replace_free(e, ix, t);
    let g = Factor::new(sym("g"), vec![ix.flipped(), t.flipped()]);
    Expr::factor(g).mul(&moved)
}

impl FormExpr {
    /// Builds a form, checking index roles and antisymmetry.
    pub fn new(e: Expr, form: &[&str]) -> Result<Self, FormError> {
        e.ensure_valid().map_err(|x| FormError::Expr(x.to_string()))?;
        let free = e.free_indices();
        let mut fi = Vec::new();
        for n in form {
            match free.iter().find(|i| i.name.as_str() == *n) {
                Some(i) if i.family == IndexFamily::Spacetime && !i.up => fi.push(*i),
                _ => return Err(FormError::BadFormIndex(n.to_string())),
            }
        }
        let mut value: Vec<Index> = free.into_iter().filter(|i| !fi.contains(i)).collect();
        value.sort_by_key(|i| !i.up);
        let weight = e.weight_of().map_err(|x| FormError::Expr(x.to_string()))?.unwrap_or(0);
        let f = FormExpr { e, form: fi, value, weight };
        f.check_antisymmetric()?;
        Ok(f)
    }

    fn check_antisymmetric(&self) -> Result<(), FormError> {
        for w in self.form.windows(2) {
            let (x, y) = (w[0].name.as_str(), w[1].name.as_str());
            let swapped = self.e.rename(&[(x, y), (y, x)]);
            if !canonicalize(&self.e.add(&swapped)).is_zero() {
                return Err(FormError::NotAntisymmetric(x.into(), y.into()));
            }
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.form.len()
    }

    /// Renames the form indices positionally.
    pub fn with_form_names(&self, names: &[&str]) -> FormExpr {
        let pairs: Vec<(&str, &str)> = self.form.iter().map(|i| i.name.as_str()).zip(names.iter().copied()).collect();
        FormExpr {
            e: self.e.rename(&pairs),
            form: self.form.iter().zip(names).map(|(i, n)| Index::new(i.family, n, false)).collect(),
            ..self.clone()
        }
    }

    fn derived(&self, e: Expr, form: Vec<Index>, weight: i32) -> FormExpr {
        FormExpr { e, form, value: self.value.clone(), weight }
    }

    pub fn scale(&self, c: &Coeff) -> FormExpr {
        self.derived(self.e.scale(c), self.form.clone(), self.weight)
    }

    pub fn add(&self, o: &FormExpr) -> FormExpr {
        let o = o.with_form_names(&self.form.iter().map(|i| i.name.as_str()).collect::<Vec<_>>());
        self.derived(self.e.add(&o.e), self.form.clone(), self.weight)
    }

    pub fn sub(&self, o: &FormExpr) -> FormExpr {
        self.add(&o.scale(&Coeff::int(-1)))
    }

    pub fn canonical(&self) -> FormExpr {
        self.derived(canonicalize(&self.e), self.form.clone(), self.weight)
    }
}

/// `(d_Aω)_{b0…bk} = Σ_i (−1)^i ∇_{b_i} ω_{b0…b̂_i…bk}`, i.e. the `1/k!`
/// normalised antisymmetrisation of `∇ω`; the new index comes first.
pub fn d_a(w: &FormExpr) -> FormExpr {
    let b0 = Index { family: IndexFamily::Spacetime, name: fresh_free(&w.e, &w.value), up: false };
    let mut form = vec![b0];
    form.extend(&w.form);
    let mut out = w.e.nabla(b0);
    for i in 1..form.len() {
        // ω with its slots renamed to (b0, …, b̂_i, …)
        let target: Vec<Index> = form.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, x)| *x).collect();
        let pairs: Vec<(&str, &str)> =
            w.form.iter().zip(&target).map(|(a, b)| (a.name.as_str(), b.name.as_str())).collect();
        let term = w.e.rename(&pairs).nabla(form[i]);
        out = if i % 2 == 1 { out.sub(&term) } else { out.add(&term) };
    }
    w.derived(out, form, w.weight)
}

/// `(δ_Aη)_{a…} = −∇^bη_{b a…}`.
pub fn delta_a(eta: &FormExpr) -> Result<FormExpr, FormError> {
    if eta.degree() == 0 {
        return Err(FormError::Arity { expected: 1, got: 0 });
    }
    let b = eta.form[0];
    let e = eta.e.nabla(b.with_up(true)).neg();
    Ok(eta.derived(e, eta.form[1..].to_vec(), eta.weight - 2))
}

/// `(P#ω)_{ab} = P_a{}^cω_{cb} + P_b{}^cω_{ac}`.
pub fn p_hash(w: &FormExpr) -> Result<FormExpr, FormError> {
    if w.degree() != 2 {
        return Err(FormError::Arity { expected: 2, got: w.degree() });
    }
    let (a, b) = (w.form[0], w.form[1]);
    let k = Index { family: IndexFamily::Spacetime, name: temp(&w.e, IndexFamily::Spacetime, &[]), up: false };
    let pa = Expr::factor(Factor::new(sym("P"), vec![a, k.flipped()]));
    let pb = Expr::factor(Factor::new(sym("P"), vec![b, k.flipped()]));
    let e = pa.mul(&replace_free(&w.e, a, k)).add(&pb.mul(&replace_free(&w.e, b, k)));
    Ok(w.derived(e, w.form.clone(), w.weight))
}

/// `Q₂ω = d_Aδ_Aω − 4P#ω + 2Jω` on weight-0 2-forms (dimension 6).
pub fn q2(w: &FormExpr) -> Result<FormExpr, FormError> {
    if w.degree() != 2 {
        return Err(FormError::Arity { expected: 2, got: w.degree() });
    }
    if w.weight != 0 {
        return Err(FormError::Weight { expected: 0, got: w.weight });
    }
    let names: Vec<&str> = w.form.iter().map(|i| i.name.as_str()).collect();
    let dd = d_a(&delta_a(w)?).with_form_names(&names);
    let ph = p_hash(w)?;
    let jw = ex("J[]").mul(&w.e);
    let e = dd.e.sub(&ph.e.scale(&Coeff::int(4))).add(&jw.scale(&Coeff::int(2)));
    Ok(w.derived(e, w.form.clone(), w.weight - 2))
}

/// `⟨ω,η⟩ = (1/k!) ω_{a…}{}^B{}_C η^{a…}{}^C{}_B` (no value indices:
/// the plain metric pairing).
pub fn pairing(w: &FormExpr, eta: &FormExpr, dim: i64) -> Result<Expr, FormError> {
    let k = w.degree();
    if eta.degree() != k {
        return Err(FormError::Arity { expected: k, got: eta.degree() });
    }
    if w.weight + eta.weight != 2 * k as i32 - dim as i32 {
        return Err(FormError::Weight { expected: 2 * k as i32 - dim as i32 - w.weight, got: eta.weight });
    }
    let names: Vec<&str> = w.form.iter().map(|i| i.name.as_str()).collect();
    // move η's free names out of the way, then onto ω's
    let mut other = eta.clone();
    let mut used: BTreeSet<Name> = w.e.terms.iter().chain(&eta.e.terms).flat_map(|t| t.used_names()).collect();
    let mut fresh = |fam| {
        let n = fresh_name(fam, &used);
        used.insert(n);
        n
    };
    let tmp_form: Vec<Name> = other.form.iter().map(|i| fresh(i.family)).collect();
    let tmp_val: Vec<Name> = other.value.iter().map(|i| fresh(i.family)).collect();
    let pairs: Vec<(String, String)> = other
        .form
        .iter()
        .zip(&tmp_form)
        .chain(other.value.iter().zip(&tmp_val))
        .map(|(a, b)| (a.name.to_string(), b.to_string()))
        .collect();
    let pr: Vec<(&str, &str)> = pairs.iter().map(|(a, b)| (a.as_str(), b.as_str())).collect();
    other.e = other.e.rename(&pr);
    let tmp_idx: Vec<Index> = other.form.iter().zip(&tmp_form).map(|(i, n)| Index { name: *n, ..*i }).collect();
    other = other.derived(other.e.clone(), tmp_idx, other.weight);
    let mut e = other.with_form_names(&names).e;
    for ix in &w.form {
        e = flip_free(&e, *ix);
    }
    match (w.value.as_slice(), eta.value.as_slice()) {
        ([], []) => {}
        ([wu, wd], [eu, ed]) if wu.up && !wd.up && eu.up && !ed.up && wu.family == eu.family => {
            let (tu, td) = (
                Index { name: tmp_val[0], ..*eu },
                Index { name: tmp_val[1], ..*ed },
            );
            e = replace_free(&e, tu, Index { up: true, ..*wd });
            e = replace_free(&e, td, Index { up: false, ..*wu });
        }
        _ => {
            return Err(FormError::Values(
                format!("{:?}", w.value.iter().map(|i| i.to_string()).collect::<Vec<_>>()),
                format!("{:?}", eta.value.iter().map(|i| i.to_string()).collect::<Vec<_>>()),
            ))
        }
    }
    let fact: i64 = (1..=k as i64).product();
    Ok(w.e.mul(&e).scale(&Coeff::rational(1, fact)))
}

/// `⟨F, Q₂F⟩` in dimension 6.
pub fn action_density(f: &FormExpr) -> Result<Expr, FormError> {
    pairing(f, &q2(f)?, 6)
}

/// The two compositions `(x_e{}^G{}_I F^e{}_c{}^I{}_H, F^e{}_c{}^G{}_I x_e{}^I{}_H)`
/// for an endomorphism-valued 1-form `x` and 2-form `F`.
pub fn bracket_parts(x: &FormExpr, f: &FormExpr) -> Result<(FormExpr, FormExpr), FormError> {
    if x.degree() != 1 || f.degree() != 2 {
        return Err(FormError::Arity { expected: 2, got: f.degree() });
    }
    let ([fu, fd], [xu, xd]) = (f.value.as_slice(), x.value.as_slice()) else {
        return Err(FormError::Values(format!("{:?}", f.value), format!("{:?}", x.value)));
    };
    let (e, c) = (f.form[0], f.form[1]);
    let fam = fu.family;
    let i_name = temp(&f.e, fam, &[&x.e]);
    let idx = |up| Index { family: fam, name: i_name, up };
    // x with form index e and value indices (G, I) resp. (I, H)
    let xe = x.with_form_names(&[e.name.as_str()]);
    let fr = flip_free(&f.e, e);
    let x1 = replace_free(&replace_free(&xe.e, *xu, *fu), *xd, idx(false));
    let f1 = replace_free(&fr, *fu, idx(true));
    let f2 = replace_free(&fr, *fd, idx(false));
    let x2 = replace_free(&replace_free(&xe.e, *xd, *fd), *xu, idx(true));
    let w = x.weight + f.weight - 2;
    Ok((f.derived(x1.mul(&f1), vec![c], w), f.derived(f2.mul(&x2), vec![c], w)))
}

/// `[x, F] = x_e{}^G{}_I F^e{}_c{}^I{}_H − F^e{}_c{}^G{}_I x_e{}^I{}_H`.
pub fn bracket(x: &FormExpr, f: &FormExpr) -> Result<FormExpr, FormError> {
    let (a, b) = bracket_parts(x, f)?;
    Ok(a.sub(&b))
}

/// `𝔇 = δ_AQ₂F − [δ_AF, F]` (dimension 6).
pub fn d_operator(f: &FormExpr) -> Result<FormExpr, FormError> {
    let first = delta_a(&q2(f)?)?;
    let second = bracket(&delta_a(f)?, f)?;
    Ok(first.sub(&second))
}

/// `(ι(dΥ)F)_c = Υ^aF_{ac}`.
pub fn iota_ups(f: &FormExpr) -> Result<FormExpr, FormError> {
    if f.degree() == 0 {
        return Err(FormError::Arity { expected: 1, got: 0 });
    }
    let a = f.form[0];
    let ups = Expr::factor(Factor { sym: sym("Ups"), derivs: vec![a.with_up(true)], slots: vec![] });
    Ok(f.derived(ups.mul(&f.e), f.form[1..].to_vec(), f.weight - 2))
}

/// `Υ·ω`.
pub fn times_ups(f: &FormExpr) -> FormExpr {
    f.derived(ex("Ups[]").mul(&f.e), f.form.clone(), f.weight)
}

/// The gauge curvature `F_{ab}{}^B{}_C`.
pub fn gauge_curvature() -> FormExpr {
    FormExpr::new(ex("F[a,b,^%B,%C]"), &["a", "b"]).unwrap()
}

/// The tractor curvature `Ω_{ab}{}^D{}_E`.
pub fn tractor_form() -> FormExpr {
    FormExpr::new(ex("Omega[a,b,^D,E]"), &["a", "b"]).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::equivalent;
    use crate::print::to_text;
    use crate::reduce::{reduce, ReduceConfig};

    #[test]
    fn d_on_sections_and_one_forms() {
        let s = FormExpr::new(ex("s[^%B]"), &[]).unwrap();
        let ds = d_a(&s);
        assert_eq!(ds.degree(), 1);
        assert!(equivalent(&ds.e, &ex("nd[a](s[^%B])")).unwrap());
        let u = FormExpr::new(ex("u[b]"), &["b"]).unwrap();
        let du = d_a(&u);
        assert!(equivalent(&du.e, &ex("nd[a](u[b]) - nd[b](u[a])")).unwrap());
        let w = FormExpr::new(ex("om[b,c,^%B,%C]"), &["b", "c"]).unwrap();
        let dw = d_a(&w);
        assert!(equivalent(&dw.e, &ex("nd[a](om[b,c,^%B,%C]) + nd[b](om[c,a,^%B,%C]) + nd[c](om[a,b,^%B,%C])")).unwrap());
    }

    #[test]
    fn d_squared_is_curvature() {
        let s = FormExpr::new(ex("s[^%B]"), &[]).unwrap();
        let dds = d_a(&d_a(&s));
        let names: Vec<&str> = dds.form.iter().map(|i| i.name.as_str()).collect();
        let target = ex(&format!("F[{},{},^%B,%E]*s[^%E]", names[0], names[1]));
        let r = reduce(&dds.e.sub(&target), &ReduceConfig::general());
        assert!(r.residual.is_zero(), "{}", to_text(&r.residual));
    }

    #[test]
    fn bianchi_for_gauge_curvature() {
        let r = reduce(&d_a(&gauge_curvature()).e, &ReduceConfig::general());
        assert!(r.residual.is_zero());
    }

    #[test]
    fn d_of_exact_one_form() {
        let u = FormExpr::new(ex("nd[b](f[])"), &["b"]).unwrap();
        assert!(reduce(&d_a(&u).e, &ReduceConfig::general()).residual.is_zero());
    }

    #[test]
    fn codifferential() {
        let d = delta_a(&gauge_curvature()).unwrap();
        assert_eq!(d.weight, -2);
        assert!(equivalent(&d.e, &ex("-nd[^a](F[a,b,^%B,%C])")).unwrap());
    }

    #[test]
    fn p_hash_arity_and_einstein() {
        let u = FormExpr::new(ex("u[b]"), &["b"]).unwrap();
        assert!(matches!(p_hash(&u), Err(FormError::Arity { .. })));
        let w = FormExpr::new(ex("om[a,b,^%B,%C]"), &["a", "b"]).unwrap();
        let ph = p_hash(&w).unwrap();
        // P = λg gives 2λω: replace P by g and compare with 2ω
        let sub = crate::rules::rewrite_factors(&ph.e, &|f, _| {
            (f.sym == sym("P")).then(|| Expr::factor(Factor::new(sym("g"), f.slots.clone())))
        });
        assert!(equivalent(&sub, &ex("2*om[a,b,^%B,%C]")).unwrap());
    }

    #[test]
    fn pairing_normalisation_and_symmetry() {
        let f = gauge_curvature();
        let g = FormExpr::new(ex("rho[a,b,^%B,%C]"), &["a", "b"]).unwrap();
        let p = pairing(&f, &g, 6).unwrap();
        assert!(equivalent(&p, &ex("1/2*F[a,b,^%B,%C]*rho[^a,^b,^%C,%B]")).unwrap(), "{}", to_text(&canonicalize(&p)));
        let q = pairing(&g, &f, 6).unwrap();
        assert!(equivalent(&p, &q).unwrap());
        let bad = pairing(&f, &f, 6);
        assert!(matches!(bad, Err(FormError::Weight { .. })));
    }

    #[test]
    fn q2_on_flat_data_is_d_delta() {
        let w = FormExpr::new(ex("om[a,b,^%B,%C]"), &["a", "b"]).unwrap();
        let q = q2(&w).unwrap();
        assert_eq!(q.weight, -2);
        let flat = crate::rules::rewrite_factors(&q.e, &|f, _| {
            matches!(crate::symbols::decl(f.sym).name, "P" | "J").then(Expr::zero)
        });
        let dd = d_a(&delta_a(&w).unwrap()).with_form_names(&["a", "b"]);
        assert!(equivalent(&flat, &dd.e).unwrap());
    }

    #[test]
    fn euler_lagrange_shape() {
        let d = d_operator(&gauge_curvature()).unwrap();
        assert_eq!(d.degree(), 1);
        assert_eq!(d.weight, -4);
        assert!(d.e.ensure_valid().is_ok());
        let i = iota_ups(&gauge_curvature()).unwrap();
        assert!(equivalent(&i.e, &ex("nd[^a](Ups[])*F[a,b,^%B,%C]")).unwrap());
    }

    #[test]
    fn tractor_pairing_regression() {
        let om = tractor_form();
        let p = pairing(&om, &om, 4).unwrap();
        let r = canonicalize(&crate::reduce::prepare(&p, None));
        assert!(equivalent(&r, &ex("-1/2*C[a,b,c,d]*C[^a,^b,^c,^d]")).unwrap(), "{}", to_text(&r));
    }
}
