//! Normal forms modulo the differential-Bianchi ideal.
//!
//! An expression is rewritten to jets of `C` and `P` (plus test fields,
//! gauge curvature and splitting operators). Around its monomials we
//! generate instances of every structural relation (derivative
//! commutation, first and second Bianchi, closedness of 2-forms, the
//! contracted Bianchi identity for `P`, optionally total divergences),
//! close the monomial set under that generation to a fixed depth, and
//! eliminate. The residual lies on non-pivot columns, so it is a normal
//! form for the generated relation space.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use crate::canon::{canonical_term, canonicalize};
use crate::coeff::Coeff;
use crate::expr::{fresh_name, Expr, Factor, Index, Term};
use crate::print::factor_text;
use crate::rules::{restore_traces, riemann_low, substitute_basis, swap_pair, Basis};
use crate::symbols::{decl, sym, BianchiClass, IndexFamily};
use crate::tractor::{nabla_splitting, splice, wrap_derivs};

#[derive(Clone, Debug)]
pub struct ReduceConfig {
    /// Specialize the dimension before eliminating.
    pub dim: Option<i64>,
    /// Generation rounds around the input monomials.
    pub max_depth: usize,
    /// Stop growing the monomial set beyond this size.
    pub max_monomials: usize,
    /// Also treat total divergences as zero (integrands only).
    pub divergences: bool,
}

impl ReduceConfig {
    pub fn general() -> Self {
        ReduceConfig { dim: None, max_depth: 3, max_monomials: 40_000, divergences: false }
    }

    pub fn at_dim(n: i64) -> Self {
        ReduceConfig { dim: Some(n), ..Self::general() }
    }

    pub fn modulo_divergences(mut self) -> Self {
        self.divergences = true;
        self
    }

    pub fn depth(mut self, d: usize) -> Self {
        self.max_depth = d;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub residual: Expr,
    pub monomials: usize,
    pub relations: usize,
    pub rank: usize,
    /// The monomial cap was hit before the requested depth.
    pub truncated: bool,
}

/// Rewrites to the jets basis, expands splitting-operator derivatives and
/// canonicalizes (at `dim` when given).
pub fn prepare(e: &Expr, dim: Option<i64>) -> Expr {
    let e = nabla_splitting(&substitute_basis(e, Basis::SchoutenJets));
    let e = canonicalize(&e);
    match dim {
        Some(n) => canonicalize(&e.specialize(n)),
        None => e,
    }
}

fn st(name: crate::expr::Name, up: bool) -> Index {
    Index { family: IndexFamily::Spacetime, name, up }
}

/// Raw (unprepared) relation instances anchored at one monomial; each is
/// an identity that vanishes pointwise, except the total-divergence
/// instances produced when `divergences` is set.
pub fn relations_at(t: &Term, divergences: bool) -> Vec<Expr> {
    let mut out = Vec::new();
    let used = t.used_names();
    let c_sym = sym("C");
    let p_sym = sym("P");
    for (fi, f) in t.factors.iter().enumerate() {
        let d = decl(f.sym);
        let k = f.derivs.len();
        for j in 0..k.saturating_sub(1) {
            let (swapped, corr) = swap_pair(t, fi, j);
            let mut rel = Expr::from(t.clone());
            rel.push(Term { coeff: -&swapped.coeff, factors: swapped.factors });
            out.push(rel.sub(&corr));
        }
        let bare = |derivs: &[Index], slots: Vec<Index>| Factor { sym: f.sym, derivs: derivs.to_vec(), slots };
        let s = &f.slots;
        if f.sym == c_sym {
            let cyc = Expr::sum([(0, 1, 2), (1, 2, 0), (2, 0, 1)].map(|(x, y, z)| {
                Expr::factor(bare(&f.derivs, vec![s[x], s[y], s[z], s[3]]))
            }));
            out.push(splice(t, fi, &cyc));
            if k > 0 {
                let e = f.derivs[k - 1];
                let outer = &f.derivs[..k - 1];
                let r = |a, b, c, dd| riemann_low(a, b, c, dd);
                let first = r(s[0], s[1], s[2], s[3]).nabla(e)
                    .add(&r(s[1], e, s[2], s[3]).nabla(s[0]))
                    .add(&r(e, s[0], s[2], s[3]).nabla(s[1]));
                let second = r(s[0], s[1], s[2], s[3]).nabla(e)
                    .add(&r(s[0], s[1], s[3], e).nabla(s[2]))
                    .add(&r(s[0], s[1], e, s[2]).nabla(s[3]));
                for b in [first, second] {
                    out.push(splice(t, fi, &wrap_derivs(b, outer)));
                }
            }
        }
        if d.bianchi == BianchiClass::Closed && k > 0 {
            let e = f.derivs[k - 1];
            let outer = &f.derivs[..k - 1];
            let mk = |x: Index, y: Index, z: Index| {
                let mut sl = vec![y, z];
                sl.extend_from_slice(&s[2..]);
                Expr::factor(bare(&[x], sl))
            };
            let cyc = mk(e, s[0], s[1]).add(&mk(s[0], s[1], e)).add(&mk(s[1], e, s[0]));
            out.push(splice(t, fi, &wrap_derivs(cyc, outer)));
        }
        if f.sym == p_sym && k > 0 {
            let e = f.derivs[k - 1];
            let outer = &f.derivs[..k - 1];
            let kk = fresh_name(IndexFamily::Spacetime, &used);
            let trace = |o: Index| Expr::factor(bare(&[o], vec![st(kk, true), st(kk, false)]));
            if s[0].key() == s[1].key() {
                let div = Expr::factor(bare(&[st(kk, true)], vec![st(kk, false), e]));
                out.push(splice(t, fi, &wrap_derivs(div.sub(&trace(e)), outer)));
            } else {
                for (x, o) in [(0, 1), (1, 0)] {
                    if s[x].key() == e.key() {
                        let here = Expr::factor(bare(&[e], vec![s[x], s[o]]));
                        out.push(splice(t, fi, &wrap_derivs(here.sub(&trace(s[o])), outer)));
                    }
                }
            }
        }
        if divergences && k > 0 {
            let d0 = f.derivs[0];
            if t.dummies().contains(&d0.key()) {
                let mut u = t.clone();
                u.factors[fi].derivs.remove(0);
                out.push(Expr::from(u).nabla(d0));
            }
        }
    }
    out
}

/// Monomial ordering: more derivatives on one factor, then more
/// derivatives overall, then text. Larger monomials are eliminated first.
fn mono_key(t: &Term) -> (usize, usize, String) {
    let max = t.factors.iter().map(|f| f.derivs.len()).max().unwrap_or(0);
    let sq = t.factors.iter().map(|f| f.derivs.len() * f.derivs.len()).sum();
    let text = t.factors.iter().map(factor_text).collect::<Vec<_>>().join("*");
    (max, sq, text)
}

type Row = BTreeMap<usize, Coeff>;

struct Echelon {
    pivots: HashMap<usize, Row>,
}

impl Echelon {
    fn eliminate(&self, row: &mut Row, lead: usize, v: &Coeff) {
        let p = &self.pivots[&lead];
        for (c, pv) in p {
            let entry = row.entry(*c).or_insert_with(Coeff::zero);
            *entry = &*entry - &(v * pv);
            if entry.is_zero() {
                row.remove(c);
            }
        }
    }

    /// Adds a relation; returns whether the rank grew.
    fn insert(&mut self, mut row: Row) -> bool {
        while let Some((&lead, v)) = row.iter().next_back() {
            if self.pivots.contains_key(&lead) {
                let v = v.clone();
                self.eliminate(&mut row, lead, &v);
            } else {
                let inv = v.recip();
                for c in row.values_mut() {
                    *c = &*c * &inv;
                }
                self.pivots.insert(lead, row);
                return true;
            }
        }
        false
    }

    fn normal_form(&self, mut row: Row) -> Row {
        let mut res = Row::new();
        while let Some((&lead, v)) = row.iter().next_back() {
            let v = v.clone();
            if self.pivots.contains_key(&lead) {
                self.eliminate(&mut row, lead, &v);
            } else {
                row.remove(&lead);
                res.insert(lead, v);
            }
        }
        res
    }
}

fn monomial(t: &Term) -> Term {
    Term { coeff: Coeff::one(), factors: t.factors.clone() }
}

/// Reduces `e` modulo the generated relations.
pub fn reduce(e: &Expr, cfg: &ReduceConfig) -> Reduction {
    let target = prepare(e, cfg.dim);
    let mut index: HashMap<Vec<Factor>, usize> = HashMap::new();
    let mut monos: Vec<Term> = Vec::new();
    let add = |t: &Term, index: &mut HashMap<Vec<Factor>, usize>, monos: &mut Vec<Term>| -> Option<usize> {
        if index.contains_key(&t.factors) {
            return None;
        }
        index.insert(t.factors.clone(), monos.len());
        monos.push(monomial(t));
        Some(monos.len() - 1)
    };
    let mut frontier: Vec<usize> = target.terms.iter().filter_map(|t| add(t, &mut index, &mut monos)).collect();
    let mut relations: Vec<Expr> = Vec::new();
    let mut truncated = false;
    for _ in 0..cfg.max_depth {
        if frontier.is_empty() {
            break;
        }
        let fresh: Vec<Expr> = frontier
            .par_iter()
            .flat_map_iter(|&i| {
                relations_at(&monos[i], cfg.divergences)
                    .into_iter()
                    .map(|r| prepare(&r, cfg.dim))
                    .filter(|r| !r.is_zero())
                    .collect::<Vec<_>>()
            })
            .collect();
        let mut next = Vec::new();
        for r in &fresh {
            for t in &r.terms {
                if let Some(i) = add(t, &mut index, &mut monos) {
                    next.push(i);
                }
            }
        }
        relations.extend(fresh);
        frontier = next;
        if monos.len() > cfg.max_monomials {
            truncated = true;
            break;
        }
    }
    // columns ordered by key
    let mut order: Vec<usize> = (0..monos.len()).collect();
    let keys: Vec<_> = monos.par_iter().map(mono_key).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut col = vec![0; monos.len()];
    for (c, &m) in order.iter().enumerate() {
        col[m] = c;
    }
    let to_row = |e: &Expr| -> Row {
        let mut row = Row::new();
        for t in &e.terms {
            let c = col[index[&t.factors]];
            let entry = row.entry(c).or_insert_with(Coeff::zero);
            *entry = &*entry + &t.coeff;
        }
        row.retain(|_, v| !v.is_zero());
        row
    };
    let mut ech = Echelon { pivots: HashMap::new() };
    let mut rows: Vec<Row> = relations.iter().map(to_row).collect();
    rows.sort_by_key(|r| r.len());
    for r in rows {
        ech.insert(r);
    }
    let nf = ech.normal_form(to_row(&target));
    let residual = crate::canon::collect(
        nf.into_iter()
            .map(|(c, v)| Term { coeff: v, factors: monos[order[c]].factors.clone() })
            .collect(),
    );
    Reduction { residual, monomials: monos.len(), relations: relations.len(), rank: ech.pivots.len(), truncated }
}

/// `reduce(..).residual` in the Weyl–Schouten basis with `J` restored.
pub fn bianchi_simplify(e: &Expr) -> Expr {
    let r = reduce(e, &ReduceConfig::general());
    let out = restore_traces(&r.residual);
    Expr { terms: out.terms.iter().filter_map(canonical_term).collect() }
}

/// The set of symbols a prepared expression may contain.
pub fn jets_symbols() -> BTreeSet<&'static str> {
    ["C", "P", "g", "F", "X", "Y", "Z", "Ups", "S", "T", "W", "v", "u", "f", "V", "s", "om", "et", "rho", "th"]
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::ex;
    use crate::print::to_text;

    fn zero(s: &str, cfg: &ReduceConfig) {
        let r = reduce(&ex(s), cfg);
        assert!(r.residual.is_zero(), "{s}: residual {} ({} monomials, rank {})", to_text(&r.residual), r.monomials, r.rank);
    }

    #[test]
    fn relation_instances_vanish_numerically() {
        use crate::numeric::eval::{required_degree, Evaluator};
        use crate::numeric::geometry::Geometry;
        use crate::numeric::scalar::{ModP, Scalar};
        use crate::numeric::spec::{random_polynomial_gauge, random_polynomial_metric, random_polynomial_scalar};
        let n = 5;
        let mut spec = random_polynomial_metric(n, 3, 11);
        spec.gauge = Some(random_polynomial_gauge(n, 2, 12));
        spec.conformal_factor = Some(random_polynomial_scalar(n, 13));
        let compiled = spec.compile().unwrap();
        let x0: Vec<ModP> = (0..n).map(|k| ModP::from_i64(k as i64 - 2)).collect();
        let mut checked = 0;
        for src in [
            "nd[a,b](P[c,d])",
            "nd[a,^a](P[b,c])",
            "nd[b](P[^a,a])*u[c]",
            "nd[e,a](C[b,c,d,f])*v[^f]",
            "nd[e](C[a,b,c,d])",
            "C[a,b,c,d]*S[e,f]",
            "nd[a,b](F[c,d,^%B,%C])*s[^%C]",
            "nd[a,b](et[c,d,^%B,%C])",
            "nd[a,b,c](Ups[])",
            "nd[a,b](V[^D])",
            "nd[a,b](th[c,^%B,%C])",
        ] {
            let e = ex(src);
            for t in &e.terms {
                for rel in relations_at(t, false) {
                    let deg = required_degree(&rel) + 1;
                    let mut geo = Geometry::<ModP>::new(&compiled, &x0, deg, 5).unwrap();
                    let mut ev = Evaluator::new(&mut geo);
                    let v = ev.eval(&rel).unwrap();
                    assert!(v.is_zero(), "{src}: {}", to_text(&rel));
                    let p = prepare(&rel, None);
                    if !p.is_zero() {
                        assert!(ev.eval(&p).unwrap().is_zero(), "{src} prepared: {}", to_text(&p));
                    }
                    checked += 1;
                }
            }
        }
        assert!(checked >= 18, "{checked}");
    }

    #[test]
    fn first_bianchi() {
        zero("R[a,b,c,d] + R[b,c,a,d] + R[c,a,b,d]", &ReduceConfig::general());
    }

    #[test]
    fn contracted_schouten() {
        zero("nd[a](P[^a,b]) - nd[b](J[])", &ReduceConfig::general());
    }

    #[test]
    fn cotton_divergence_free() {
        zero("nd[^a](A[a,b,c])", &ReduceConfig::general());
    }

    #[test]
    fn cotton_cyclic() {
        zero("A[a,b,c] + A[b,c,a] + A[c,a,b]", &ReduceConfig::general());
    }

    #[test]
    fn second_bianchi_on_riemann() {
        zero("nd[e](R[a,b,^c,d]) + nd[a](R[b,e,^c,d]) + nd[b](R[e,a,^c,d])", &ReduceConfig::general());
    }

    #[test]
    fn weyl_divergence_is_cotton() {
        zero("nd[^a](C[a,b,c,d]) - (n - 3)*A[b,c,d]", &ReduceConfig::general());
    }

    #[test]
    fn bach_divergence() {
        zero("nd[^b](B[a,b]) - (n - 4)*P[^b,^c]*A[c,a,b]", &ReduceConfig::general());
    }

    #[test]
    fn nonzero_survives() {
        let r = reduce(&ex("nd[a](J[])"), &ReduceConfig::general());
        assert!(!r.residual.is_zero());
        let r = reduce(&ex("nd[^a](A[a,b,c]) + P[a,b]*nd[^a](u[c])"), &ReduceConfig::general());
        assert!(!r.residual.is_zero());
    }

    #[test]
    fn normal_form_is_idempotent() {
        let e = ex("nd[^c](A[a,c,b]) + nd[c](A[^c,a,b]) + P[a,^c]*P[c,b]");
        let once = reduce(&e, &ReduceConfig::general()).residual;
        let twice = reduce(&once, &ReduceConfig::general()).residual;
        assert_eq!(canonicalize(&once), canonicalize(&twice));
    }

    #[test]
    fn divergence_is_zero_modulo_divergences() {
        let div = ex("J[]*nd[^a](J[])").nabla(Index::parse("a").unwrap());
        let r = reduce(&div, &ReduceConfig::general().modulo_divergences());
        assert!(r.residual.is_zero(), "{}", to_text(&r.residual));
        let r = reduce(&ex("J[]*J[]*J[]"), &ReduceConfig::general().modulo_divergences());
        assert!(!r.residual.is_zero());
    }
}
