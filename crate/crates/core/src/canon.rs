//! Canonical forms of monomials under slot symmetries, dummy relabeling and
//! factor reordering, plus metric and splitting-operator contraction.
//!
//! The canonical key of a monomial is the lexicographically least index
//! encoding over all factor orderings within a tie class (same symbol and
//! derivative count) and all slot-symmetry images. The search is best-first:
//! the encoding of a prefix depends only on the choices made for that
//! prefix, so non-minimal prefixes are discarded as soon as they appear.

use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;

use crate::coeff::Coeff;
use crate::expr::{name, Expr, Factor, Index, Name, Term};
use crate::print::term_order;
use crate::symbols::{decl, IndexFamily, Role};

/// One index position in a canonical key.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum Enc {
    Free(IndexFamily, u16, bool),
    /// `(family, label, variance)`; for metric families the variance bit is
    /// the occurrence parity, so `T_a^a` and `T^a_a` encode alike.
    Dummy(IndexFamily, u16, bool),
}

#[derive(Clone)]
struct State {
    order: Vec<(usize, usize)>,
    used: u64,
    sign: i8,
    labels: Vec<((IndexFamily, Name), u16)>,
}

impl State {
    fn label(&self, k: &(IndexFamily, Name)) -> Option<u16> {
        self.labels.iter().find(|(x, _)| x == k).map(|&(_, l)| l)
    }
}

fn has_metric(f: IndexFamily) -> bool {
    f != IndexFamily::Gauge
}

/// Slots of `f` after applying group element `g`.
fn permuted_slots(f: &Factor, g: usize) -> Vec<Index> {
    let el = &decl(f.sym).group()[g];
    el.perm.iter().map(|&p| f.slots[p as usize]).collect()
}

fn encode(
    f: &Factor,
    slots: &[Index],
    st: &mut State,
    free_rank: &HashMap<(IndexFamily, Name), u16>,
    out: &mut Vec<Enc>,
) {
    for ix in f.derivs.iter().chain(slots.iter()) {
        let k = ix.key();
        if let Some(&r) = free_rank.get(&k) {
            out.push(Enc::Free(ix.family, r, ix.up));
            continue;
        }
        match st.label(&k) {
            Some(l) => out.push(Enc::Dummy(ix.family, l, if has_metric(ix.family) { true } else { ix.up })),
            None => {
                let l = st.labels.len() as u16;
                st.labels.push((k, l));
                out.push(Enc::Dummy(ix.family, l, if has_metric(ix.family) { false } else { ix.up }));
            }
        }
    }
}

fn tie_key(f: &Factor) -> (&'static str, usize) {
    (decl(f.sym).name, f.derivs.len())
}

/// Whether some slot pair declared trace-free is self-contracted.
fn trace_vanishes(f: &Factor) -> bool {
    let d = decl(f.sym);
    for &(i, j) in &d.symmetry.tracefree_pairs {
        if f.slots[i].key() == f.slots[j].key() {
            return true;
        }
    }
    false
}

/// Canonical form of one monomial; `None` if it vanishes by symmetry.
pub fn canonical_term(t: &Term) -> Option<Term> {
    if t.coeff.is_zero() {
        return None;
    }
    if t.factors.iter().any(trace_vanishes) {
        return None;
    }
    assert!(t.factors.len() <= 64, "monomial with more than 64 factors");
    let mut factors = t.factors.clone();
    factors.sort_by(|a, b| tie_key(a).cmp(&tie_key(b)));
    let free = t.free_indices();
    let free_rank: HashMap<_, _> = free.iter().enumerate().map(|(i, ix)| (ix.key(), i as u16)).collect();

    let m = factors.len();
    let mut states = vec![State { order: Vec::new(), used: 0, sign: 1, labels: Vec::new() }];
    for pos in 0..m {
        let tk = tie_key(&factors[pos]);
        let cands: Vec<usize> = (0..m).filter(|&j| tie_key(&factors[j]) == tk).collect();
        let mut best: Option<Vec<Enc>> = None;
        let mut next: Vec<State> = Vec::new();
        for st in &states {
            for &j in &cands {
                if st.used & (1 << j) != 0 {
                    continue;
                }
                let f = &factors[j];
                for (g, el) in decl(f.sym).group().iter().enumerate() {
                    let slots = permuted_slots(f, g);
                    let mut s2 = st.clone();
                    let mut enc = Vec::new();
                    encode(f, &slots, &mut s2, &free_rank, &mut enc);
                    let ord = match &best {
                        None => std::cmp::Ordering::Less,
                        Some(b) => enc.cmp(b),
                    };
                    if ord == std::cmp::Ordering::Greater {
                        continue;
                    }
                    if ord == std::cmp::Ordering::Less {
                        best = Some(enc);
                        next.clear();
                    }
                    s2.order.push((j, g));
                    s2.used |= 1 << j;
                    s2.sign *= el.sign;
                    next.push(s2);
                }
            }
        }
        // States agreeing on everything but the sign force the term to zero.
        let mut seen: HashMap<(u64, Vec<((IndexFamily, Name), u16)>), i8> = HashMap::new();
        let mut dedup = Vec::with_capacity(next.len());
        for s in next {
            let mut lab = s.labels.clone();
            lab.sort();
            match seen.get(&(s.used, lab.clone())) {
                Some(&sg) if sg != s.sign => return None,
                Some(_) => {}
                None => {
                    seen.insert((s.used, lab), s.sign);
                    dedup.push(s);
                }
            }
        }
        states = dedup;
    }
    let sign = states[0].sign;
    if states.iter().any(|s| s.sign != sign) {
        return None;
    }
    let st = &states[0];

    // rebuild with canonical dummy names
    let free_names: BTreeSet<Name> = free.iter().map(|i| i.name).collect();
    let mut label_name: Vec<Name> = Vec::with_capacity(st.labels.len());
    let mut taken = free_names.clone();
    for ((fam, _), _) in &st.labels {
        let n = dummy_name(*fam, &taken);
        taken.insert(n);
        label_name.push(n);
    }
    let lab: HashMap<(IndexFamily, Name), u16> = st.labels.iter().cloned().collect();
    let mut seen_once: Vec<bool> = vec![false; st.labels.len()];
    let mut out = Vec::with_capacity(m);
    for &(j, g) in &st.order {
        let f = &factors[j];
        let slots = permuted_slots(f, g);
        let mut relabel = |ix: &Index| -> Index {
            match lab.get(&ix.key()) {
                Some(&l) if !free_rank.contains_key(&ix.key()) => {
                    let first = !seen_once[l as usize];
                    seen_once[l as usize] = true;
                    Index {
                        family: ix.family,
                        name: label_name[l as usize],
                        up: if has_metric(ix.family) { !first } else { ix.up },
                    }
                }
                _ => *ix,
            }
        };
        let derivs: Vec<Index> = f.derivs.iter().map(&mut relabel).collect();
        let slots: Vec<Index> = slots.iter().map(&mut relabel).collect();
        out.push(Factor { sym: f.sym, derivs, slots });
    }
    let coeff = if sign < 0 { -&t.coeff } else { t.coeff.clone() };
    Some(Term { coeff, factors: out })
}

const SPACETIME_DUMMIES: [&str; 12] = ["i", "j", "k", "l", "m", "p", "q", "r", "s", "t", "u", "v"];
const TRACTOR_DUMMIES: [&str; 8] = ["I", "J", "K", "L", "M", "N", "Q", "R"];
const GAUGE_DUMMIES: [&str; 6] = ["G", "H", "K", "L", "M", "N"];

fn dummy_name(fam: IndexFamily, taken: &BTreeSet<Name>) -> Name {
    let (pool, base): (&[&str], &str) = match fam {
        IndexFamily::Spacetime => (&SPACETIME_DUMMIES, "i"),
        IndexFamily::Tractor => (&TRACTOR_DUMMIES, "I"),
        IndexFamily::Gauge => (&GAUGE_DUMMIES, "G"),
    };
    pool.iter()
        .map(|s| name(s))
        .chain((1..).map(|k| name(&format!("{base}{k}"))))
        .find(|n| !taken.contains(n))
        .unwrap()
}

/// Sums like terms (already canonical) and drops zeros; deterministic order.
pub fn collect(terms: Vec<Term>) -> Expr {
    let mut acc: HashMap<Vec<Factor>, Coeff> = HashMap::new();
    let mut order: Vec<Vec<Factor>> = Vec::new();
    for t in terms {
        match acc.get_mut(&t.factors) {
            Some(c) => *c = &*c + &t.coeff,
            None => {
                order.push(t.factors.clone());
                acc.insert(t.factors, t.coeff);
            }
        }
    }
    let mut terms: Vec<Term> = order
        .into_iter()
        .filter_map(|f| {
            let c = acc.remove(&f).unwrap();
            (!c.is_zero()).then_some(Term { coeff: c, factors: f })
        })
        .collect();
    terms.sort_by(term_order);
    Expr { terms }
}

/// Canonicalizes every term (after metric elimination) and collects.
pub fn canonicalize(e: &Expr) -> Expr {
    let e = metric_normalize(e);
    let terms: Vec<Term> = if e.terms.len() > 64 {
        e.terms.par_iter().filter_map(canonical_term).collect()
    } else {
        e.terms.iter().filter_map(canonical_term).collect()
    };
    collect(terms)
}

/// `canonicalize(e1 − e2) = 0`; errors on mismatched free indices or weight.
pub fn equivalent(e1: &Expr, e2: &Expr) -> Result<bool, String> {
    if !e1.is_zero() && !e2.is_zero() {
        let (f1, f2) = (e1.free_indices(), e2.free_indices());
        if f1 != f2 {
            return Err(format!("free indices differ: {f1:?} vs {f2:?}"));
        }
        if e1.weight_of().map_err(|e| e.to_string())? != e2.weight_of().map_err(|e| e.to_string())? {
            return Err("weights differ".into());
        }
    }
    Ok(canonicalize(&e1.sub(e2)).is_zero())
}

fn trace_value(role: Role) -> Coeff {
    match role {
        Role::Metric => Coeff::n(),
        _ => Coeff::n_plus(2),
    }
}

/// Locates the other occurrence of `ix`'s name outside factor `skip`.
fn find_partner(t: &Term, skip: usize, ix: &Index) -> Option<(usize, bool, usize)> {
    for (fi, f) in t.factors.iter().enumerate() {
        if fi == skip {
            continue;
        }
        for (k, d) in f.derivs.iter().enumerate() {
            if d.key() == ix.key() {
                return Some((fi, true, k));
            }
        }
        for (k, s) in f.slots.iter().enumerate() {
            if s.key() == ix.key() {
                return Some((fi, false, k));
            }
        }
    }
    None
}

fn set_index(t: &mut Term, at: (usize, bool, usize), ix: Index) {
    let f = &mut t.factors[at.0];
    if at.1 {
        f.derivs[at.2] = ix;
    } else {
        f.slots[at.2] = ix;
    }
}

/// One elimination step; `Err(())` means the term vanished.
fn metric_step(t: &mut Term) -> Result<bool, ()> {
    for fi in 0..t.factors.len() {
        let f = &t.factors[fi];
        let role = decl(f.sym).role;
        if !matches!(role, Role::Metric | Role::TractorMetric) {
            continue;
        }
        if !f.derivs.is_empty() {
            return Err(());
        }
        let (s0, s1) = (f.slots[0], f.slots[1]);
        if s0.key() == s1.key() {
            t.coeff = &t.coeff * &trace_value(role);
            t.factors.remove(fi);
            return Ok(true);
        }
        for (here, other) in [(s1, s0), (s0, s1)] {
            if let Some(at) = find_partner(t, fi, &here) {
                // a metric against another metric yields a Kronecker delta;
                // only eliminate when the result is not itself a bare delta
                set_index(t, at, other);
                t.factors.remove(fi);
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Splitting-operator contraction table: `Y·X = 1`, `Z_a·Z_c = g_ac`,
/// every other pair zero.
fn split_step(t: &mut Term) -> Result<bool, ()> {
    let is_split = |f: &Factor| {
        f.derivs.is_empty() && matches!(decl(f.sym).role, Role::SplitX | Role::SplitY | Role::SplitZ)
    };
    for i in 0..t.factors.len() {
        if !is_split(&t.factors[i]) {
            continue;
        }
        let ti = t.factors[i].slots[0];
        let Some((j, false, 0)) = find_partner(t, i, &ti) else { continue };
        if !is_split(&t.factors[j]) {
            continue;
        }
        let (ri, rj) = (decl(t.factors[i].sym).role, decl(t.factors[j].sym).role);
        match (ri, rj) {
            (Role::SplitX, Role::SplitY) | (Role::SplitY, Role::SplitX) => {
                let (a, b) = (i.max(j), i.min(j));
                t.factors.remove(a);
                t.factors.remove(b);
                return Ok(true);
            }
            (Role::SplitZ, Role::SplitZ) => {
                let g = Factor::new(
                    crate::symbols::sym("g"),
                    vec![t.factors[i].slots[1], t.factors[j].slots[1]],
                );
                let (a, b) = (i.max(j), i.min(j));
                t.factors.remove(a);
                t.factors[b] = g;
                return Ok(true);
            }
            _ => return Err(()),
        }
    }
    Ok(false)
}

/// Eliminates metrics, Kronecker deltas, tractor metrics and contracted
/// splitting-operator pairs.
pub fn metric_normalize_term(t: &Term) -> Option<Term> {
    let mut t = t.clone();
    loop {
        match metric_step(&mut t) {
            Err(()) => return None,
            Ok(true) => continue,
            Ok(false) => {}
        }
        match split_step(&mut t) {
            Err(()) => return None,
            Ok(true) => continue,
            Ok(false) => break,
        }
    }
    (!t.coeff.is_zero()).then_some(t)
}

pub fn metric_normalize(e: &Expr) -> Expr {
    Expr { terms: e.terms.iter().filter_map(metric_normalize_term).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::ex;
    use crate::print::to_text;

    fn canon(s: &str) -> String {
        to_text(&canonicalize(&ex(s)))
    }

    #[test]
    fn symmetric_against_antisymmetric() {
        assert_eq!(canon("C[a,b,c,d]*S[^a,^b]"), "0");
        assert_eq!(canon("P[a,b] - P[b,a]"), "0");
        assert_eq!(canon("A[a,b,c] + A[a,c,b]"), "0");
    }

    #[test]
    fn riemann_pair_symmetry() {
        assert!(equivalent(&ex("R[a,b,^c,d]"), &ex("-R[b,a,^c,d]")).unwrap());
        assert!(equivalent(&ex("C[a,b,c,d]"), &ex("C[c,d,a,b]")).unwrap());
        assert!(!equivalent(&ex("P[a,b]"), &ex("P[a,b] + J[]*g[a,b]")).unwrap());
    }

    #[test]
    fn dummy_renaming_and_variance() {
        let a = ex("nd[^c](A[a,c,b]) + P[^c,^d]*C[c,a,d,b]");
        let b = ex("nd[e](A[a,^e,b]) + P[x,y]*C[^x,a,^y,b]");
        assert!(equivalent(&a, &b).unwrap());
    }

    #[test]
    fn metric_elimination() {
        assert_eq!(canon("g[^a,^b]*g[b,c]"), "g[^a,c]");
        assert_eq!(canon("g[^a,^b]*g[a,b]"), "(n)");
        assert_eq!(canon("g[^a,^b]*P[a,b]"), "P[i,^i]");
        assert_eq!(canon("h[B,C]*Z[^B,a]*Z[^C,c]"), "g[a,c]");
        assert_eq!(canon("Y[B]*X[^B]"), "1");
        assert_eq!(canon("X[B]*X[^B]"), "0");
        assert_eq!(canon("Z[B,a]*Z[^B,c]*g[^a,^c]"), "(n)");
        assert_eq!(canon("nd[a](g[b,c])"), "0");
    }

    #[test]
    fn tracefree_slots() {
        assert_eq!(canon("C[a,b,^a,d]"), "0");
        assert_eq!(canon("A[a,^a,c]"), "0");
        assert_eq!(canon("B[a,^a]"), "0");
    }

    #[test]
    fn idempotent_on_examples() {
        for s in [
            "P[^c,^d]*C[c,a,d,b] + nd[^c](A[a,c,b])",
            "C[a,b,c,d]*C[^a,^b,^c,^d]*J[] - C[^a,^b,^c,^d]*C[a,b,c,d]*J[]",
            "Z[^D,^d]*Z[E,^e]*A[c,d,e] - X[^D]*Z[E,^e]*B[e,c] + X[E]*Z[^D,^e]*B[e,c]",
        ] {
            let once = canonicalize(&ex(s));
            assert_eq!(canonicalize(&once), once, "{s}");
        }
    }
}
