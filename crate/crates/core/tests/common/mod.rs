//! Shared generators and property checks for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use confym_core::canon::{canonical_term, canonicalize};
use confym_core::numeric::eval::{required_degree, Evaluator};
use confym_core::numeric::geometry::Geometry;
use confym_core::numeric::scalar::rational;
use confym_core::numeric::spec::{random_polynomial_gauge, random_polynomial_metric, random_polynomial_scalar};
use confym_core::parse::ex;
use confym_core::rules::Rule;
use num_rational::BigRational;
use confym_core::coeff::Coeff;
use confym_core::expr::{name, Expr, Factor, Index, Name, Term};
use confym_core::symbols::{decl, sym, IndexFamily};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POOL: [&str; 12] = ["C", "R", "A", "P", "B", "T", "W", "S", "F", "om", "Z", "J"];

/// Random valid monomial with at most `max_rank` index positions.
pub fn random_monomial(rng: &mut ChaCha8Rng, max_factors: usize, max_rank: usize) -> Term {
    let nf = rng.gen_range(1..=max_factors);
    let mut shapes: Vec<(confym_core::symbols::SymbolId, usize)> = Vec::new();
    let mut rank = 0;
    for _ in 0..nf {
        let s = sym(POOL.choose(rng).unwrap());
        let nd = rng.gen_range(0..=2usize);
        let r = decl(s).rank() + nd;
        if rank + r > max_rank {
            continue;
        }
        rank += r;
        shapes.push((s, nd));
    }
    if shapes.is_empty() {
        shapes.push((sym("P"), 0));
    }
    // positions: (factor, is_deriv, k, family, natural_up)
    let mut pos = Vec::new();
    for (fi, &(s, nd)) in shapes.iter().enumerate() {
        for k in 0..nd {
            pos.push((fi, true, k, IndexFamily::Spacetime, false));
        }
        for (k, &(fam, up)) in decl(s).slots.iter().enumerate() {
            pos.push((fi, false, k, fam, up));
        }
    }
    pos.shuffle(rng);
    let mut assigned: Vec<Option<Index>> = vec![None; pos.len()];
    let mut counter = 0;
    for i in 0..pos.len() {
        if assigned[i].is_some() {
            continue;
        }
        let fam = pos[i].3;
        let partner = (i + 1..pos.len()).find(|&j| {
            assigned[j].is_none()
                && pos[j].3 == fam
                && (fam != IndexFamily::Gauge || pos[j].4 != pos[i].4)
        });
        let nm = match fam {
            IndexFamily::Spacetime => format!("x{counter}"),
            IndexFamily::Tractor => format!("X{counter}"),
            IndexFamily::Gauge => format!("G{counter}"),
        };
        counter += 1;
        let up_i = if fam == IndexFamily::Gauge { pos[i].4 } else { rng.gen() };
        match partner {
            Some(j) if rng.gen_bool(0.6) => {
                assigned[i] = Some(Index::new(fam, &nm, up_i));
                assigned[j] = Some(Index::new(fam, &nm, !up_i));
            }
            _ => assigned[i] = Some(Index::new(fam, &nm, up_i)),
        }
    }
    let mut factors: Vec<Factor> = shapes
        .iter()
        .map(|&(s, nd)| Factor {
            sym: s,
            derivs: vec![Index::new(IndexFamily::Spacetime, "z", false); nd],
            slots: vec![Index::new(IndexFamily::Spacetime, "z", false); decl(s).rank()],
        })
        .collect();
    for (p, ix) in pos.iter().zip(assigned) {
        let ix = ix.unwrap();
        if p.1 {
            factors[p.0].derivs[p.2] = ix;
        } else {
            factors[p.0].slots[p.2] = ix;
        }
    }
    Term::new(Coeff::one(), factors)
}

/// A random image under factor reordering, slot symmetries, dummy renaming
/// and dummy variance flips; returns the image and its sign.
pub fn random_image(rng: &mut ChaCha8Rng, t: &Term) -> (Term, i8) {
    let mut sign = 1;
    let mut factors: Vec<Factor> = t
        .factors
        .iter()
        .map(|f| {
            let g = decl(f.sym).group().choose(rng).unwrap();
            sign *= g.sign;
            Factor {
                sym: f.sym,
                derivs: f.derivs.clone(),
                slots: g.perm.iter().map(|&p| f.slots[p as usize]).collect(),
            }
        })
        .collect();
    factors.shuffle(rng);
    let mut out = Term::new(Coeff::one(), factors);
    let dummies = out.dummies();
    let mut map = HashMap::new();
    let mut flip = BTreeSet::new();
    for (i, key) in dummies.iter().enumerate() {
        map.insert(*key, name(&format!("{}{i}", if key.0 == IndexFamily::Spacetime { "w" } else { "W" })));
        if key.0 != IndexFamily::Gauge && rng.gen() {
            flip.insert(key.1);
        }
    }
    for f in &mut out.factors {
        for ix in f.derivs.iter_mut().chain(f.slots.iter_mut()) {
            if flip.contains(&ix.name) {
                ix.up = !ix.up;
            }
        }
    }
    out.rename(&map);
    (out, sign)
}

/// All signs `s` with `a = s·b` reachable by brute force.
pub fn brute_signs(a: &Term, b: &Term) -> BTreeSet<i8> {
    let mut out = BTreeSet::new();
    if a.factors.len() != b.factors.len() {
        return out;
    }
    let n = a.factors.len();
    let mut perm: Vec<usize> = (0..n).collect();
    let free_a: BTreeSet<Index> = a.free_indices().into_iter().collect();
    let free_b: BTreeSet<Index> = b.free_indices().into_iter().collect();
    if free_a != free_b {
        return out;
    }
    permute(&mut perm, 0, &mut |p| {
        if p.iter().enumerate().any(|(i, &j)| a.factors[j].sym != b.factors[i].sym || a.factors[j].derivs.len() != b.factors[i].derivs.len()) {
            return;
        }
        let sizes: Vec<usize> = p.iter().map(|&j| decl(a.factors[j].sym).group().len()).collect();
        let total: usize = sizes.iter().product();
        for mut code in 0..total {
            let mut sign = 1;
            let mut map: HashMap<(IndexFamily, Name), Name> = HashMap::new();
            let mut rev: HashMap<(IndexFamily, Name), Name> = HashMap::new();
            let mut ok = true;
            'f: for (i, &j) in p.iter().enumerate() {
                let fa = &a.factors[j];
                let g = &decl(fa.sym).group()[code % sizes[i]];
                code /= sizes[i];
                sign *= g.sign;
                let slots: Vec<Index> = g.perm.iter().map(|&q| fa.slots[q as usize]).collect();
                let fb = &b.factors[i];
                for (x, y) in fa.derivs.iter().chain(slots.iter()).zip(fb.derivs.iter().chain(fb.slots.iter())) {
                    if x.family != y.family {
                        ok = false;
                        break 'f;
                    }
                    let xf = free_a.contains(x);
                    let yf = free_b.contains(y);
                    if xf != yf {
                        ok = false;
                        break 'f;
                    }
                    if xf {
                        if x != y {
                            ok = false;
                            break 'f;
                        }
                        continue;
                    }
                    if x.family == IndexFamily::Gauge && x.up != y.up {
                        ok = false;
                        break 'f;
                    }
                    let e = map.entry(x.key()).or_insert(y.name);
                    let r = rev.entry(y.key()).or_insert(x.name);
                    if *e != y.name || *r != x.name {
                        ok = false;
                        break 'f;
                    }
                }
            }
            if ok {
                out.insert(sign);
            }
        }
    });
    out
}

fn permute(p: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        f(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, f);
        p.swap(k, i);
    }
}

pub fn has_vanishing_trace(t: &Term) -> bool {
    t.factors.iter().any(|f| {
        decl(f.sym)
            .symmetry
            .tracefree_pairs
            .iter()
            .any(|&(i, j)| f.slots[i].name == f.slots[j].name)
    })
}

pub fn key(t: &Option<Term>) -> Option<Vec<Factor>> {
    t.as_ref().map(|t| t.factors.clone())
}

/// A random monomial and a random symmetry image have the same canonical
/// form, up to the tracked sign.
pub fn images_share_canonical_form(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = random_monomial(&mut rng, 4, 12);
    let (img, sign) = random_image(&mut rng, &t);
    let ct = canonical_term(&t);
    let ci = canonical_term(&img);
    if key(&ct) != key(&ci) {
        return Err(format!("seed {seed}: different canonical factors"));
    }
    if let (Some(a), Some(b)) = (ct, ci) {
        let expect = if sign > 0 { a.coeff.clone() } else { -&a.coeff };
        if expect != b.coeff {
            return Err(format!("seed {seed}: sign mismatch"));
        }
    }
    Ok(())
}

/// Canonical equality agrees with a brute-force search over factor orders
/// and slot symmetries.
pub fn brute_force_agrees(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = random_monomial(&mut rng, 3, 12);
    let b = loop {
        let b = random_monomial(&mut rng, 3, 12);
        if rng.gen_bool(0.5) || b.factors.len() == a.factors.len() {
            break b;
        }
    };
    let b = if rng.gen_bool(0.4) { random_image(&mut rng, &a).0 } else { b };
    let self_signs = brute_signs(&a, &a);
    let a_zero = self_signs.contains(&-1) || has_vanishing_trace(&a);
    if canonical_term(&a).is_none() != a_zero {
        return Err(format!("seed {seed}: vanishing disagrees with brute force"));
    }
    if a_zero {
        return Ok(());
    }
    let signs = brute_signs(&a, &b);
    let ok = match (canonical_term(&a), canonical_term(&b)) {
        (Some(x), Some(y)) => {
            let same = x.factors == y.factors;
            let s: i8 = if x.coeff == y.coeff { 1 } else { -1 };
            same == !signs.is_empty() && (!same || signs.contains(&s))
        }
        (None, None) => true,
        (Some(_), None) => signs.is_empty(),
        (None, Some(_)) => false,
    };
    if ok {
        Ok(())
    } else {
        Err(format!("seed {seed}: equality disagrees with brute force"))
    }
}

pub fn canonicalize_is_idempotent(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Expr::zero();
    let base = random_monomial(&mut rng, 3, 12);
    e.push(base.clone());
    for k in 0..3 {
        let (img, _) = random_image(&mut rng, &base);
        e.push(img.scaled(&Coeff::int(k + 2)));
    }
    let once = canonicalize(&e);
    if canonicalize(&once) == once {
        Ok(())
    } else {
        Err(format!("seed {seed}: not idempotent"))
    }
}

/// Pattern and replacement agree exactly on three random rational metrics
/// (with gauge potential and conformal factor) at three points each.
pub fn rule_is_sound(rule: &Rule, n: usize) -> Result<(), String> {
    let e = ex(&rule.pattern).sub(&ex(&rule.replacement)).specialize(n as i64);
    let deg = required_degree(&e);
    for seed in [1u64, 2, 3] {
        let mut spec = random_polynomial_metric(n, 2, seed);
        spec.gauge = Some(random_polynomial_gauge(n, 2, seed + 10));
        spec.conformal_factor = Some(random_polynomial_scalar(n, seed + 20));
        let c = spec.compile().map_err(|e| e.to_string())?;
        for p in 0..3i64 {
            let x0: Vec<BigRational> = (0..n as i64).map(|k| rational((k + p) % 3 - 1, 1 + p)).collect();
            let mut g = Geometry::new(&c, &x0, deg, seed).map_err(|e| e.to_string())?;
            let v = Evaluator::new(&mut g).eval(&e).map_err(|e| e.to_string())?;
            if !v.is_zero() {
                return Err(format!("{}/{} fails at seed {seed}, point {p}", rule.group, rule.name));
            }
        }
    }
    Ok(())
}
