//! Truncated multivariate Taylor polynomials.
//!
//! Monomials are stored in graded order, so truncating to a lower degree is
//! taking a prefix. Products and partial derivatives go through tables
//! precomputed once per (variable count, degree).

use std::collections::HashMap;
use std::sync::Arc;

use super::scalar::Scalar;

#[derive(Debug)]
pub struct JetSpace {
    pub nv: usize,
    pub deg: usize,
    exps: Vec<Vec<u8>>,
    start: Vec<usize>,
    mono_deg: Vec<u8>,
    mul: Vec<Vec<u32>>,
    /// `deriv[v][k] = (source monomial, multiplicity)` for result monomial `k`.
    deriv: Vec<Vec<(u32, u32)>>,
}

impl JetSpace {
    pub fn new(nv: usize, deg: usize) -> Arc<JetSpace> {
        let mut exps: Vec<Vec<u8>> = Vec::new();
        let mut start = vec![0];
        for d in 0..=deg {
            let mut cur = vec![0u8; nv];
            gen_degree(nv, d, 0, &mut cur, &mut exps);
            start.push(exps.len());
        }
        let lookup: HashMap<Vec<u8>, usize> = exps.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        let mono_deg: Vec<u8> = exps.iter().map(|e| e.iter().sum()).collect();
        let mut mul = Vec::with_capacity(exps.len());
        for (i, ei) in exps.iter().enumerate() {
            let room = deg - mono_deg[i] as usize;
            let row: Vec<u32> = (0..start[room + 1])
                .map(|j| {
                    let s: Vec<u8> = ei.iter().zip(&exps[j]).map(|(a, b)| a + b).collect();
                    lookup[&s] as u32
                })
                .collect();
            mul.push(row);
        }
        let mut deriv = Vec::with_capacity(nv);
        for v in 0..nv {
            let count = if deg == 0 { 1 } else { start[deg] };
            let row: Vec<(u32, u32)> = (0..count)
                .map(|k| {
                    let mut e = exps[k].clone();
                    e[v] += 1;
                    match lookup.get(&e) {
                        Some(&src) => (src as u32, e[v] as u32),
                        None => (0, 0),
                    }
                })
                .collect();
            deriv.push(row);
        }
        Arc::new(JetSpace { nv, deg, exps, start, mono_deg, mul, deriv })
    }

    /// Number of monomials of degree ≤ d.
    pub fn count(&self, d: usize) -> usize {
        self.start[d + 1]
    }

    pub fn exponents(&self, k: usize) -> &[u8] {
        &self.exps[k]
    }

    pub fn index_of(&self, e: &[u8]) -> Option<usize> {
        let d: usize = e.iter().map(|&x| x as usize).sum();
        if d > self.deg {
            return None;
        }
        (self.start[d]..self.start[d + 1]).find(|&k| self.exps[k] == e)
    }

    pub fn constant<S: Scalar>(&self, v: S, d: usize) -> Jet<S> {
        let mut c = vec![S::zero(); self.count(d)];
        c[0] = v;
        Jet { c, d }
    }

    pub fn zero<S: Scalar>(&self, d: usize) -> Jet<S> {
        Jet { c: vec![S::zero(); self.count(d)], d }
    }

    /// The coordinate function `x0 + t_v`.
    pub fn variable<S: Scalar>(&self, v: usize, x0: S, d: usize) -> Jet<S> {
        let mut j = self.constant(x0, d);
        if d >= 1 {
            j.c[1 + v] = S::one();
        }
        j
    }

    pub fn truncate<S: Scalar>(&self, a: &Jet<S>, d: usize) -> Jet<S> {
        assert!(d <= a.d, "cannot raise jet degree {} to {}", a.d, d);
        Jet { c: a.c[..self.count(d)].to_vec(), d }
    }

    pub fn add<S: Scalar>(&self, a: &Jet<S>, b: &Jet<S>) -> Jet<S> {
        let d = a.d.min(b.d);
        Jet { c: (0..self.count(d)).map(|k| a.c[k].add(&b.c[k])).collect(), d }
    }

    pub fn sub<S: Scalar>(&self, a: &Jet<S>, b: &Jet<S>) -> Jet<S> {
        let d = a.d.min(b.d);
        Jet { c: (0..self.count(d)).map(|k| a.c[k].sub(&b.c[k])).collect(), d }
    }

    /// `acc += a * b` at `acc`'s degree.
    pub fn fma<S: Scalar>(&self, acc: &mut Jet<S>, a: &Jet<S>, b: &Jet<S>) {
        let d = acc.d;
        assert!(a.d >= d && b.d >= d, "fma degree mismatch");
        for i in 0..self.count(d) {
            let ai = &a.c[i];
            if ai.is_zero() {
                continue;
            }
            let room = d - self.mono_deg[i] as usize;
            let row = &self.mul[i];
            for j in 0..self.count(room) {
                let bj = &b.c[j];
                if bj.is_zero() {
                    continue;
                }
                acc.c[row[j] as usize].fma(ai, bj);
            }
        }
    }

    pub fn mul<S: Scalar>(&self, a: &Jet<S>, b: &Jet<S>) -> Jet<S> {
        let mut out = self.zero(a.d.min(b.d));
        self.fma(&mut out, a, b);
        out
    }

    pub fn scale<S: Scalar>(&self, a: &Jet<S>, s: &S) -> Jet<S> {
        Jet { c: a.c.iter().map(|x| x.mul(s)).collect(), d: a.d }
    }

    pub fn neg<S: Scalar>(&self, a: &Jet<S>) -> Jet<S> {
        Jet { c: a.c.iter().map(Scalar::neg).collect(), d: a.d }
    }

    /// `∂/∂x_v`, one degree lower.
    pub fn deriv<S: Scalar>(&self, a: &Jet<S>, v: usize) -> Jet<S> {
        assert!(a.d >= 1, "derivative of a degree-0 jet");
        let d = a.d - 1;
        let row = &self.deriv[v];
        let c = (0..self.count(d))
            .map(|k| {
                let (src, m) = row[k];
                a.c[src as usize].scale_i64(m as i64)
            })
            .collect();
        Jet { c, d }
    }

    /// `Σ_m coef[m] u^m` for `u` without constant term.
    fn series<S: Scalar>(&self, u: &Jet<S>, coef: &[S]) -> Jet<S> {
        let d = u.d;
        let mut out = self.constant(coef[0].clone(), d);
        let mut pow = self.constant(S::one(), d);
        for c in coef.iter().take(d + 1).skip(1) {
            pow = self.mul(&pow, u);
            for (o, p) in out.c.iter_mut().zip(&pow.c) {
                o.fma(p, c);
            }
        }
        out
    }

    fn split<S: Scalar>(&self, a: &Jet<S>) -> (S, Jet<S>) {
        let mut u = a.clone();
        let a0 = std::mem::replace(&mut u.c[0], S::zero());
        (a0, u)
    }

    pub fn inv<S: Scalar>(&self, a: &Jet<S>) -> Option<Jet<S>> {
        let (a0, u) = self.split(a);
        let r = a0.inv()?;
        let u = self.scale(&u, &r);
        let coef: Vec<S> = (0..=a.d).map(|m| if m % 2 == 0 { r.clone() } else { r.neg() }).collect();
        Some(self.series(&u, &coef))
    }

    fn inv_factorials<S: Scalar>(d: usize) -> Vec<S> {
        let mut out = vec![S::one()];
        let mut f = S::one();
        for m in 1..=d {
            f = f.mul(&S::from_i64(m as i64));
            out.push(f.inv().expect("factorial invertible"));
        }
        out
    }

    pub fn exp<S: Scalar>(&self, a: &Jet<S>) -> Option<Jet<S>> {
        let (a0, u) = self.split(a);
        let e0 = a0.exp()?;
        let coef: Vec<S> = Self::inv_factorials::<S>(a.d).into_iter().map(|c| c.mul(&e0)).collect();
        Some(self.series(&u, &coef))
    }

    fn sin_cos_series<S: Scalar>(&self, u: &Jet<S>) -> (Jet<S>, Jet<S>) {
        let f = Self::inv_factorials::<S>(u.d);
        let sin: Vec<S> = (0..=u.d)
            .map(|m| match m % 4 {
                1 => f[m].clone(),
                3 => f[m].neg(),
                _ => S::zero(),
            })
            .collect();
        let cos: Vec<S> = (0..=u.d)
            .map(|m| match m % 4 {
                0 => f[m].clone(),
                2 => f[m].neg(),
                _ => S::zero(),
            })
            .collect();
        (self.series(u, &sin), self.series(u, &cos))
    }

    pub fn sin<S: Scalar>(&self, a: &Jet<S>) -> Option<Jet<S>> {
        let (a0, u) = self.split(a);
        let (s0, c0) = (a0.sin()?, a0.cos()?);
        let (su, cu) = self.sin_cos_series(&u);
        Some(self.add(&self.scale(&cu, &s0), &self.scale(&su, &c0)))
    }

    pub fn cos<S: Scalar>(&self, a: &Jet<S>) -> Option<Jet<S>> {
        let (a0, u) = self.split(a);
        let (s0, c0) = (a0.sin()?, a0.cos()?);
        let (su, cu) = self.sin_cos_series(&u);
        Some(self.sub(&self.scale(&cu, &c0), &self.scale(&su, &s0)))
    }

    pub fn powi<S: Scalar>(&self, a: &Jet<S>, k: u32) -> Jet<S> {
        let mut out = self.constant(S::one(), a.d);
        for _ in 0..k {
            out = self.mul(&out, a);
        }
        out
    }
}

fn gen_degree(nv: usize, d: usize, v: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
    if v == nv - 1 {
        cur[v] = d as u8;
        out.push(cur.clone());
        cur[v] = 0;
        return;
    }
    for k in (0..=d).rev() {
        cur[v] = k as u8;
        gen_degree(nv, d - k, v + 1, cur, out);
    }
    cur[v] = 0;
}

/// Taylor coefficients through degree `d` (coefficient, not derivative,
/// normalization).
#[derive(Clone, Debug, PartialEq)]
pub struct Jet<S> {
    pub c: Vec<S>,
    pub d: usize,
}

impl<S: Scalar> Jet<S> {
    pub fn value(&self) -> &S {
        &self.c[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::scalar::ModP;

    #[test]
    fn graded_prefix_and_counts() {
        let sp = JetSpace::new(6, 7);
        assert_eq!(sp.count(7), 1716);
        assert_eq!(sp.count(0), 1);
        assert_eq!(sp.exponents(1), &[1, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn exp_log_identity_in_float() {
        let sp = JetSpace::new(2, 6);
        let x = sp.variable(0, 0.3f64, 6);
        let y = sp.variable(1, -0.2f64, 6);
        let u = sp.add(&sp.mul(&x, &y), &x);
        let e = sp.exp(&u).unwrap();
        let ei = sp.exp(&sp.neg(&u)).unwrap();
        let one = sp.mul(&e, &ei);
        assert!((one.c[0] - 1.0).abs() < 1e-14);
        assert!(one.c[1..].iter().all(|c| c.abs() < 1e-13));
        let s = sp.sin(&u).unwrap();
        let c = sp.cos(&u).unwrap();
        let p = sp.add(&sp.mul(&s, &s), &sp.mul(&c, &c));
        assert!((p.c[0] - 1.0).abs() < 1e-14 && p.c[1..].iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn inverse_is_exact_mod_p() {
        let sp = JetSpace::new(3, 5);
        let x = sp.variable(0, ModP::from_i64(2), 5);
        let y = sp.variable(2, ModP::from_i64(-3), 5);
        let a = sp.add(&sp.mul(&x, &y), &sp.mul(&x, &x));
        let b = sp.inv(&a).unwrap();
        let one = sp.mul(&a, &b);
        assert_eq!(one.c[0], ModP(1));
        assert!(one.c[1..].iter().all(|c| c.0 == 0));
    }
}
