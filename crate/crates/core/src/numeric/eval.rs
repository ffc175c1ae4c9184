//! Component evaluation of symbolic expressions at a point.

use super::geometry::{for_each_index, strides, Axis, GeomError, Geometry};
use super::scalar::Scalar;
use crate::expr::{Expr, Index, Name, Term};
use crate::symbols::{decl, IndexFamily};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error("coefficient {0} has a pole in this dimension")]
    Pole(String),
    #[error("gauge index {0} is written against its natural position")]
    GaugeVariance(String),
    #[error("expression is invalid: {0}")]
    Invalid(String),
}

type Label = (IndexFamily, Name);

/// Component values with one label per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Values<S> {
    pub labels: Vec<Label>,
    pub axes: Vec<Axis>,
    pub dims: Vec<usize>,
    pub data: Vec<S>,
}

impl<S: Scalar> Values<S> {
    fn scalar(v: S) -> Self {
        Values { labels: vec![], axes: vec![], dims: vec![], data: vec![v] }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.to_f64().abs()).fold(0.0, f64::max)
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    pub fn sub(&self, o: &Values<S>) -> Values<S> {
        assert_eq!(self.dims, o.dims);
        Values { data: self.data.iter().zip(&o.data).map(|(a, b)| a.sub(b)).collect(), ..self.clone() }
    }

    /// `t'[..i..] = Σ_j m[i][j] t[..j..]` on axis `q`.
    fn apply(&self, q: usize, m: &[Vec<S>]) -> Values<S> {
        let st = strides(&self.dims);
        let mut out = vec![S::zero(); self.data.len()];
        for (o, v) in out.iter_mut().enumerate() {
            let i = (o / st[q]) % self.dims[q];
            let base = o - i * st[q];
            for (j, mij) in m[i].iter().enumerate() {
                if !mij.is_zero() {
                    v.fma(mij, &self.data[base + j * st[q]]);
                }
            }
        }
        Values { data: out, ..self.clone() }
    }

    /// Trace over axes `p < q`.
    fn trace(&self, p: usize, q: usize) -> Values<S> {
        let st = strides(&self.dims);
        let keep: Vec<usize> = (0..self.dims.len()).filter(|&k| k != p && k != q).collect();
        let dims: Vec<usize> = keep.iter().map(|&k| self.dims[k]).collect();
        let mut data = Vec::with_capacity(dims.iter().product());
        for_each_index(&dims, |ix| {
            let off: usize = ix.iter().zip(&keep).map(|(&i, &k)| i * st[k]).sum();
            let mut acc = S::zero();
            for x in 0..self.dims[p] {
                acc.add_assign(&self.data[off + x * (st[p] + st[q])]);
            }
            data.push(acc);
        });
        Values {
            labels: keep.iter().map(|&k| self.labels[k]).collect(),
            axes: keep.iter().map(|&k| self.axes[k]).collect(),
            dims,
            data,
        }
    }

    fn permuted(&self, order: &[usize]) -> Values<S> {
        let st = strides(&self.dims);
        let dims: Vec<usize> = order.iter().map(|&k| self.dims[k]).collect();
        let mut data = Vec::with_capacity(self.data.len());
        for_each_index(&dims, |ix| {
            let off: usize = ix.iter().zip(order).map(|(&i, &k)| i * st[k]).sum();
            data.push(self.data[off].clone());
        });
        Values {
            labels: order.iter().map(|&k| self.labels[k]).collect(),
            axes: order.iter().map(|&k| self.axes[k]).collect(),
            dims,
            data,
        }
    }
}

/// Σ over shared labels of `a ⊗ b`; `b` must already be in dual variance on
/// the shared axes.
fn contract<S: Scalar>(a: &Values<S>, b: &Values<S>) -> Values<S> {
    let pairs: Vec<(usize, usize)> = a
        .labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| b.labels.iter().position(|m| m == l).map(|j| (i, j)))
        .collect();
    let fa: Vec<usize> = (0..a.labels.len()).filter(|i| !pairs.iter().any(|p| p.0 == *i)).collect();
    let fb: Vec<usize> = (0..b.labels.len()).filter(|j| !pairs.iter().any(|p| p.1 == *j)).collect();
    let (sa, sb) = (strides(&a.dims), strides(&b.dims));
    let sdims: Vec<usize> = pairs.iter().map(|p| a.dims[p.0]).collect();
    let shared_offsets: Vec<(usize, usize)> = {
        let mut v = Vec::new();
        for_each_index(&sdims, |ix| {
            let oa: usize = ix.iter().zip(&pairs).map(|(&x, p)| x * sa[p.0]).sum();
            let ob: usize = ix.iter().zip(&pairs).map(|(&x, p)| x * sb[p.1]).sum();
            v.push((oa, ob));
        });
        v
    };
    let mut dims: Vec<usize> = fa.iter().map(|&i| a.dims[i]).collect();
    dims.extend(fb.iter().map(|&j| b.dims[j]));
    let mut data = Vec::with_capacity(dims.iter().product());
    for_each_index(&dims, |ix| {
        let (ia, ib) = ix.split_at(fa.len());
        let oa: usize = ia.iter().zip(&fa).map(|(&x, &k)| x * sa[k]).sum();
        let ob: usize = ib.iter().zip(&fb).map(|(&x, &k)| x * sb[k]).sum();
        let mut acc = S::zero();
        for &(pa, pb) in &shared_offsets {
            let (x, y) = (&a.data[oa + pa], &b.data[ob + pb]);
            if !x.is_zero() {
                acc.fma(x, y);
            }
        }
        data.push(acc);
    });
    let mut labels: Vec<Label> = fa.iter().map(|&i| a.labels[i]).collect();
    labels.extend(fb.iter().map(|&j| b.labels[j]));
    let mut axes: Vec<Axis> = fa.iter().map(|&i| a.axes[i]).collect();
    axes.extend(fb.iter().map(|&j| b.axes[j]));
    Values { labels, axes, dims, data }
}

pub struct Evaluator<'g, S: Scalar> {
    pub geo: &'g mut Geometry<S>,
    ginv: Vec<Vec<S>>,
    hlow: Vec<Vec<S>>,
}

impl<'g, S: Scalar> Evaluator<'g, S> {
    pub fn new(geo: &'g mut Geometry<S>) -> Self {
        let ginv = geo.ginv_values();
        let hlow = geo.h_lower_values();
        Evaluator { geo, ginv, hlow }
    }

    /// Turns axis `q` into the dual of its storage variance.
    fn dualize(&self, v: &Values<S>, q: usize) -> Values<S> {
        match v.axes[q] {
            Axis::Space => v.apply(q, &self.ginv),
            Axis::Tractor => v.apply(q, &self.hlow),
            _ => v.clone(),
        }
    }

    fn factor_values(&mut self, f: &crate::expr::Factor) -> Result<Values<S>, EvalError> {
        let d = decl(f.sym);
        for (ix, &(fam, up)) in f.slots.iter().zip(&d.slots) {
            if fam == IndexFamily::Gauge && ix.up != up {
                return Err(EvalError::GaugeVariance(ix.to_string()));
            }
        }
        let (axes, dims, data) = self.geo.derivative_values(f.sym, f.derivs.len())?;
        let labels: Vec<Label> = f.derivs.iter().chain(&f.slots).map(Index::key).collect();
        let mut v = Values { labels, axes, dims, data };
        // internal traces
        loop {
            let rep = (0..v.labels.len()).find_map(|p| (p + 1..v.labels.len()).find(|&q| v.labels[q] == v.labels[p]).map(|q| (p, q)));
            let Some((p, q)) = rep else { break };
            v = self.dualize(&v, q).trace(p, q);
        }
        Ok(v)
    }

    fn term_values(&mut self, t: &Term, free: &[Index]) -> Result<Values<S>, EvalError> {
        let c = t.coeff.specialize_int(self.geo.n as i64).map_err(|e| EvalError::Pole(e.coeff))?;
        let r = c.as_rational().ok_or_else(|| EvalError::Pole(c.to_string()))?;
        let mut acc = Values::scalar(S::from_rational(&r));
        for f in &t.factors {
            let mut fv = self.factor_values(f)?;
            for q in 0..fv.labels.len() {
                if acc.labels.contains(&fv.labels[q]) {
                    fv = self.dualize(&fv, q);
                }
            }
            acc = contract(&acc, &fv);
        }
        let order: Vec<usize> = free
            .iter()
            .map(|ix| acc.labels.iter().position(|l| *l == ix.key()).ok_or_else(|| EvalError::Invalid(format!("free index {ix} missing"))))
            .collect::<Result<_, _>>()?;
        Ok(acc.permuted(&order))
    }

    /// Components of `e` with free indices in sorted order, each in storage
    /// variance (spacetime down, tractor up, gauge natural).
    pub fn eval(&mut self, e: &Expr) -> Result<Values<S>, EvalError> {
        e.ensure_valid().map_err(|x| EvalError::Invalid(x.to_string()))?;
        let free = e.free_indices();
        let mut total: Option<Values<S>> = None;
        for t in &e.terms {
            let v = self.term_values(t, &free)?;
            total = Some(match total {
                None => v,
                Some(mut acc) => {
                    for (a, b) in acc.data.iter_mut().zip(&v.data) {
                        a.add_assign(b);
                    }
                    acc
                }
            });
        }
        match total {
            Some(v) => Ok(v),
            None => {
                // zero expression: shape from free indices
                let dims: Vec<usize> = free
                    .iter()
                    .map(|ix| match ix.family {
                        IndexFamily::Spacetime => self.geo.n,
                        IndexFamily::Tractor => self.geo.n + 2,
                        IndexFamily::Gauge => self.geo.rank,
                    })
                    .collect();
                let len = dims.iter().product();
                Ok(Values {
                    labels: free.iter().map(Index::key).collect(),
                    axes: vec![Axis::Space; dims.len()],
                    dims,
                    data: vec![S::zero(); len],
                })
            }
        }
    }

    pub fn eval_scalar(&mut self, e: &Expr) -> Result<S, EvalError> {
        let v = self.eval(e)?;
        if !v.labels.is_empty() {
            return Err(EvalError::Invalid("expression has free indices".into()));
        }
        Ok(v.data[0].clone())
    }
}

/// Largest order of derivative of the metric that the symbol's value needs.
pub fn metric_order(name: &str) -> usize {
    match name {
        "R" | "Ric" | "Sc" | "P" | "J" | "C" => 2,
        "A" | "Omega" => 3,
        "B" => 4,
        "F" => 1,
        _ => 0,
    }
}

/// Jet degree needed to evaluate every factor of `e`.
pub fn required_degree(e: &Expr) -> usize {
    e.terms
        .iter()
        .flat_map(|t| &t.factors)
        .map(|f| metric_order(decl(f.sym).name) + f.derivs.len())
        .max()
        .unwrap_or(0)
        .max(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::scalar::ModP;
    use crate::numeric::spec::random_polynomial_metric;
    use crate::parse::ex;

    fn geo(n: usize, deg: usize, seed: u64) -> Geometry<ModP> {
        let m = random_polynomial_metric(n, 3, seed).compile().unwrap();
        let x0: Vec<ModP> = (0..n).map(|k| ModP::from_i64(k as i64 % 3 - 1)).collect();
        Geometry::new(&m, &x0, deg, seed).unwrap()
    }

    #[test]
    fn contracted_bianchi_identities() {
        let mut g = geo(5, 5, 3);
        let mut ev = Evaluator::new(&mut g);
        for zero in [
            "nd[^a](P[a,b]) - nd[b](J[])",
            "nd[^a](C[a,b,c,d]) - (n - 3)*A[b,c,d]",
            "nd[^a](A[a,b,c])",
            "C[a,b,^a,d]",
            "A[a,b,c] + A[b,c,a] + A[c,a,b]",
            "C[a,b,c,d] + C[a,c,d,b] + C[a,d,b,c]",
            "nd[e](C[a,b,c,d]) + nd[c](C[a,b,d,e]) + nd[d](C[a,b,e,c]) - g[c,b]*A[a,e,d] - g[d,b]*A[a,c,e] - g[e,b]*A[a,d,c] + g[c,a]*A[b,e,d] + g[d,a]*A[b,c,e] + g[e,a]*A[b,d,c]",
            "B[a,^a]",
            "B[a,b] - B[b,a]",
        ] {
            assert!(ev.eval(&ex(zero)).unwrap().is_zero(), "{zero}");
        }
    }

    #[test]
    fn bach_divergence_in_general_dimension() {
        // ∇^b B_ab = (n − 4) P^bc A_cab
        for n in [4, 5, 6] {
            let mut g = geo(n, 6, 9);
            let mut ev = Evaluator::new(&mut g);
            let l = ev.eval(&ex("nd[^b](B[a,b])")).unwrap();
            let r = ev.eval(&ex("(n - 4)*P[^b,^c]*A[c,a,b]")).unwrap();
            assert!(l.sub(&r).is_zero(), "n = {n}");
            assert_eq!(l.is_zero(), n == 4);
        }
    }

    #[test]
    fn tractor_curvature_in_splitting() {
        let mut g = geo(4, 5, 5);
        let mut ev = Evaluator::new(&mut g);
        let om = ev.eval(&ex("Omega[a,b,^D,E]")).unwrap();
        let split = ev
            .eval(&ex("Z[^D,^c]*Z[E,^e]*C[a,b,c,e] - X[^D]*Z[E,^e]*A[e,a,b] + X[E]*Z[^D,^e]*A[e,a,b]"))
            .unwrap();
        assert!(om.sub(&split).is_zero());
    }
}
