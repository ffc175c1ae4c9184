//! Curvature, tractor and gauge data of an explicit metric as jets at a point,
//! and covariant-derivative towers of every built-in symbol.
//!
//! Storage variance: spacetime indices down, tractor indices up, gauge
//! indices as declared. The tractor frame is (σ, μ_c, ρ): component 0 is σ,
//! components 1..=n are μ_c, component n+1 is ρ, so `X = e_ρ`, `Y = e_σ` and
//! `Z^B_c = g_cd` in slot μ_d.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::jet::{Jet, JetSpace};
use super::scalar::Scalar;
use super::spec::{Compiled, SpecError};
use crate::symbols::{decl, sym, IndexFamily, SymbolId};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeomError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("metric is degenerate at the evaluation point")]
    Degenerate,
    #[error("{sym} needs {need} derivatives but only {have} are available at this jet degree")]
    JetDegree { sym: String, need: usize, have: usize },
    #[error("{0} requires a {1} in the metric spec")]
    NeedsData(String, &'static str),
    #[error("dimension {0} is not supported (need n ≥ 3)")]
    Dimension(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    Space,
    Tractor,
    GaugeUp,
    GaugeDown,
}

/// A tensor whose components are jets of a common degree; row-major.
#[derive(Clone, Debug)]
pub struct TJet<S> {
    pub axes: Vec<Axis>,
    pub dims: Vec<usize>,
    pub d: usize,
    pub data: Vec<Jet<S>>,
}

impl<S: Scalar> TJet<S> {
    pub fn zeros(sp: &JetSpace, axes: Vec<Axis>, dims: Vec<usize>, d: usize) -> Self {
        let len = dims.iter().product();
        TJet { axes, dims, d, data: vec![sp.zero(d); len] }
    }

    pub fn strides(&self) -> Vec<usize> {
        strides(&self.dims)
    }

    pub fn at(&self, ix: &[usize]) -> &Jet<S> {
        &self.data[offset(&self.dims, ix)]
    }

    pub fn at_mut(&mut self, ix: &[usize]) -> &mut Jet<S> {
        let o = offset(&self.dims, ix);
        &mut self.data[o]
    }

    pub fn truncate(&self, sp: &JetSpace, d: usize) -> Self {
        TJet { axes: self.axes.clone(), dims: self.dims.clone(), d, data: self.data.iter().map(|j| sp.truncate(j, d)).collect() }
    }

    /// Constant terms.
    pub fn values(&self) -> Vec<S> {
        self.data.iter().map(|j| j.c[0].clone()).collect()
    }
}

pub fn strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * dims[k + 1];
    }
    s
}

fn offset(dims: &[usize], ix: &[usize]) -> usize {
    ix.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

/// Calls `f` on every multi-index of `dims` in row-major order.
pub fn for_each_index(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let total: usize = dims.iter().product();
    let mut ix = vec![0; dims.len()];
    for _ in 0..total {
        f(&ix);
        for k in (0..dims.len()).rev() {
            ix[k] += 1;
            if ix[k] < dims[k] {
                break;
            }
            ix[k] = 0;
        }
    }
}

fn is_zero_jet<S: Scalar>(j: &Jet<S>) -> bool {
    j.c.iter().all(Scalar::is_zero)
}

/// Symbols without geometric meaning; evaluated as seeded random fields.
pub const TEST_FIELDS: [&str; 12] = ["S", "T", "W", "v", "u", "f", "V", "s", "om", "et", "rho", "th"];

/// `conn[a][x]` lists `(y, c)` with `(∇_a T)[..x..] ∋ c · T[..y..]`.
type ConnTable<S> = Vec<Vec<Vec<(usize, Jet<S>)>>>;

pub struct Geometry<S: Scalar> {
    pub n: usize,
    pub sp: Arc<JetSpace>,
    /// Jet degree of the metric components.
    pub deg: usize,
    coord_var: Vec<Option<usize>>,
    pub rank: usize,
    pub ginv: Vec<Vec<Jet<S>>>,
    /// `gamma[m][a][i] = Γ^m_{ai}`
    pub gamma: Vec<Vec<Vec<Jet<S>>>>,
    /// `theta[a][B][C]`
    pub theta: Vec<Vec<Vec<Jet<S>>>>,
    /// `pot[a][B][C] = a_a^B_C`
    pub pot: Option<Vec<Vec<Vec<Jet<S>>>>>,
    conn: HashMap<Axis, ConnTable<S>>,
    base: HashMap<SymbolId, TJet<S>>,
    towers: HashMap<SymbolId, Vec<TJet<S>>>,
    ups: Option<Jet<S>>,
    seed: u64,
}

fn mat_mul<S: Scalar>(sp: &JetSpace, a: &[Vec<Jet<S>>], b: &[Vec<Jet<S>>], d: usize) -> Vec<Vec<Jet<S>>> {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| {
                    let mut acc = sp.zero(d);
                    for (k, bk) in b.iter().enumerate() {
                        sp.fma(&mut acc, &a[i][k], &bk[j]);
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Inverse of a constant matrix by Gauss–Jordan elimination.
pub fn invert_values<S: Scalar>(m: &[Vec<S>]) -> Option<Vec<Vec<S>>> {
    let n = m.len();
    let mut a: Vec<Vec<S>> = m
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { S::one() } else { S::zero() }));
            row
        })
        .collect();
    for c in 0..n {
        let piv = if S::EXACT {
            (c..n).find(|&r| !a[r][c].is_zero())?
        } else {
            let p = (c..n).max_by(|&x, &y| a[x][c].to_f64().abs().total_cmp(&a[y][c].to_f64().abs()))?;
            if a[p][c].is_zero() {
                return None;
            }
            p
        };
        a.swap(c, piv);
        let inv = a[c][c].inv()?;
        for v in a[c].iter_mut() {
            *v = v.mul(&inv);
        }
        for r in 0..n {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for k in 0..2 * n {
                    let t = a[c][k].mul(&f);
                    a[r][k] = a[r][k].sub(&t);
                }
            }
        }
    }
    Some(a.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Determinant of a constant matrix.
pub fn det_values<S: Scalar>(m: &[Vec<S>]) -> S {
    let n = m.len();
    let mut a = m.to_vec();
    let mut det = S::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&r| !a[r][c].is_zero()) else {
            return S::zero();
        };
        if p != c {
            a.swap(c, p);
            det = det.neg();
        }
        det = det.mul(&a[c][c]);
        let inv = a[c][c].inv().unwrap();
        for r in c + 1..n {
            let f = a[r][c].mul(&inv);
            for k in c..n {
                let t = a[c][k].mul(&f);
                a[r][k] = a[r][k].sub(&t);
            }
        }
    }
    det
}

impl<S: Scalar> Geometry<S> {
    /// Builds all jets about `x0` with the metric known through degree `deg`.
    pub fn new(spec: &Compiled, x0: &[S], deg: usize, seed: u64) -> Result<Self, GeomError> {
        let n = spec.n;
        if n < 3 {
            return Err(GeomError::Dimension(n));
        }
        let used = spec.used_coords();
        let mut coord_var = vec![None; n];
        for (v, &k) in used.iter().enumerate() {
            coord_var[k] = Some(v);
        }
        let sp = JetSpace::new(used.len().max(1), deg);
        let mut geo = Geometry {
            n,
            sp: sp.clone(),
            deg,
            coord_var,
            rank: spec.gauge.as_ref().map_or(0, |g| g.0),
            ginv: Vec::new(),
            gamma: Vec::new(),
            theta: Vec::new(),
            pot: None,
            conn: HashMap::new(),
            base: HashMap::new(),
            towers: HashMap::new(),
            ups: None,
            seed,
        };
        let cv = geo.coord_var.clone();
        let mut g = TJet::zeros(&sp, vec![Axis::Space; 2], vec![n, n], deg);
        for i in 0..n {
            for j in 0..n {
                *g.at_mut(&[i, j]) = spec.g[i][j].jet(&sp, x0, &cv, deg)?;
            }
        }
        if let Some(u) = &spec.ups {
            geo.ups = Some(u.jet(&sp, x0, &cv, deg)?);
        }
        if let Some((r, a)) = &spec.gauge {
            let mut pot = Vec::new();
            for row in a.iter().take(n) {
                let mut m = Vec::new();
                for b in 0..*r {
                    let mut rr = Vec::new();
                    for c in 0..*r {
                        rr.push(row[b][c].jet(&sp, x0, &cv, deg)?);
                    }
                    m.push(rr);
                }
                pot.push(m);
            }
            geo.pot = Some(pot);
        }
        geo.metric_data(&g)?;
        geo.base.insert(sym("g"), g);
        geo.curvature()?;
        geo.tractor_data();
        geo.gauge_data();
        Ok(geo)
    }

    /// `∂/∂x^a` of a jet, one degree lower.
    pub fn partial(&self, j: &Jet<S>, a: usize) -> Jet<S> {
        match self.coord_var[a] {
            Some(v) => self.sp.deriv(j, v),
            None => self.sp.zero(j.d - 1),
        }
    }

    fn metric_data(&mut self, g: &TJet<S>) -> Result<(), GeomError> {
        let (n, d, sp) = (self.n, self.deg, self.sp.clone());
        let g0: Vec<Vec<S>> = (0..n).map(|i| (0..n).map(|j| g.at(&[i, j]).c[0].clone()).collect()).collect();
        let g0inv = invert_values(&g0).ok_or(GeomError::Degenerate)?;
        let g0inv_j: Vec<Vec<Jet<S>>> =
            g0inv.iter().map(|r| r.iter().map(|v| sp.constant(v.clone(), d)).collect()).collect();
        // g⁻¹ = Σ_k (−g0⁻¹ u)^k g0⁻¹ with u = g − g0 nilpotent in the jet ring
        let u: Vec<Vec<Jet<S>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        let mut x = g.at(&[i, j]).clone();
                        x.c[0] = S::zero();
                        x
                    })
                    .collect()
            })
            .collect();
        let m: Vec<Vec<Jet<S>>> =
            mat_mul(&sp, &g0inv_j, &u, d).into_iter().map(|r| r.into_iter().map(|x| sp.neg(&x)).collect()).collect();
        let mut ginv = g0inv_j.clone();
        let mut term = g0inv_j;
        for _ in 0..d {
            term = mat_mul(&sp, &m, &term, d);
            for i in 0..n {
                for j in 0..n {
                    ginv[i][j] = sp.add(&ginv[i][j], &term[i][j]);
                }
            }
        }
        if d == 0 {
            self.ginv = ginv;
            self.gamma = vec![vec![vec![sp.zero(0); n]; n]; n];
            return Ok(());
        }
        let dg: Vec<Vec<Vec<Jet<S>>>> =
            (0..n).map(|a| (0..n).map(|i| (0..n).map(|j| self.partial(g.at(&[i, j]), a)).collect()).collect()).collect();
        let half = S::from_i64(2).inv().unwrap();
        let low: Vec<Vec<Vec<Jet<S>>>> = (0..n)
            .map(|k| {
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| sp.scale(&sp.sub(&sp.add(&dg[i][j][k], &dg[j][i][k]), &dg[k][i][j]), &half))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let gamma = (0..n)
            .map(|mm| {
                (0..n)
                    .map(|i| {
                        (0..n)
                            .map(|j| {
                                let mut acc = sp.zero(d - 1);
                                for (k, lk) in low.iter().enumerate() {
                                    sp.fma(&mut acc, &ginv[mm][k], &lk[i][j]);
                                }
                                acc
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        self.ginv = ginv;
        self.gamma = gamma;
        let mut space: ConnTable<S> = vec![vec![Vec::new(); n]; n];
        for (a, sa) in space.iter_mut().enumerate() {
            for (i, si) in sa.iter_mut().enumerate() {
                for mm in 0..n {
                    let c = &self.gamma[mm][a][i];
                    if !is_zero_jet(c) {
                        si.push((mm, sp.neg(c)));
                    }
                }
            }
        }
        self.conn.insert(Axis::Space, space);
        Ok(())
    }

    fn put(&mut self, name: &str, t: TJet<S>) {
        self.base.insert(sym(name), t);
    }

    pub fn base(&self, name: &str) -> &TJet<S> {
        &self.base[&sym(name)]
    }

    fn curvature(&mut self) -> Result<(), GeomError> {
        let (n, sp) = (self.n, self.sp.clone());
        if self.deg < 2 {
            return Ok(());
        }
        let d = self.deg - 2;
        let gm = &self.gamma;
        // standard R^c_{dab} = ∂_aΓ^c_{bd} − ∂_bΓ^c_{ad} + Γ^c_{ae}Γ^e_{bd} − Γ^c_{be}Γ^e_{ad}
        let mut rstd = TJet::zeros(&sp, vec![Axis::Space; 4], vec![n; 4], d);
        for c in 0..n {
            for dd in 0..n {
                for a in 0..n {
                    for b in a + 1..n {
                        let mut acc = sp.sub(&self.partial(&gm[c][b][dd], a), &self.partial(&gm[c][a][dd], b));
                        let mut neg = sp.zero(d);
                        for e in 0..n {
                            sp.fma(&mut acc, &gm[c][a][e], &gm[e][b][dd]);
                            sp.fma(&mut neg, &gm[c][b][e], &gm[e][a][dd]);
                        }
                        let v = sp.sub(&acc, &neg);
                        *rstd.at_mut(&[c, dd, b, a]) = sp.neg(&v);
                        *rstd.at_mut(&[c, dd, a, b]) = v;
                    }
                }
            }
        }
        let g = self.base("g").truncate(&sp, d);
        let ginv: Vec<Vec<Jet<S>>> = self.ginv.iter().map(|r| r.iter().map(|x| sp.truncate(x, d)).collect()).collect();
        // R_abcd = g_ce R^e_{dab}
        let mut r = TJet::zeros(&sp, vec![Axis::Space; 4], vec![n; 4], d);
        for_each_index(&[n; 4], |ix| {
            let (a, b, c, dd) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = sp.zero(d);
            for e in 0..n {
                sp.fma(&mut acc, g.at(&[c, e]), rstd.at(&[e, dd, a, b]));
            }
            *r.at_mut(ix) = acc;
        });
        let trace2 = |t: &dyn Fn(usize, usize) -> Jet<S>| {
            let mut acc = sp.zero(d);
            for i in 0..n {
                for j in 0..n {
                    sp.fma(&mut acc, &ginv[i][j], &t(i, j));
                }
            }
            acc
        };
        let mut ric = TJet::zeros(&sp, vec![Axis::Space; 2], vec![n, n], d);
        for a in 0..n {
            for b in 0..n {
                *ric.at_mut(&[a, b]) = trace2(&|e, c| r.at(&[e, a, c, b]).clone());
            }
        }
        let sc = trace2(&|i, j| ric.at(&[i, j]).clone());
        let nn = n as i64;
        let k1 = S::from_i64(2 * (nn - 1)).inv().unwrap();
        let k2 = S::from_i64(nn - 2).inv().unwrap();
        let sck = sp.scale(&sc, &k1);
        let mut p = TJet::zeros(&sp, vec![Axis::Space; 2], vec![n, n], d);
        for a in 0..n {
            for b in 0..n {
                let v = sp.sub(ric.at(&[a, b]), &sp.mul(&sck, g.at(&[a, b])));
                *p.at_mut(&[a, b]) = sp.scale(&v, &k2);
            }
        }
        let j = trace2(&|i, k| p.at(&[i, k]).clone());
        // C_abcd = R_abcd + g_cb P_ad − g_ca P_bd + g_da P_bc − g_db P_ac
        let mut cw = TJet::zeros(&sp, vec![Axis::Space; 4], vec![n; 4], d);
        for_each_index(&[n; 4], |ix| {
            let (a, b, c, dd) = (ix[0], ix[1], ix[2], ix[3]);
            let mut acc = r.at(ix).clone();
            let mut neg = sp.zero(d);
            sp.fma(&mut acc, g.at(&[c, b]), p.at(&[a, dd]));
            sp.fma(&mut neg, g.at(&[c, a]), p.at(&[b, dd]));
            sp.fma(&mut acc, g.at(&[dd, a]), p.at(&[b, c]));
            sp.fma(&mut neg, g.at(&[dd, b]), p.at(&[a, c]));
            *cw.at_mut(ix) = sp.sub(&acc, &neg);
        });
        let scalar = |x: Jet<S>| TJet { axes: vec![], dims: vec![], d: x.d, data: vec![x] };
        self.put("R", r);
        self.put("Ric", ric);
        self.put("Sc", scalar(sc));
        self.put("J", scalar(j));
        self.put("C", cw);
        self.put("P", p);
        Ok(())
    }

    fn tractor_data(&mut self) {
        let (n, sp) = (self.n, self.sp.clone());
        let nt = n + 2;
        let dt = self.deg.saturating_sub(2);
        let zero = sp.zero(dt);
        let mut theta = vec![vec![vec![zero.clone(); nt]; nt]; n];
        let have_p = self.base.contains_key(&sym("P"));
        let g = self.base("g").truncate(&sp, dt);
        for (a, th) in theta.iter_mut().enumerate() {
            th[0][1 + a] = sp.constant(S::from_i64(-1), dt);
            for c in 0..n {
                for dd in 0..n {
                    if self.deg >= 1 {
                        th[1 + c][1 + dd] = sp.neg(&sp.truncate(&self.gamma[dd][a][c], dt));
                    }
                }
                th[1 + c][n + 1] = g.at(&[a, c]).clone();
                if have_p {
                    let p = self.base("P");
                    th[1 + c][0] = sp.truncate(p.at(&[a, c]), dt);
                    let mut acc = sp.zero(dt);
                    for dd in 0..n {
                        sp.fma(&mut acc, &self.ginv[c][dd], p.at(&[a, dd]));
                    }
                    th[n + 1][1 + c] = sp.neg(&acc);
                }
            }
        }
        let mut table: ConnTable<S> = vec![vec![Vec::new(); nt]; n];
        for a in 0..n {
            for b in 0..nt {
                for c in 0..nt {
                    if !is_zero_jet(&theta[a][b][c]) {
                        table[a][b].push((c, theta[a][b][c].clone()));
                    }
                }
            }
        }
        self.conn.insert(Axis::Tractor, table);
        self.theta = theta;

        let cst = |v: i64| sp.constant(S::from_i64(v), self.deg);
        let mut x = TJet::zeros(&sp, vec![Axis::Tractor], vec![nt], self.deg);
        *x.at_mut(&[n + 1]) = cst(1);
        let mut y = TJet::zeros(&sp, vec![Axis::Tractor], vec![nt], self.deg);
        *y.at_mut(&[0]) = cst(1);
        let gfull = self.base("g").clone();
        let mut z = TJet::zeros(&sp, vec![Axis::Tractor, Axis::Space], vec![nt, n], self.deg);
        let mut h = TJet::zeros(&sp, vec![Axis::Tractor, Axis::Tractor], vec![nt, nt], self.deg);
        *h.at_mut(&[0, n + 1]) = cst(1);
        *h.at_mut(&[n + 1, 0]) = cst(1);
        for c in 0..n {
            for dd in 0..n {
                *z.at_mut(&[1 + dd, c]) = gfull.at(&[dd, c]).clone();
                *h.at_mut(&[1 + c, 1 + dd]) = gfull.at(&[c, dd]).clone();
            }
        }
        self.put("X", x);
        self.put("Y", y);
        self.put("Z", z);
        self.put("h", h);

        // Ω_ab = ∂_aΘ_b − ∂_bΘ_a + [Θ_a, Θ_b], stored with both tractor indices up
        if dt >= 1 {
            let d = dt - 1;
            let mut om = TJet::zeros(&sp, vec![Axis::Space, Axis::Space, Axis::Tractor, Axis::Tractor], vec![n, n, nt, nt], d);
            let hinv = self.base("h").truncate(&sp, d);
            for a in 0..n {
                for b in a + 1..n {
                    let mut m = vec![vec![sp.zero(d); nt]; nt];
                    for (bb, row) in m.iter_mut().enumerate() {
                        for (cc, v) in row.iter_mut().enumerate() {
                            let mut acc = sp.sub(&self.partial(&self.theta[b][bb][cc], a), &self.partial(&self.theta[a][bb][cc], b));
                            let mut neg = sp.zero(d);
                            for e in 0..nt {
                                sp.fma(&mut acc, &self.theta[a][bb][e], &self.theta[b][e][cc]);
                                sp.fma(&mut neg, &self.theta[b][bb][e], &self.theta[a][e][cc]);
                            }
                            *v = sp.sub(&acc, &neg);
                        }
                    }
                    for bb in 0..nt {
                        for cc in 0..nt {
                            let mut acc = sp.zero(d);
                            for e in 0..nt {
                                sp.fma(&mut acc, &m[bb][e], hinv.at(&[e, cc]));
                            }
                            *om.at_mut(&[b, a, bb, cc]) = sp.neg(&acc);
                            *om.at_mut(&[a, b, bb, cc]) = acc;
                        }
                    }
                }
            }
            self.put("Omega", om);
        }
    }

    fn gauge_data(&mut self) {
        let Some(pot) = self.pot.clone() else { return };
        let (n, r, sp) = (self.n, self.rank, self.sp.clone());
        let mut up: ConnTable<S> = vec![vec![Vec::new(); r]; n];
        let mut down: ConnTable<S> = vec![vec![Vec::new(); r]; n];
        for a in 0..n {
            for b in 0..r {
                for c in 0..r {
                    if !is_zero_jet(&pot[a][b][c]) {
                        up[a][b].push((c, pot[a][b][c].clone()));
                        down[a][c].push((b, sp.neg(&pot[a][b][c])));
                    }
                }
            }
        }
        self.conn.insert(Axis::GaugeUp, up);
        self.conn.insert(Axis::GaugeDown, down);
        if self.deg == 0 {
            return;
        }
        let d = self.deg - 1;
        let mut f = TJet::zeros(&sp, vec![Axis::Space, Axis::Space, Axis::GaugeUp, Axis::GaugeDown], vec![n, n, r, r], d);
        for i in 0..n {
            for j in i + 1..n {
                for b in 0..r {
                    for c in 0..r {
                        let mut acc = sp.sub(&self.partial(&pot[j][b][c], i), &self.partial(&pot[i][b][c], j));
                        let mut neg = sp.zero(d);
                        for e in 0..r {
                            sp.fma(&mut acc, &pot[i][b][e], &pot[j][e][c]);
                            sp.fma(&mut neg, &pot[j][b][e], &pot[i][e][c]);
                        }
                        let v = sp.sub(&acc, &neg);
                        *f.at_mut(&[j, i, b, c]) = sp.neg(&v);
                        *f.at_mut(&[i, j, b, c]) = v;
                    }
                }
            }
        }
        self.put("F", f);
    }

    /// `∇_a T`, the new index first; one jet degree lower.
    pub fn nabla(&self, t: &TJet<S>) -> TJet<S> {
        let (n, sp) = (self.n, &*self.sp);
        assert!(t.d >= 1, "covariant derivative of a degree-0 tensor jet");
        let d = t.d - 1;
        let tables: Vec<&ConnTable<S>> = t
            .axes
            .iter()
            .map(|ax| self.conn.get(ax).unwrap_or_else(|| panic!("no connection for {ax:?}")))
            .collect();
        let st = t.strides();
        let len = t.data.len();
        let data: Vec<Jet<S>> = (0..n * len)
            .into_par_iter()
            .map(|k| {
                let (a, o) = (k / len, k % len);
                let mut acc = self.partial(&t.data[o], a);
                let mut rem = o;
                for (s, table) in tables.iter().enumerate() {
                    let x = rem / st[s];
                    rem %= st[s];
                    let base = o - x * st[s];
                    for (y, c) in &table[a][x] {
                        sp.fma(&mut acc, c, &t.data[base + y * st[s]]);
                    }
                }
                acc
            })
            .collect();
        let mut axes = vec![Axis::Space];
        axes.extend(&t.axes);
        let mut dims = vec![n];
        dims.extend(&t.dims);
        TJet { axes, dims, d, data }
    }

    fn axes_of(&self, s: SymbolId) -> (Vec<Axis>, Vec<usize>) {
        let mut axes = Vec::new();
        let mut dims = Vec::new();
        for &(fam, up) in &decl(s).slots {
            let (ax, dm) = match (fam, up) {
                (IndexFamily::Spacetime, _) => (Axis::Space, self.n),
                (IndexFamily::Tractor, _) => (Axis::Tractor, self.n + 2),
                (IndexFamily::Gauge, true) => (Axis::GaugeUp, self.rank),
                (IndexFamily::Gauge, false) => (Axis::GaugeDown, self.rank),
            };
            axes.push(ax);
            dims.push(dm);
        }
        (axes, dims)
    }

    /// Random field for a test symbol, projected onto its slot symmetries.
    fn random_field(&self, s: SymbolId) -> TJet<S> {
        let sp = &*self.sp;
        let (axes, dims) = self.axes_of(s);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(s.0 as u64 + 1)));
        let mut raw = TJet::zeros(sp, axes, dims.clone(), self.deg);
        for j in raw.data.iter_mut() {
            for c in j.c.iter_mut() {
                *c = S::from_i64(rng.gen_range(-4..=4));
            }
        }
        let group = decl(s).group();
        let mut out = TJet::zeros(sp, raw.axes.clone(), dims.clone(), self.deg);
        for_each_index(&dims, |ix| {
            let mut acc = sp.zero(self.deg);
            for ge in group {
                let src: Vec<usize> = ge.perm.iter().map(|&p| ix[p as usize]).collect();
                let t = raw.at(&src);
                acc = if ge.sign > 0 { sp.add(&acc, t) } else { sp.sub(&acc, t) };
            }
            *out.at_mut(ix) = acc;
        });
        out
    }

    /// The undifferentiated tensor of a symbol.
    pub fn base_of(&mut self, s: SymbolId) -> Result<&TJet<S>, GeomError> {
        if !self.base.contains_key(&s) {
            let dl = decl(s);
            let t = match dl.name {
                "Ups" => {
                    let u = self.ups.clone().ok_or_else(|| GeomError::NeedsData("Ups".into(), "conformal factor"))?;
                    TJet { axes: vec![], dims: vec![], d: u.d, data: vec![u] }
                }
                "F" => return Err(GeomError::NeedsData("F".into(), "gauge potential")),
                "A" => {
                    let dp = self.tower_at(sym("P"), 1, self.deg.saturating_sub(3))?.clone();
                    let n = self.n;
                    let mut a = TJet::zeros(&self.sp, vec![Axis::Space; 3], vec![n; 3], dp.d);
                    for_each_index(&[n; 3], |ix| {
                        let (x, b, c) = (ix[0], ix[1], ix[2]);
                        *a.at_mut(ix) = self.sp.sub(dp.at(&[b, c, x]), dp.at(&[c, b, x]));
                    });
                    a
                }
                "B" => {
                    let da = self.tower_at(sym("A"), 1, self.deg.saturating_sub(4))?.clone();
                    let d = da.d;
                    let (n, sp) = (self.n, self.sp.clone());
                    let p = self.base("P").truncate(&sp, d);
                    let cw = self.base("C").truncate(&sp, d);
                    let gi: Vec<Vec<Jet<S>>> = self.ginv.iter().map(|r| r.iter().map(|x| sp.truncate(x, d)).collect()).collect();
                    let mut pup = vec![vec![sp.zero(d); n]; n];
                    for c in 0..n {
                        for e in 0..n {
                            for x in 0..n {
                                for y in 0..n {
                                    let t = sp.mul(&gi[c][x], &gi[e][y]);
                                    sp.fma(&mut pup[c][e], &t, p.at(&[x, y]));
                                }
                            }
                        }
                    }
                    let mut b = TJet::zeros(&sp, vec![Axis::Space; 2], vec![n, n], d);
                    for a in 0..n {
                        for bb in 0..n {
                            let mut acc = sp.zero(d);
                            for c in 0..n {
                                for e in 0..n {
                                    sp.fma(&mut acc, &gi[c][e], da.at(&[c, a, e, bb]));
                                    sp.fma(&mut acc, &pup[c][e], cw.at(&[c, a, e, bb]));
                                }
                            }
                            *b.at_mut(&[a, bb]) = acc;
                        }
                    }
                    b
                }
                _ if TEST_FIELDS.contains(&dl.name) => {
                    if dl.slots.iter().any(|s| s.0 == IndexFamily::Gauge) && self.rank == 0 {
                        return Err(GeomError::NeedsData(dl.name.into(), "gauge bundle"));
                    }
                    self.random_field(s)
                }
                _ => return Err(GeomError::NeedsData(dl.name.into(), "higher jet degree")),
            };
            self.base.insert(s, t);
        }
        Ok(&self.base[&s])
    }

    /// `∇^k S` as a tensor jet of degree `d` (derivative indices first).
    pub fn tower_at(&mut self, s: SymbolId, k: usize, d: usize) -> Result<&TJet<S>, GeomError> {
        let need = k + d;
        let cached = self.towers.get(&s).map_or(false, |t| t.len() > k && t[k].d >= d);
        if !cached {
            let sp = self.sp.clone();
            let base = self.base_of(s)?;
            if base.d < need {
                return Err(GeomError::JetDegree { sym: decl(s).name.into(), need: k, have: base.d.saturating_sub(d) });
            }
            let mut tower = vec![base.truncate(&sp, need)];
            for _ in 0..k {
                let next = self.nabla(tower.last().unwrap());
                tower.push(next);
            }
            self.towers.insert(s, tower);
        }
        Ok(&self.towers[&s][k])
    }

    /// Values of `∇^k S` at the point.
    pub fn derivative_values(&mut self, s: SymbolId, k: usize) -> Result<(Vec<Axis>, Vec<usize>, Vec<S>), GeomError> {
        let t = self.tower_at(s, k, 0)?;
        Ok((t.axes.clone(), t.dims.clone(), t.values()))
    }

    pub fn ginv_values(&self) -> Vec<Vec<S>> {
        self.ginv.iter().map(|r| r.iter().map(|x| x.c[0].clone()).collect()).collect()
    }

    /// `h_BC` at the point (the inverse of the stored `h^BC`).
    pub fn h_lower_values(&self) -> Vec<Vec<S>> {
        let n = self.n;
        let mut m = vec![vec![S::zero(); n + 2]; n + 2];
        m[0][n + 1] = S::one();
        m[n + 1][0] = S::one();
        for (c, row) in self.ginv.iter().enumerate() {
            for (d, v) in row.iter().enumerate() {
                m[1 + c][1 + d] = v.c[0].clone();
            }
        }
        m
    }

    pub fn metric_values(&self) -> Vec<Vec<S>> {
        let g = self.base("g");
        (0..self.n).map(|i| (0..self.n).map(|j| g.at(&[i, j]).c[0].clone()).collect()).collect()
    }

    /// `det g` at the point.
    pub fn det(&self) -> S {
        det_values(&self.metric_values())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::scalar::ModP;
    use crate::numeric::spec::{conformal_rescale, random_polynomial_metric, MetricSpec};

    fn round_sphere(n: usize) -> MetricSpec {
        let r2: Vec<String> = (1..=n).map(|k| format!("x{k}^2")).collect();
        let f = format!("4/(1 + {})^2", r2.join(" + "));
        let metric = (0..n).map(|i| (0..n).map(|j| if i == j { f.clone() } else { "0".into() }).collect()).collect();
        MetricSpec { dimension: n, metric, conformal_factor: None, gauge: None, periodic: vec![], seed: None }
    }

    fn at_origin<S: Scalar>(m: &MetricSpec, deg: usize) -> Geometry<S> {
        let x0 = vec![S::zero(); m.dimension];
        Geometry::new(&m.compile().unwrap(), &x0, deg, 1).unwrap()
    }

    #[test]
    fn round_sphere_is_conformally_flat_with_positive_curvature() {
        let mut geo: Geometry<ModP> = at_origin(&round_sphere(4), 5);
        // unit sphere: Sc = n(n−1), J = n/2 at any point
        assert_eq!(geo.base("Sc").data[0].c[0], ModP::from_i64(12));
        assert_eq!(geo.base("J").data[0].c[0], ModP::from_i64(2));
        assert!(geo.base("C").data.iter().all(|j| j.c.iter().all(|c| c.0 == 0)));
        let a = geo.base_of(sym("A")).unwrap();
        assert!(a.data.iter().all(|j| j.c.iter().all(|c| c.0 == 0)));
    }

    #[test]
    fn tractor_frame_derivatives() {
        // ∇_a X^B = Z^B_a and ∇_a Y^B = P_a^c Z^B_c
        let m = random_polynomial_metric(4, 2, 3);
        let mut geo: Geometry<ModP> = at_origin(&m, 4);
        let dx = geo.tower_at(sym("X"), 1, 1).unwrap().clone();
        let z = geo.base("Z").truncate(&geo.sp, 1);
        for a in 0..4 {
            for b in 0..6 {
                assert_eq!(dx.at(&[a, b]), z.at(&[b, a]));
            }
        }
        let dy = geo.tower_at(sym("Y"), 1, 0).unwrap().clone();
        let p = geo.base("P").clone();
        for a in 0..4 {
            for c in 0..4 {
                assert_eq!(dy.at(&[a, 1 + c]).c[0], p.at(&[a, c]).c[0]);
            }
        }
    }

    #[test]
    fn weyl_tensor_is_conformally_invariant() {
        let m = random_polynomial_metric(4, 2, 11);
        let mh = conformal_rescale(&m, "x1 - 2*x3^2 + x2*x4");
        let g1: Geometry<ModP> = at_origin(&m, 3);
        let g2: Geometry<ModP> = at_origin(&mh, 3);
        // C_abc^d is invariant; at x = 0 with Υ(0) = 0 the lowered tensors agree
        for (x, y) in g1.base("C").data.iter().zip(&g2.base("C").data) {
            assert_eq!(x.c[0], y.c[0]);
        }
    }
}
