//! Explicit metrics (and optional conformal factor and gauge potential) as
//! scalar expressions in the coordinates `x1..xn`, plus seeded generators.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::jet::{Jet, JetSpace};
use super::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpecError {
    #[error("scalar expression {src:?}: {msg} at byte {pos}")]
    Syntax { src: String, pos: usize, msg: String },
    #[error("metric is not symmetric at ({0},{1})")]
    NotSymmetric(usize, usize),
    #[error("metric has {rows} rows for dimension {dim}")]
    Shape { rows: usize, dim: usize },
    #[error("coordinate x{0} out of range")]
    Coordinate(usize),
    #[error("{0} needs a vanishing argument at the evaluation point in exact arithmetic")]
    Transcendental(&'static str),
    #[error("division by a jet with zero constant term")]
    Singular,
    #[error("field {0} not present in the metric spec")]
    Missing(&'static str),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Const(BigRational),
    Var(usize),
    Add(Box<SExpr>, Box<SExpr>),
    Sub(Box<SExpr>, Box<SExpr>),
    Mul(Box<SExpr>, Box<SExpr>),
    Div(Box<SExpr>, Box<SExpr>),
    Neg(Box<SExpr>),
    Pow(Box<SExpr>, u32),
    Exp(Box<SExpr>),
    Sin(Box<SExpr>),
    Cos(Box<SExpr>),
}

struct SParser<'a> {
    s: &'a [u8],
    pos: usize,
    src: &'a str,
}

impl<'a> SParser<'a> {
    fn err<T>(&self, msg: &str) -> Result<T, SpecError> {
        Err(SpecError::Syntax { src: self.src.to_string(), pos: self.pos, msg: msg.to_string() })
    }

    fn peek(&mut self) -> Option<u8> {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<SExpr, SpecError> {
        let mut a = self.term()?;
        loop {
            if self.eat(b'+') {
                a = SExpr::Add(Box::new(a), Box::new(self.term()?));
            } else if self.eat(b'-') {
                a = SExpr::Sub(Box::new(a), Box::new(self.term()?));
            } else {
                return Ok(a);
            }
        }
    }

    fn term(&mut self) -> Result<SExpr, SpecError> {
        let mut a = self.unary()?;
        loop {
            if self.eat(b'*') {
                a = SExpr::Mul(Box::new(a), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                a = SExpr::Div(Box::new(a), Box::new(self.unary()?));
            } else {
                return Ok(a);
            }
        }
    }

    fn unary(&mut self) -> Result<SExpr, SpecError> {
        if self.eat(b'-') {
            return Ok(SExpr::Neg(Box::new(self.unary()?)));
        }
        let a = self.atom()?;
        if self.eat(b'^') {
            let start = self.pos;
            while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            let k: u32 = match std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse() {
                Ok(k) => k,
                Err(_) => return self.err("expected integer exponent"),
            };
            return Ok(SExpr::Pow(Box::new(a), k));
        }
        Ok(a)
    }

    fn atom(&mut self) -> Result<SExpr, SpecError> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected )");
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() => {
                let start = self.pos;
                while self.pos < self.s.len() && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.') {
                    self.pos += 1;
                }
                let text = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                match decimal(text) {
                    Some(r) => Ok(SExpr::Const(r)),
                    None => self.err("bad number"),
                }
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
                    self.pos += 1;
                }
                let id = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
                if let Some(k) = id.strip_prefix('x').and_then(|k| k.parse::<usize>().ok()) {
                    if k == 0 {
                        return self.err("coordinates are x1..xn");
                    }
                    return Ok(SExpr::Var(k - 1));
                }
                let f: fn(Box<SExpr>) -> SExpr = match id {
                    "exp" => SExpr::Exp,
                    "sin" => SExpr::Sin,
                    "cos" => SExpr::Cos,
                    _ => return self.err("unknown identifier"),
                };
                if !self.eat(b'(') {
                    return self.err("expected (");
                }
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.err("expected )");
                }
                Ok(f(Box::new(e)))
            }
            _ => self.err("expected operand"),
        }
    }
}

fn decimal(text: &str) -> Option<BigRational> {
    let (int, frac) = match text.split_once('.') {
        Some((a, b)) => (a, b),
        None => (text, ""),
    };
    let digits = format!("{int}{frac}");
    let num: BigInt = digits.parse().ok()?;
    let den = num_traits::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(num, den))
}

impl SExpr {
    pub fn parse(src: &str) -> Result<SExpr, SpecError> {
        let mut p = SParser { s: src.as_bytes(), pos: 0, src };
        let e = p.expr()?;
        if p.peek().is_some() {
            return p.err("trailing input");
        }
        Ok(e)
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<usize>) {
        use SExpr::*;
        match self {
            Const(_) => {}
            Var(k) => {
                out.insert(*k);
            }
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Neg(a) | Pow(a, _) | Exp(a) | Sin(a) | Cos(a) => a.collect_vars(out),
        }
    }

    pub fn max_var(&self) -> Option<usize> {
        use SExpr::*;
        match self {
            Const(_) => None,
            Var(k) => Some(*k),
            Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b) => a.max_var().max(b.max_var()),
            Neg(a) | Pow(a, _) | Exp(a) | Sin(a) | Cos(a) => a.max_var(),
        }
    }

    /// Jet of the expression about `x0` through degree `d`; coordinate `k`
    /// is jet variable `vars[k]`, or held constant when that is `None`.
    pub fn jet<S: Scalar>(&self, sp: &JetSpace, x0: &[S], vars: &[Option<usize>], d: usize) -> Result<Jet<S>, SpecError> {
        use SExpr::*;
        Ok(match self {
            Const(r) => sp.constant(S::from_rational(r), d),
            Var(k) => {
                if *k >= x0.len() {
                    return Err(SpecError::Coordinate(k + 1));
                }
                match vars.get(*k).copied().flatten() {
                    Some(v) => sp.variable(v, x0[*k].clone(), d),
                    None => sp.constant(x0[*k].clone(), d),
                }
            }
            Add(a, b) => sp.add(&a.jet(sp, x0, vars, d)?, &b.jet(sp, x0, vars, d)?),
            Sub(a, b) => sp.sub(&a.jet(sp, x0, vars, d)?, &b.jet(sp, x0, vars, d)?),
            Mul(a, b) => sp.mul(&a.jet(sp, x0, vars, d)?, &b.jet(sp, x0, vars, d)?),
            Div(a, b) => {
                let inv = sp.inv(&b.jet(sp, x0, vars, d)?).ok_or(SpecError::Singular)?;
                sp.mul(&a.jet(sp, x0, vars, d)?, &inv)
            }
            Neg(a) => sp.neg(&a.jet(sp, x0, vars, d)?),
            Pow(a, k) => sp.powi(&a.jet(sp, x0, vars, d)?, *k),
            Exp(a) => sp.exp(&a.jet(sp, x0, vars, d)?).ok_or(SpecError::Transcendental("exp"))?,
            Sin(a) => sp.sin(&a.jet(sp, x0, vars, d)?).ok_or(SpecError::Transcendental("sin"))?,
            Cos(a) => sp.cos(&a.jet(sp, x0, vars, d)?).ok_or(SpecError::Transcendental("cos"))?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GaugeSpec {
    pub rank: usize,
    /// `potential[i][B][C]` is the component `a_i^B_C`.
    pub potential: Vec<Vec<Vec<String>>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MetricSpec {
    pub dimension: usize,
    /// Full symmetric matrix of component expressions; entries below the
    /// diagonal may be left empty.
    pub metric: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conformal_factor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<GaugeSpec>,
    #[serde(default)]
    pub periodic: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// A parsed, shape-checked [`MetricSpec`].
#[derive(Clone, Debug)]
pub struct Compiled {
    pub n: usize,
    pub g: Vec<Vec<SExpr>>,
    pub ups: Option<SExpr>,
    pub gauge: Option<(usize, Vec<Vec<Vec<SExpr>>>)>,
    pub periodic: Vec<bool>,
}

impl Compiled {
    /// Coordinates any component actually depends on.
    pub fn used_coords(&self) -> std::collections::BTreeSet<usize> {
        let mut out = std::collections::BTreeSet::new();
        for e in self.g.iter().flatten() {
            e.collect_vars(&mut out);
        }
        if let Some(u) = &self.ups {
            u.collect_vars(&mut out);
        }
        if let Some((_, a)) = &self.gauge {
            for e in a.iter().flatten().flatten() {
                e.collect_vars(&mut out);
            }
        }
        out
    }
}

impl MetricSpec {
    pub fn compile(&self) -> Result<Compiled, SpecError> {
        let n = self.dimension;
        if self.metric.len() != n || self.metric.iter().any(|r| r.len() != n) {
            return Err(SpecError::Shape { rows: self.metric.len(), dim: n });
        }
        let mut g = vec![vec![SExpr::Const(num_traits::Zero::zero()); n]; n];
        for i in 0..n {
            for j in i..n {
                let e = SExpr::parse(&self.metric[i][j])?;
                let lower = self.metric[j][i].trim();
                if i != j && !lower.is_empty() && SExpr::parse(lower)? != e {
                    return Err(SpecError::NotSymmetric(j, i));
                }
                g[i][j] = e.clone();
                g[j][i] = e;
            }
        }
        let ups = self.conformal_factor.as_deref().map(SExpr::parse).transpose()?;
        let gauge = match &self.gauge {
            None => None,
            Some(gs) => {
                let mut comps = Vec::new();
                for row in &gs.potential {
                    let m: Result<Vec<Vec<SExpr>>, _> =
                        row.iter().map(|r| r.iter().map(|s| SExpr::parse(s)).collect()).collect();
                    comps.push(m?);
                }
                Some((gs.rank, comps))
            }
        };
        let all_vars = g.iter().flatten().filter_map(SExpr::max_var).max();
        if let Some(k) = all_vars {
            if k >= n {
                return Err(SpecError::Coordinate(k + 1));
            }
        }
        let periodic = if self.periodic.is_empty() { vec![false; n] } else { self.periodic.clone() };
        Ok(Compiled { n, g, ups, gauge, periodic })
    }
}

/// `ĝ = e^{2Υ} g`; the conformal factor field is carried over unchanged.
pub fn conformal_rescale(m: &MetricSpec, ups: &str) -> MetricSpec {
    let metric = m
        .metric
        .iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, e)| {
                    let e = if e.trim().is_empty() { m.metric[j][i].clone() } else { e.clone() };
                    format!("exp(2*({ups}))*({e})")
                })
                .collect()
        })
        .collect();
    MetricSpec { metric, ..m.clone() }
}

fn small_rational(rng: &mut ChaCha8Rng, num: i64, den: i64) -> String {
    let p: i64 = rng.gen_range(-num..=num);
    let q: i64 = rng.gen_range(1..=den);
    let r = BigRational::new(p.into(), q.into());
    if num_traits::Zero::is_zero(&r) {
        "0".into()
    } else if r.denom().is_one() {
        format!("({})", r.numer())
    } else {
        format!("({}/{})", r.numer(), r.denom())
    }
}

/// δ plus a random symmetric polynomial perturbation of degree ≤ `deg`
/// with small rational coefficients (exact-arithmetic friendly).
pub fn random_polynomial_metric(n: usize, deg: usize, seed: u64) -> MetricSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut metric = vec![vec![String::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let mut terms = vec![if i == j { "1".to_string() } else { "0".to_string() }];
            for _ in 0..3 {
                let d = rng.gen_range(1..=deg.max(1));
                let mut mono = small_rational(&mut rng, 3, 5);
                for _ in 0..d {
                    mono = format!("{mono}*x{}", rng.gen_range(1..=n));
                }
                terms.push(mono);
            }
            metric[i][j] = terms.join(" + ");
        }
    }
    MetricSpec { dimension: n, metric, conformal_factor: None, gauge: None, periodic: vec![false; n], seed: Some(seed) }
}

/// A random periodic polynomial-free expression in `x1`, `x2` with mean 0.
fn random_trig(rng: &mut ChaCha8Rng, amp: f64) -> String {
    let mut parts = Vec::new();
    for _ in 0..2 {
        let (k1, k2) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
        if k1 == 0 && k2 == 0 {
            continue;
        }
        let a = (rng.gen_range(-1000..=1000) as f64 / 1000.0) * amp;
        let f = if rng.gen_bool(0.5) { "sin" } else { "cos" };
        parts.push(format!("{:.4}*{f}({k1}*x1 + {k2}*x2)", a));
    }
    if parts.is_empty() {
        "0".into()
    } else {
        parts.join(" + ")
    }
}

/// Periodic metric on T^n depending on `x1`, `x2` only, close to flat.
pub fn random_periodic_metric(n: usize, seed: u64, amp: f64) -> MetricSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut metric = vec![vec![String::new(); n]; n];
    for i in 0..n {
        for j in i..n {
            let base = if i == j { "1" } else { "0" };
            let pert = if i == j || rng.gen_bool(0.4) { random_trig(&mut rng, amp) } else { "0".into() };
            metric[i][j] = format!("{base} + {pert}");
        }
    }
    MetricSpec { dimension: n, metric, conformal_factor: None, gauge: None, periodic: vec![true; n], seed: Some(seed) }
}

pub fn random_periodic_scalar(seed: u64, amp: f64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_trig(&mut rng, amp)
}

/// Periodic rank-`r` gauge potential depending on `x1`, `x2`.
pub fn random_periodic_gauge(n: usize, r: usize, seed: u64, amp: f64) -> GaugeSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let potential = (0..n)
        .map(|_| (0..r).map(|_| (0..r).map(|_| random_trig(&mut rng, amp)).collect()).collect())
        .collect();
    GaugeSpec { rank: r, potential }
}

/// Polynomial rank-`r` gauge potential (exact-arithmetic friendly).
pub fn random_polynomial_gauge(n: usize, r: usize, seed: u64) -> GaugeSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let potential = (0..n)
        .map(|_| {
            (0..r)
                .map(|_| {
                    (0..r)
                        .map(|_| {
                            let mut t = vec![small_rational(&mut rng, 3, 4)];
                            for _ in 0..2 {
                                let d = rng.gen_range(1..=3);
                                let mut mono = small_rational(&mut rng, 3, 4);
                                for _ in 0..d {
                                    mono = format!("{mono}*x{}", rng.gen_range(1..=n));
                                }
                                t.push(mono);
                            }
                            t.join(" + ")
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    GaugeSpec { rank: r, potential }
}

/// Polynomial conformal factor with small rational coefficients.
pub fn random_polynomial_scalar(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = Vec::new();
    for _ in 0..4 {
        let d = rng.gen_range(1..=3);
        let mut mono = small_rational(&mut rng, 2, 3);
        for _ in 0..d {
            mono = format!("{mono}*x{}", rng.gen_range(1..=n));
        }
        t.push(mono);
    }
    t.join(" + ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::scalar::ModP;

    #[test]
    fn parses_and_evaluates() {
        let e = SExpr::parse("1 + x1^2/3 - 0.5*x2*x1").unwrap();
        let sp = JetSpace::new(2, 2);
        let j = e.jet(&sp, &[2.0f64, 1.0], &[Some(0), Some(1)], 2).unwrap();
        assert!((j.c[0] - (1.0 + 4.0 / 3.0 - 1.0)).abs() < 1e-15);
        // d/dx1 = 2x1/3 - 0.5 x2
        assert!((j.c[1] - (4.0 / 3.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn exact_mode_rejects_nonzero_exp_arguments() {
        let e = SExpr::parse("exp(x1)").unwrap();
        let sp = JetSpace::new(1, 3);
        assert!(e.jet(&sp, &[ModP::from_i64(0)], &[Some(0)], 3).is_ok());
        assert_eq!(e.jet(&sp, &[ModP::from_i64(1)], &[Some(0)], 3), Err(SpecError::Transcendental("exp")));
    }

    #[test]
    fn generated_specs_compile() {
        random_polynomial_metric(6, 3, 7).compile().unwrap();
        let mut m = random_periodic_metric(6, 3, 0.1);
        m.gauge = Some(random_periodic_gauge(6, 2, 4, 0.3));
        m.conformal_factor = Some(random_periodic_scalar(5, 0.2));
        let c = m.compile().unwrap();
        assert!(c.gauge.is_some() && c.periodic.iter().all(|&p| p));
        let json = serde_json::to_string(&m).unwrap();
        let back: MetricSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
