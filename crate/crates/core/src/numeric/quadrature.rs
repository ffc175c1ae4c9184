//! Periodic trapezoidal quadrature of scalar densities over the flat torus
//! `T^n = (ℝ/2πℤ)^n`, for metrics and potentials depending on at most two
//! coordinates.

use rayon::prelude::*;
use serde::Serialize;

use super::eval::{required_degree, EvalError, Evaluator};
use super::geometry::{GeomError, Geometry};
use super::spec::{conformal_rescale, MetricSpec, SpecError};
use crate::expr::Expr;
use crate::forms::{action_density, gauge_curvature};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QuadError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Geometry(#[from] GeomError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("coordinate x{0} is used but not periodic")]
    NotPeriodic(usize),
    #[error("fields depend on {0} coordinates; at most 2 are supported")]
    TooManyCoordinates(usize),
    #[error("the action needs a gauge potential in the metric spec")]
    NoGauge,
}

/// `∫_{T^n} e dμ` on an `m × m` grid in the used coordinates; the other
/// directions contribute a factor `2π` each.
pub fn torus_integral(spec: &MetricSpec, e: &Expr, deg: usize, m: usize) -> Result<f64, QuadError> {
    let c = spec.compile()?;
    let used: Vec<usize> = c.used_coords().into_iter().collect();
    if let Some(&k) = used.iter().find(|&&k| !c.periodic[k]) {
        return Err(QuadError::NotPeriodic(k + 1));
    }
    if used.len() > 2 {
        return Err(QuadError::TooManyCoordinates(used.len()));
    }
    let deg = deg.max(required_degree(e));
    let h = std::f64::consts::TAU / m as f64;
    let cells = m.pow(used.len() as u32);
    let sum = (0..cells)
        .into_par_iter()
        .map(|cell| {
            let mut x = vec![0.0; c.n];
            let mut rest = cell;
            for &k in &used {
                x[k] = (rest % m) as f64 * h;
                rest /= m;
            }
            let mut g = Geometry::<f64>::new(&c, &x, deg, spec.seed.unwrap_or(0))?;
            let vol = g.det().sqrt();
            Ok(Evaluator::new(&mut g).eval_scalar(e)? * vol)
        })
        .collect::<Result<Vec<f64>, QuadError>>()?
        .into_iter()
        .sum::<f64>();
    Ok(sum * h.powi(used.len() as i32) * std::f64::consts::TAU.powi((c.n - used.len()) as i32))
}

/// Integrals at two resolutions; the finer one is the estimate.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct Richardson {
    pub coarse_grid: usize,
    pub coarse: f64,
    pub fine_grid: usize,
    pub fine: f64,
}

impl Richardson {
    pub fn value(&self) -> f64 {
        self.fine
    }

    pub fn disagreement(&self) -> f64 {
        (self.fine - self.coarse).abs()
    }
}

pub fn richardson(spec: &MetricSpec, e: &Expr, deg: usize, grid: usize) -> Result<Richardson, QuadError> {
    Ok(Richardson {
        coarse_grid: grid,
        coarse: torus_integral(spec, e, deg, grid)?,
        fine_grid: 2 * grid,
        fine: torus_integral(spec, e, deg, 2 * grid)?,
    })
}

/// The six-dimensional action density `⟨F, Q₂F⟩` of the spec's potential.
pub fn action_integrand() -> Expr {
    action_density(&gauge_curvature()).expect("gauge curvature is a 2-form").specialize(6)
}

pub fn action_integral(spec: &MetricSpec, deg: usize, grid: usize) -> Result<Richardson, QuadError> {
    if spec.gauge.is_none() {
        return Err(QuadError::NoGauge);
    }
    richardson(spec, &action_integrand(), deg, grid)
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Invariance {
    pub original: Richardson,
    pub rescaled: Richardson,
    /// `|S(ĝ) − S(g)| / |S(g)|` at the coarse and the fine grid.
    pub relative_coarse: f64,
    pub relative_fine: f64,
}

/// Compares the action of `spec` with that of `e^{2Υ}g`, where `Υ` is the
/// spec's conformal factor.
pub fn action_invariance(spec: &MetricSpec, deg: usize, grid: usize) -> Result<Invariance, QuadError> {
    if spec.gauge.is_none() {
        return Err(QuadError::NoGauge);
    }
    integral_invariance(spec, &action_integrand(), deg, grid)
}

/// `∫e dμ` for `g` and for `e^{2Υ}g`.
pub fn integral_invariance(spec: &MetricSpec, e: &Expr, deg: usize, grid: usize) -> Result<Invariance, QuadError> {
    let ups = spec.conformal_factor.clone().ok_or(QuadError::Geometry(GeomError::NeedsData(
        "action invariance".into(),
        "conformal factor",
    )))?;
    let plain = MetricSpec { conformal_factor: None, ..spec.clone() };
    let hat = conformal_rescale(&plain, &ups);
    let original = richardson(&plain, e, deg, grid)?;
    let rescaled = richardson(&hat, e, deg, grid)?;
    let rel = |a: f64, b: f64| (a - b).abs() / a.abs();
    Ok(Invariance {
        relative_coarse: rel(original.coarse, rescaled.coarse),
        relative_fine: rel(original.fine, rescaled.fine),
        original,
        rescaled,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::spec::{random_periodic_gauge, random_periodic_metric, random_periodic_scalar};
    use crate::forms::{d_a, delta_a};
    use crate::parse::ex;

    #[test]
    fn flat_volume() {
        let mut m = random_periodic_metric(6, 1, 0.0);
        m.metric = (0..6).map(|i| (0..6).map(|j| if i == j { "1".into() } else { "0".into() }).collect()).collect();
        let v = torus_integral(&m, &ex("1"), 2, 4).unwrap();
        assert!((v / std::f64::consts::TAU.powi(6) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zero_curvature_has_zero_action() {
        let mut m = random_periodic_metric(6, 2, 0.1);
        m.gauge = Some(random_periodic_gauge(6, 2, 3, 0.0));
        assert_eq!(action_integral(&m, 4, 4).unwrap().value(), 0.0);
    }

    #[test]
    fn divergences_integrate_to_zero() {
        let m = random_periodic_metric(6, 4, 0.15);
        let div = torus_integral(&m, &ex("nd[^a](J[])*nd[a](J[]) + J[]*nd[^a](nd[a](J[])) + nd[^a](J[])*nd[^b](P[a,b]) + J[]*nd[^a](nd[^b](P[a,b]))"), 4, 48).unwrap();
        let scale = torus_integral(&m, &ex("J[]*J[]"), 4, 48).unwrap();
        assert!(div.abs() < 1e-10 * scale.abs().max(1.0), "{div} vs {scale}");
    }

    #[test]
    fn non_periodic_specs_are_rejected() {
        let mut m = random_periodic_metric(6, 5, 0.1);
        m.periodic[0] = false;
        m.periodic[1] = false;
        assert!(matches!(torus_integral(&m, &ex("J[]"), 2, 4), Err(QuadError::NotPeriodic(_))));
    }

    #[test]
    fn action_is_conformally_invariant() {
        let mut m = random_periodic_metric(6, 7, 0.1);
        m.gauge = Some(random_periodic_gauge(6, 2, 8, 0.3));
        m.conformal_factor = Some(random_periodic_scalar(9, 0.2));
        let r = action_invariance(&m, 4, 12).unwrap();
        assert!(r.relative_fine < 1e-6, "{r:?}");
        let f = gauge_curvature();
        let ym = crate::forms::pairing(&f, &d_a(&delta_a(&f).unwrap()), 6).unwrap().specialize(6);
        let r = integral_invariance(&m, &ym, 4, 12).unwrap();
        assert!(r.relative_fine > 1e-4, "{r:?}");
    }
}
