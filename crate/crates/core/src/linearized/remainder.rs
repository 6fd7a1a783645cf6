//! The quadratic remainder `Q^{u0}(v)` of the constant scalar curvature
//! operator about a positive `u0`.

use crate::delaunay_ode::{signed_pow, Dimension};
use crate::error::{GluingError, Result};
use crate::quadrature::integrate;
use crate::weighted_norms::Field;

/// `Q^{u0}(v)` at a point, with a flag for `u0 + t v` changing sign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QSample {
    pub value: f64,
    pub sign_change: bool,
}

fn check(u0: f64, v: f64) -> Result<()> {
    if !(u0 > 0.0 && u0.is_finite()) {
        return Err(GluingError::Domain(format!("u0 = {u0} must be positive")));
    }
    if !v.is_finite() {
        return Err(GluingError::Domain("non-finite perturbation".into()));
    }
    Ok(())
}

/// Below this `|v/u0|` the binomial series replaces the cancelling
/// closed form.
const SERIES_RADIUS: f64 = 0.05;

/// Closed form `c(|u0+v|^{p-1}(u0+v) - u0^p - p u0^{p-1} v)`, `c = n(n-2)/4`.
pub fn q_closed_form(n: Dimension, u0: f64, v: f64) -> Result<f64> {
    check(u0, v)?;
    let p = n.critical_exponent();
    let c = n.nonlinear_coefficient();
    let x = v / u0;
    if x.abs() < SERIES_RADIUS {
        // sum_{k>=2} binom(p, k) x^k
        let mut term = p * (p - 1.0) / 2.0 * x * x;
        let mut sum = term;
        for k in 3..=14 {
            term *= (p - (k - 1) as f64) / k as f64 * x;
            sum += term;
        }
        return Ok(c * u0.powf(p) * sum);
    }
    Ok(c * (signed_pow(u0 + v, p) - u0.powf(p) - p * u0.powf(p - 1.0) * v))
}

/// `n(n+2)/4 v int_0^1 (|u0+tv|^{4/(n-2)} - u0^{4/(n-2)}) dt` by composite
/// Gauss-Legendre, split and graded where `u0 + t v` vanishes.
pub fn q_quadrature(n: Dimension, u0: f64, v: f64) -> Result<QSample> {
    check(u0, v)?;
    let e = n.conformal_exponent();
    let base = u0.powf(e);
    let f = |t: f64| (u0 + t * v).abs().powf(e) - base;
    let crossing = -u0 / v;
    let sign_change = v != 0.0 && crossing > 0.0 && crossing < 1.0;
    let integral = if sign_change {
        // t = t* -+ span sigma^3 removes the kink at the zero
        let left = integrate(
            |s| f(crossing * (1.0 - s * s * s)) * 3.0 * crossing * s * s,
            0.0,
            1.0,
            8,
            20,
        );
        let span = 1.0 - crossing;
        let right = integrate(
            |s| f(crossing + span * s * s * s) * 3.0 * span * s * s,
            0.0,
            1.0,
            8,
            20,
        );
        left + right
    } else {
        integrate(f, 0.0, 1.0, 8, 20)
    };
    Ok(QSample {
        value: n.potential_coefficient() * v * integral,
        sign_change,
    })
}

/// `Q^{u0}(v)(x)` for fields `u0` and `v`.
pub fn q_remainder(n: Dimension, u0: &dyn Field, v: &dyn Field, x: &[f64]) -> Result<QSample> {
    let a = u0.value(x)?;
    let b = v.value(x)?;
    let value = q_closed_form(n, a, b)?;
    Ok(QSample {
        value,
        sign_change: a + b < 0.0,
    })
}
