//! Discrete check of the two quadratic-remainder estimates on
//! `B_{r_eps} \ {0}`: the Lipschitz bound in `v` and the quadratic bound.

use crate::delaunay_family::{u_eps_r_a, FamilyParams};
use crate::delaunay_ode::Dimension;
use crate::error::Result;
use crate::linearized::budget::ParameterBudget;
use crate::linearized::remainder::q_closed_form;
use crate::weighted_norms::{norm_weighted, Field, FnField, NormSpec};

/// Both sides of each estimate and the implied constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma32Report {
    /// `||Q(w+v1) - Q(w+v0)||_{(0,alpha),mu-2}`.
    pub lhs_difference: f64,
    /// `eps^{lambda_n} r^{d+1} ||v1-v0|| (||w|| + ||v1|| + ||v0||)`.
    pub rhs_difference: f64,
    /// `||Q(w)||_{(0,alpha),mu-2}`.
    pub lhs_quadratic: f64,
    /// `eps^{lambda_n} r^{3+2d-n/2-mu} ||w||^2`.
    pub rhs_quadratic: f64,
    pub lambda_n: f64,
    pub r_eps: f64,
}

impl Lemma32Report {
    pub fn difference_constant(&self) -> f64 {
        ratio(self.lhs_difference, self.rhs_difference)
    }

    pub fn quadratic_constant(&self) -> f64 {
        ratio(self.lhs_quadratic, self.rhs_quadratic)
    }
}

fn ratio(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a / b
    }
}

/// `0` for `n <= 6`, `(6-n)/(n-2)` above.
pub fn lambda_n(n: Dimension) -> f64 {
    let nf = n.as_f64();
    if n.get() <= 6 {
        0.0
    } else {
        (6.0 - nf) / (nf - 2.0)
    }
}

/// Evaluate both estimates for `w`, `v0`, `v1` with the sampled weighted
/// norms of `base` (its `k`, `mu` and `r` are overridden).
pub fn lemma32_check(
    params: &FamilyParams,
    w: &dyn Field,
    v0: &dyn Field,
    v1: &dyn Field,
    budget: &ParameterBudget,
    base: &NormSpec,
) -> Result<Lemma32Report> {
    let n = params.dimension();
    let nf = n.as_f64();
    let eps = params.orbit().epsilon();
    let r = budget.r_eps(eps);
    let d = budget.d();
    let mu = budget.mu;
    let spec = |k: usize, weight: f64| NormSpec {
        k,
        mu: weight,
        r,
        ..*base
    };
    let q_of = |x: &[f64], extra: &dyn Field| -> Result<f64> {
        let u0 = u_eps_r_a(params, x)?;
        q_closed_form(n, u0, w.value(x)? + extra.value(x)?)
    };
    let zero = FnField::new(n.get(), |_: &[f64]| 0.0);
    let diff_q = FnField::new(n.get(), |x: &[f64]| match (q_of(x, v1), q_of(x, v0)) {
        (Ok(a), Ok(b)) => a - b,
        _ => f64::NAN,
    });
    let quad_q = FnField::new(n.get(), |x: &[f64]| q_of(x, &zero).unwrap_or(f64::NAN));
    let dv = FnField::new(n.get(), |x: &[f64]| {
        v1.value(x).unwrap_or(f64::NAN) - v0.value(x).unwrap_or(f64::NAN)
    });
    let w_weight = 2.0 + d - nf / 2.0;
    let nw = norm_weighted(w, &spec(2, w_weight))?;
    let n0 = norm_weighted(v0, &spec(2, mu))?;
    let n1 = norm_weighted(v1, &spec(2, mu))?;
    let ndv = norm_weighted(&dv, &spec(2, mu))?;
    let lhs_difference = norm_weighted(&diff_q, &spec(0, mu - 2.0))?;
    let lhs_quadratic = norm_weighted(&quad_q, &spec(0, mu - 2.0))?;
    let el = eps.powf(lambda_n(n));
    Ok(Lemma32Report {
        lhs_difference,
        rhs_difference: el * r.powf(d + 1.0) * ndv * (nw + n0 + n1),
        lhs_quadratic,
        rhs_quadratic: el * r.powf(3.0 + 2.0 * d - nf / 2.0 - mu) * nw * nw,
        lambda_n: lambda_n(n),
        r_eps: r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay_ode::integrate_orbit;
    use crate::weighted_norms::PowerField;
    use std::sync::Arc;

    fn setup(eps: f64) -> (FamilyParams, ParameterBudget) {
        let n = Dimension::new(4).unwrap();
        let orbit = Arc::new(integrate_orbit(n, eps, 1e-10).unwrap());
        let params = FamilyParams::from_b(orbit, 0.0, vec![0.0; 4]).unwrap();
        (params, ParameterBudget::defaults(n))
    }

    fn spec() -> NormSpec {
        NormSpec {
            levels: 4,
            samples: 48,
            ..NormSpec::new(0, 0.5, 0.0, 1.0)
        }
    }

    fn fields(
        scale: f64,
    ) -> (
        FnField<impl Fn(&[f64]) -> f64 + Sync>,
        FnField<impl Fn(&[f64]) -> f64 + Sync>,
    ) {
        // w of weight 2 + d - n/2 = 1, v of weight mu
        let w = FnField::new(4, |x: &[f64]| {
            0.01 * (x[0] * x[0] - x[1] * x[1]) / x.iter().map(|c| c * c).sum::<f64>().sqrt()
        });
        let v = FnField::new(4, move |x: &[f64]| {
            scale * 1e-3 * x[0] * x[2] * x.iter().map(|c| c * c).sum::<f64>().powf(-0.45)
        });
        (w, v)
    }

    #[test]
    fn equal_arguments_give_zero() {
        let (params, budget) = setup(0.1);
        let (w, v) = fields(1.0);
        let rep = lemma32_check(&params, &w, &v, &v, &budget, &spec()).unwrap();
        assert_eq!(rep.lhs_difference, 0.0);
        assert_eq!(rep.difference_constant(), 0.0);
        assert!(rep.quadratic_constant() > 0.0);
    }

    #[test]
    fn difference_is_first_order() {
        let (params, budget) = setup(0.1);
        let (w, v) = fields(1.0);
        let (_, half) = fields(0.5);
        let zero = PowerField {
            n: 4,
            coefficient: 0.0,
            power: 0.0,
        };
        let a = lemma32_check(&params, &w, &zero, &v, &budget, &spec()).unwrap();
        let b = lemma32_check(&params, &w, &zero, &half, &budget, &spec()).unwrap();
        let r = b.lhs_difference / a.lhs_difference;
        assert!((r - 0.5).abs() < 0.02, "{r}");
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_n(Dimension::new(5).unwrap()), 0.0);
        assert!((lambda_n(Dimension::new(10).unwrap()) + 0.5).abs() < 1e-15);
    }
}
