//! The singular solutions `u_eps`, `u_{eps,R}` and `u_{eps,R,a}` built from a
//! Fowler orbit, with analytic radial derivatives and full second-order jets.

use std::sync::Arc;

use crate::delaunay_ode::{signed_pow, DelaunayOrbit, Dimension};
use crate::error::{GluingError, Result};

/// Default validity radius for the translation of the point at infinity.
pub const DEFAULT_R0: f64 = 0.5;

/// Data selecting one member of the translated Delaunay family.
#[derive(Debug, Clone)]
pub struct FamilyParams {
    orbit: Arc<DelaunayOrbit>,
    r_scale: f64,
    a: Vec<f64>,
    b: Option<f64>,
    r0: f64,
}

impl FamilyParams {
    pub fn new(orbit: Arc<DelaunayOrbit>, r_scale: f64, a: Vec<f64>) -> Result<Self> {
        let n = orbit.dimension().get();
        if !(r_scale > 0.0) || !r_scale.is_finite() {
            return Err(GluingError::Parameter(format!(
                "R = {r_scale} must be positive"
            )));
        }
        if a.len() != n {
            return Err(GluingError::Parameter(format!(
                "translation has {} components, expected {n}",
                a.len()
            )));
        }
        Ok(FamilyParams {
            orbit,
            r_scale,
            a,
            b: None,
            r0: DEFAULT_R0,
        })
    }

    /// Fix `R` through the neck offset `b`, `R^{(2-n)/2} = 2(1+b)/eps`.
    pub fn from_b(orbit: Arc<DelaunayOrbit>, b: f64, a: Vec<f64>) -> Result<Self> {
        let r_scale = neck_radius_from_b(orbit.dimension(), orbit.epsilon(), b)?;
        let mut p = FamilyParams::new(orbit, r_scale, a)?;
        p.b = Some(b);
        Ok(p)
    }

    pub fn with_r0(mut self, r0: f64) -> Result<Self> {
        if !(r0 > 0.0 && r0 < 1.0) {
            return Err(GluingError::Parameter(format!("r0 = {r0} outside (0, 1)")));
        }
        self.r0 = r0;
        Ok(self)
    }

    pub fn orbit(&self) -> &DelaunayOrbit {
        &self.orbit
    }

    pub fn orbit_arc(&self) -> Arc<DelaunayOrbit> {
        Arc::clone(&self.orbit)
    }

    pub fn dimension(&self) -> Dimension {
        self.orbit.dimension()
    }

    pub fn r_scale(&self) -> f64 {
        self.r_scale
    }

    pub fn a(&self) -> &[f64] {
        &self.a
    }

    pub fn b(&self) -> Option<f64> {
        self.b
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    /// Same orbit and `R`, translation replaced.
    pub fn with_a(&self, a: Vec<f64>) -> Result<Self> {
        let mut p = FamilyParams::new(Arc::clone(&self.orbit), self.r_scale, a)?;
        p.b = self.b;
        p.r0 = self.r0;
        Ok(p)
    }
}

/// `R = (2(1+b)/eps)^{2/(2-n)}`.
pub fn neck_radius_from_b(n: Dimension, epsilon: f64, b: f64) -> Result<f64> {
    if !(b.abs() <= 0.5) {
        return Err(GluingError::Parameter(format!(
            "|b| = {} exceeds 1/2",
            b.abs()
        )));
    }
    let cyl = n.cylinder_value();
    if !(epsilon > 0.0 && epsilon < cyl) {
        return Err(GluingError::Parameter(format!(
            "epsilon = {epsilon} outside (0, {cyl})"
        )));
    }
    let nf = n.as_f64();
    Ok((2.0 * (1.0 + b) / epsilon).powf(2.0 / (2.0 - nf)))
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `(u, r u_r, r^2 u_rr)` for `u(r) = r^k v(t)` at `t = log(R/r)`.
fn radial_triple(orbit: &DelaunayOrbit, r_scale: f64, r: f64) -> (f64, f64, f64) {
    let k = orbit.dimension().radial_exponent();
    let (v, vp, vpp) = orbit.eval((r_scale / r).ln());
    let rk = r.powf(k);
    (
        rk * v,
        rk * (k * v - vp),
        rk * (k * k * v - 2.0 * k * vp + vpp - k * v + vp),
    )
}

/// `u_eps(x) = |x|^{(2-n)/2} v_eps(-log|x|)`.
pub fn u_eps(orbit: &DelaunayOrbit, x: &[f64]) -> Result<f64> {
    let r = norm(x);
    if r == 0.0 {
        return Err(GluingError::SingularPoint(
            "u_eps evaluated at the origin".into(),
        ));
    }
    if r > 1.0 {
        return Err(GluingError::Parameter(format!("|x| = {r} exceeds 1")));
    }
    Ok(radial_triple(orbit, 1.0, r).0)
}

/// `(u_eps, r d_r u_eps, r^2 d_r^2 u_eps)` at radius `r`.
pub fn u_eps_radial(orbit: &DelaunayOrbit, r: f64) -> Result<(f64, f64, f64)> {
    if !(r > 0.0) {
        return Err(GluingError::SingularPoint(format!(
            "radius {r} is not positive"
        )));
    }
    Ok(radial_triple(orbit, 1.0, r))
}

/// `(u, r d_r u, r^2 d_r^2 u)` for `u_{eps,R}(x) = R^{(2-n)/2} u_eps(x/R)`.
pub fn u_eps_r(params: &FamilyParams, r: f64) -> Result<(f64, f64, f64)> {
    if !(r > 0.0) {
        return Err(GluingError::SingularPoint(format!(
            "radius {r} is not positive"
        )));
    }
    Ok(radial_triple(&params.orbit, params.r_scale, r))
}

/// Value, gradient and Hessian of a scalar field at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

impl Jet {
    pub fn laplacian(&self) -> f64 {
        (0..self.gradient.len()).map(|i| self.hessian[i][i]).sum()
    }
}

fn check_translation(params: &FamilyParams, r: f64) -> Result<()> {
    if r == 0.0 {
        return Err(GluingError::SingularPoint(
            "u_{eps,R,a} at the origin".into(),
        ));
    }
    if r > 1.0 {
        return Err(GluingError::Parameter(format!("|x| = {r} exceeds 1")));
    }
    let ar = norm(&params.a) * r;
    if ar >= params.r0 {
        return Err(GluingError::Parameter(format!(
            "|a||x| = {ar} not below r0 = {}",
            params.r0
        )));
    }
    Ok(())
}

/// `u_{eps,R,a}(x) = |y|^{(2-n)/2} v(-2 log|x| + log|y| + log R)`, `y = x - a|x|^2`.
pub fn u_eps_r_a(params: &FamilyParams, x: &[f64]) -> Result<f64> {
    let r = norm(x);
    check_translation(params, r)?;
    let r2 = r * r;
    let y: Vec<f64> = x
        .iter()
        .zip(&params.a)
        .map(|(xi, ai)| xi - ai * r2)
        .collect();
    let ny = norm(&y);
    let k = params.dimension().radial_exponent();
    let s = -2.0 * r.ln() + ny.ln() + params.r_scale.ln();
    Ok(ny.powf(k) * params.orbit.eval(s).0)
}

/// Full second-order jet of `u_{eps,R,a}` by the chain rule through `v`.
pub fn u_eps_r_a_jet(params: &FamilyParams, x: &[f64]) -> Result<Jet> {
    let n = x.len();
    let r = norm(x);
    check_translation(params, r)?;
    let a = &params.a;
    let r2 = r * r;
    let y: Vec<f64> = x.iter().zip(a).map(|(xi, ai)| xi - ai * r2).collect();
    let y2: f64 = y.iter().map(|c| c * c).sum();
    let ny = y2.sqrt();
    let k = params.dimension().radial_exponent();
    let s = -r2.ln() + ny.ln() + params.r_scale.ln();
    let (v, vp, vpp) = params.orbit.eval(s);

    // J = I - 2 a x^T,  g = J^T y
    let ay: f64 = a.iter().zip(&y).map(|(ai, yi)| ai * yi).sum();
    let g: Vec<f64> = (0..n).map(|j| y[j] - 2.0 * x[j] * ay).collect();
    let a2: f64 = a.iter().map(|c| c * c).sum();
    // (J^T J)_{jk} - 2 (a.y) delta_{jk}
    let dg = |j: usize, kk: usize| -> f64 {
        let delta = if j == kk { 1.0 } else { 0.0 };
        delta - 2.0 * a[j] * x[kk] - 2.0 * a[kk] * x[j] + 4.0 * a2 * x[j] * x[kk] - 2.0 * ay * delta
    };

    let f1 = ny.powf(k);
    let grad_f1: Vec<f64> = g.iter().map(|gj| k * ny.powf(k - 2.0) * gj).collect();
    let grad_s: Vec<f64> = (0..n).map(|j| -2.0 * x[j] / r2 + g[j] / y2).collect();

    let mut hessian = vec![vec![0.0; n]; n];
    for j in 0..n {
        for kk in 0..n {
            let delta = if j == kk { 1.0 } else { 0.0 };
            let dgjk = dg(j, kk);
            let h_f1 =
                k * (k - 2.0) * ny.powf(k - 4.0) * g[j] * g[kk] + k * ny.powf(k - 2.0) * dgjk;
            let h_s = -2.0 * delta / r2 + 4.0 * x[j] * x[kk] / (r2 * r2) + dgjk / y2
                - 2.0 * g[j] * g[kk] / (y2 * y2);
            hessian[j][kk] = v * h_f1
                + vp * (grad_f1[j] * grad_s[kk] + grad_s[j] * grad_f1[kk])
                + f1 * vpp * grad_s[j] * grad_s[kk]
                + f1 * vp * h_s;
        }
    }
    let gradient = (0..n)
        .map(|j| v * grad_f1[j] + f1 * vp * grad_s[j])
        .collect();
    Ok(Jet {
        value: f1 * v,
        gradient,
        hessian,
    })
}

/// `H_delta(u) = Delta u + n(n-2)/4 |u|^{4/(n-2)} u` from a jet.
pub fn flat_yamabe_residual(n: Dimension, jet: &Jet) -> f64 {
    jet.laplacian() + n.nonlinear_coefficient() * signed_pow(jet.value, n.critical_exponent())
}

/// `u_{eps,R,a} - u_{eps,R} - ((n-2) u_{eps,R} + |x| d_r u_{eps,R}) a.x`.
pub fn first_order_remainder(params: &FamilyParams, x: &[f64]) -> Result<f64> {
    let r = norm(x);
    let full = u_eps_r_a(params, x)?;
    let (u, ru, _) = u_eps_r(params, r)?;
    let nf = params.dimension().as_f64();
    let ax: f64 = params.a.iter().zip(x).map(|(ai, xi)| ai * xi).sum();
    Ok(full - u - ((nf - 2.0) * u + ru) * ax)
}

/// Sup over a radial grid of the three errors against `eps/2 (1 + r^{2-n})`,
/// each divided by `eps^{(n+2)/(n-2)} r^{-n}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prop22Report {
    pub value_ratio: f64,
    pub first_ratio: f64,
    pub second_ratio: f64,
}

impl Prop22Report {
    pub fn max_ratio(&self) -> f64 {
        self.value_ratio
            .max(self.first_ratio)
            .max(self.second_ratio)
    }
}

/// Leading-order comparison for `u_eps` on `radii`.
///
/// The second-derivative comparison uses `(n-1)(n-2)/2 eps r^{2-n}`, which is
/// what `r^2 d_r^2` of the leading term produces.
pub fn check_prop22(orbit: &DelaunayOrbit, radii: &[f64]) -> Result<Prop22Report> {
    let n = orbit.dimension();
    let nf = n.as_f64();
    let eps = orbit.epsilon();
    let ep = eps.powf(n.critical_exponent());
    let mut rep = Prop22Report {
        value_ratio: 0.0,
        first_ratio: 0.0,
        second_ratio: 0.0,
    };
    for &r in radii {
        if !(r > 0.0 && r <= 1.0) {
            return Err(GluingError::Parameter(format!("radius {r} outside (0, 1]")));
        }
        let (u, ru, rru) = radial_triple(orbit, 1.0, r);
        let tail = r.powf(2.0 - nf);
        let scale = ep * r.powf(-nf);
        let e0 = (u - 0.5 * eps * (1.0 + tail)).abs() / scale;
        let e1 = (ru + 0.5 * (nf - 2.0) * eps * tail).abs() / scale;
        let e2 = (rru - 0.5 * (nf - 1.0) * (nf - 2.0) * eps * tail).abs() / scale;
        rep.value_ratio = rep.value_ratio.max(e0);
        rep.first_ratio = rep.first_ratio.max(e1);
        rep.second_ratio = rep.second_ratio.max(e2);
    }
    Ok(rep)
}

/// Value and first-derivative errors of `u_{eps,R}` against the leading
/// terms `eps/2 (R^{(2-n)/2} + R^{(n-2)/2} r^{2-n})`.
pub fn leading_term_errors(params: &FamilyParams, r: f64) -> Result<(f64, f64)> {
    let (u, ru, _) = u_eps_r(params, r)?;
    let nf = params.dimension().as_f64();
    let eps = params.orbit.epsilon();
    let big_r = params.r_scale;
    let k = params.dimension().radial_exponent();
    let lead = 0.5 * eps * (big_r.powf(k) + big_r.powf(-k) * r.powf(2.0 - nf));
    let lead_d = 0.5 * (2.0 - nf) * eps * big_r.powf(-k) * r.powf(2.0 - nf);
    Ok((u - lead, ru - lead_d))
}

/// Fixed sample directions: coordinate axes with both signs plus the
/// normalized diagonal.
pub fn sample_directions(n: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::with_capacity(2 * n + 1);
    for i in 0..n {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = sign;
            dirs.push(e);
        }
    }
    dirs.push(vec![1.0 / (n as f64).sqrt(); n]);
    dirs
}

/// Smallest `u / (eps |x|^{(2-n)/2})` and largest `u / |x|^{(2-n)/2}` over the
/// given radii and [`sample_directions`].
pub fn bracketing_constants(params: &FamilyParams, radii: &[f64]) -> Result<(f64, f64)> {
    let n = params.dimension();
    let k = n.radial_exponent();
    let eps = params.orbit.epsilon();
    let (mut c1, mut c2) = (f64::INFINITY, 0.0_f64);
    for dir in sample_directions(n.get()) {
        for &r in radii {
            let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
            let u = u_eps_r_a(params, &x)?;
            let w = r.powf(k);
            c1 = c1.min(u / (eps * w));
            c2 = c2.max(u / w);
        }
    }
    Ok((c1, c2))
}

/// Largest `|u_a^{4/(n-2)} - u_0^{4/(n-2)}| |x| / |a|` over the given radii and
/// [`sample_directions`].
pub fn conformal_difference_constant(params: &FamilyParams, radii: &[f64]) -> Result<f64> {
    let n = params.dimension();
    let q = n.conformal_exponent();
    let amag = norm(&params.a);
    if amag == 0.0 {
        return Ok(0.0);
    }
    let mut worst: f64 = 0.0;
    for dir in sample_directions(n.get()) {
        for &r in radii {
            let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
            let ua = u_eps_r_a(params, &x)?;
            let u0 = u_eps_r(params, r)?.0;
            worst = worst.max((ua.powf(q) - u0.powf(q)).abs() * r / amag);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay_ode::integrate_orbit;

    fn orbit(n: usize, eps: f64) -> Arc<DelaunayOrbit> {
        Arc::new(integrate_orbit(Dimension::new(n).unwrap(), eps, 1e-10).unwrap())
    }

    #[test]
    fn u_eps_basic_values() {
        let o = orbit(4, 0.3);
        let x = [1.0, 0.0, 0.0, 0.0];
        assert!((u_eps(&o, &x).unwrap() - 0.3).abs() < 1e-14);
        let r = (-o.period()).exp();
        let got = u_eps(&o, &[0.0, r, 0.0, 0.0]).unwrap();
        assert!((got - o.period().exp() * 0.3).abs() < 1e-8 * got);
        assert!(matches!(
            u_eps(&o, &[0.0; 4]),
            Err(GluingError::SingularPoint(_))
        ));
    }

    #[test]
    fn neck_radius_examples() {
        let n = Dimension::new(4).unwrap();
        assert!((neck_radius_from_b(n, 0.1, 0.0).unwrap() - 0.05).abs() < 1e-15);
        assert!(neck_radius_from_b(n, 0.1, -1.0).is_err());
        assert!(neck_radius_from_b(n, 0.1, 0.0).unwrap() < 0.1f64.powf(0.6));
    }

    #[test]
    fn r_equal_one_reduces_to_u_eps() {
        let o = orbit(5, 0.2);
        let p = FamilyParams::new(o.clone(), 1.0, vec![0.0; 5]).unwrap();
        for &r in &[0.9, 0.3, 0.01] {
            assert_eq!(u_eps_r(&p, r).unwrap(), u_eps_radial(&o, r).unwrap());
        }
    }

    #[test]
    fn zero_translation_matches_radial() {
        let o = orbit(4, 0.2);
        let p = FamilyParams::new(o, 0.07, vec![0.0; 4]).unwrap();
        let x = [0.1, -0.2, 0.05, 0.3];
        let r = norm(&x);
        let a = u_eps_r_a(&p, &x).unwrap();
        let b = u_eps_r(&p, r).unwrap().0;
        assert!((a - b).abs() <= 1e-14 * b);
    }

    #[test]
    fn translation_gate() {
        let o = orbit(4, 0.2);
        let p = FamilyParams::new(o, 1.0, vec![0.8, 0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            u_eps_r_a(&p, &[0.7, 0.0, 0.0, 0.0]),
            Err(GluingError::Parameter(_))
        ));
        assert!(u_eps_r_a(&p, &[0.5, 0.0, 0.0, 0.0]).is_ok());
    }

    #[test]
    fn jet_matches_finite_differences() {
        let o = orbit(4, 0.2);
        let p = FamilyParams::new(o, 0.3, vec![0.1, -0.05, 0.02, 0.0]).unwrap();
        let x = [0.2, 0.1, -0.15, 0.05];
        let jet = u_eps_r_a_jet(&p, &x).unwrap();
        assert!((jet.value - u_eps_r_a(&p, &x).unwrap()).abs() < 1e-14);
        let h = 1e-5;
        for i in 0..4 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += h;
            xm[i] -= h;
            let fd = (u_eps_r_a(&p, &xp).unwrap() - u_eps_r_a(&p, &xm).unwrap()) / (2.0 * h);
            assert!((fd - jet.gradient[i]).abs() < 1e-6 * (1.0 + fd.abs()));
            let jp = u_eps_r_a_jet(&p, &xp).unwrap();
            let jm = u_eps_r_a_jet(&p, &xm).unwrap();
            for j in 0..4 {
                let fd2 = (jp.gradient[j] - jm.gradient[j]) / (2.0 * h);
                assert!((fd2 - jet.hessian[i][j]).abs() < 1e-5 * (1.0 + fd2.abs()));
            }
        }
    }

    #[test]
    fn translated_family_solves_flat_equation() {
        let o = orbit(4, 0.2);
        let n = o.dimension();
        let p = FamilyParams::new(o, 1.0, vec![0.1, 0.0, 0.0, 0.0]).unwrap();
        for dir in sample_directions(4) {
            for k in 0..20 {
                let r = 0.05 + 0.045 * k as f64;
                let x: Vec<f64> = dir.iter().map(|d| d * r).collect();
                let jet = u_eps_r_a_jet(&p, &x).unwrap();
                let scale = n.nonlinear_coefficient() * jet.value.powf(n.critical_exponent())
                    + jet
                        .hessian
                        .iter()
                        .enumerate()
                        .map(|(i, row)| row[i].abs())
                        .sum::<f64>();
                assert!(flat_yamabe_residual(n, &jet).abs() < 1e-6 * scale);
            }
        }
    }

    #[test]
    fn prop22_exact_at_unit_radius() {
        let o = orbit(4, 0.1);
        let rep = check_prop22(&o, &[1.0]).unwrap();
        assert!(rep.value_ratio < 1e-12);
    }

    #[test]
    fn first_order_remainder_is_quadratic() {
        let o = orbit(4, 0.2);
        let x = [0.3, 0.2, -0.1, 0.1];
        let big = FamilyParams::new(o.clone(), 1.0, vec![0.2, 0.1, 0.0, 0.0]).unwrap();
        let small = big.with_a(vec![0.1, 0.05, 0.0, 0.0]).unwrap();
        let ratio =
            first_order_remainder(&big, &x).unwrap() / first_order_remainder(&small, &x).unwrap();
        assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
    }
}
