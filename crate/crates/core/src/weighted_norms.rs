//! Sampled weighted Holder norms on dyadic annuli and Holder norms of
//! sphere data.
//!
//! All values are lower bounds for the true suprema: sups are taken over a
//! fixed sample set and Holder quotients over all pairs in it. The sample
//! set lives on the unit annulus `1 <= |x| <= 2` and is scaled by `sigma`, so
//! exactly homogeneous functions give exactly scale-invariant norms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::delaunay_family::Jet;
use crate::error::{GluingError, Result};

/// A scalar field on a region of `R^n` with up to two derivatives.
///
/// Only `value` is required; derivatives default to central differences
/// with steps proportional to `|x|`.
pub trait Field: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let h = GRAD_STEP * norm(x).max(f64::MIN_POSITIVE);
        let mut g = Vec::with_capacity(x.len());
        let mut y = x.to_vec();
        for i in 0..x.len() {
            y[i] = x[i] + h;
            let fp = self.value(&y)?;
            y[i] = x[i] - h;
            let fm = self.value(&y)?;
            y[i] = x[i];
            g.push((fp - fm) / (2.0 * h));
        }
        Ok(g)
    }

    fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let h = HESS_STEP * norm(x).max(f64::MIN_POSITIVE);
        let n = x.len();
        let f0 = self.value(x)?;
        let mut hess = vec![vec![0.0; n]; n];
        let mut y = x.to_vec();
        for i in 0..n {
            y[i] = x[i] + h;
            let fp = self.value(&y)?;
            y[i] = x[i] - h;
            let fm = self.value(&y)?;
            y[i] = x[i];
            hess[i][i] = (fp - 2.0 * f0 + fm) / (h * h);
            for j in 0..i {
                let mut s = 0.0;
                for (si, sj) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                    y[i] = x[i] + si * h;
                    y[j] = x[j] + sj * h;
                    s += si * sj * self.value(&y)?;
                }
                y[i] = x[i];
                y[j] = x[j];
                hess[i][j] = s / (4.0 * h * h);
                hess[j][i] = hess[i][j];
            }
        }
        Ok(hess)
    }
}

/// Relative step for finite-difference gradients.
pub const GRAD_STEP: f64 = 1e-5;
/// Relative step for finite-difference Hessians (balances `h^2` truncation
/// against `eps/h^2` round-off).
pub const HESS_STEP: f64 = 1e-4;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// Field given by a closure, derivatives by finite differences.
pub struct FnField<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnField<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnField { n, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Field for FnField<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

/// Field given by a closure returning a full [`Jet`].
pub struct JetField<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> Result<Jet> + Sync> JetField<F> {
    pub fn new(n: usize, f: F) -> Self {
        JetField { n, f }
    }
}

impl<F: Fn(&[f64]) -> Result<Jet> + Sync> Field for JetField<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x)?.value)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok((self.f)(x)?.gradient)
    }
    fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok((self.f)(x)?.hessian)
    }
}

/// `c |x|^p` with analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct PowerField {
    pub n: usize,
    pub coefficient: f64,
    pub power: f64,
}

impl Field for PowerField {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.coefficient * norm(x).powf(self.power))
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let r = norm(x);
        let c = self.coefficient * self.power * r.powf(self.power - 2.0);
        Ok(x.iter().map(|xi| c * xi).collect())
    }
    fn hessian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let r = norm(x);
        let p = self.power;
        let c = self.coefficient * p * r.powf(p - 2.0);
        let n = x.len();
        let mut h = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let d = if i == j { 1.0 } else { 0.0 };
                h[i][j] = c * (d + (p - 2.0) * x[i] * x[j] / (r * r));
            }
        }
        Ok(h)
    }
}

/// Parameters of a sampled weighted norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormSpec {
    pub k: usize,
    pub alpha: f64,
    pub mu: f64,
    pub r: f64,
    pub levels: usize,
    pub samples: usize,
    pub seed: u64,
}

impl NormSpec {
    pub fn new(k: usize, alpha: f64, mu: f64, r: f64) -> Self {
        NormSpec {
            k,
            alpha,
            mu,
            r,
            levels: 6,
            samples: 160,
            seed: 0x5eed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k > 2 {
            return Err(GluingError::Parameter(format!(
                "k = {} outside 0..=2",
                self.k
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GluingError::Parameter(format!(
                "alpha = {} outside (0,1)",
                self.alpha
            )));
        }
        if self.levels < 1 || self.samples < 2 {
            return Err(GluingError::Parameter(
                "need levels >= 1 and samples >= 2".into(),
            ));
        }
        if !(self.r > 0.0) {
            return Err(GluingError::Parameter(format!(
                "r = {} must be positive",
                self.r
            )));
        }
        Ok(())
    }
}

/// Stratified points on `1 <= |x| <= 2` in `R^n`; the first two lie on the
/// inner and outer spheres.
pub fn unit_annulus_points(n: usize, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e37_79b9));
    let mut pts = Vec::with_capacity(samples);
    for i in 0..samples {
        let rho = match i {
            0 => 1.0,
            1 => 2.0,
            _ => 1.0 + ((i - 2) as f64 + rng.random::<f64>()) / (samples - 2).max(1) as f64,
        };
        let mut g: Vec<f64>;
        loop {
            g = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            if norm(&g) > 1e-8 {
                break;
            }
        }
        let s = rho / norm(&g);
        pts.push(g.iter().map(|c| c * s).collect());
    }
    pts
}

/// Derivative of order `k` flattened: value, gradient or Hessian entries.
fn derivative_data(f: &dyn Field, x: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![vec![f.value(x)?]];
    if k >= 1 {
        out.push(f.gradient(x)?);
    }
    if k >= 2 {
        out.push(f.hessian(x)?.into_iter().flatten().collect());
    }
    Ok(out)
}

/// Sup-part and Holder quotient over a point set; `scale` multiplies the
/// `j`-th derivative by `scale^j` and the Holder term by `scale^{k+alpha}`.
fn holder_norm_on(
    f: &dyn Field,
    points: &[Vec<f64>],
    k: usize,
    alpha: f64,
    scale: f64,
) -> Result<f64> {
    let data: Vec<Vec<Vec<f64>>> = points
        .par_iter()
        .map(|x| derivative_data(f, x, k))
        .collect::<Result<_>>()?;
    let sup = data
        .iter()
        .map(|d| {
            d.iter()
                .enumerate()
                .map(|(j, v)| scale.powi(j as i32) * norm(v))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    let holder = (0..points.len())
        .into_par_iter()
        .map(|i| {
            let mut best: f64 = 0.0;
            for j in (i + 1)..points.len() {
                let dist: f64 = points[i]
                    .iter()
                    .zip(&points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if dist == 0.0 {
                    continue;
                }
                let diff: f64 = data[i][k]
                    .iter()
                    .zip(&data[j][k])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                best = best.max(diff / dist.powf(alpha));
            }
            best
        })
        .reduce(|| 0.0, f64::max);
    Ok(sup + scale.powf(k as f64 + alpha) * holder)
}

/// `||u||_{(k,alpha),[sigma,2sigma]}` on the sampled annulus.
pub fn norm_annulus(f: &dyn Field, spec: &NormSpec, sigma: f64) -> Result<f64> {
    spec.validate()?;
    if !(sigma > 0.0) {
        return Err(GluingError::Parameter(format!(
            "sigma = {sigma} must be positive"
        )));
    }
    let pts: Vec<Vec<f64>> = unit_annulus_points(f.dim(), spec.samples, spec.seed)
        .into_iter()
        .map(|p| p.into_iter().map(|c| c * sigma).collect())
        .collect();
    holder_norm_on(f, &pts, spec.k, spec.alpha, sigma)
}

/// [`norm_annulus`] plus a refinement check with twice the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusEstimate {
    pub value: f64,
    pub refined: f64,
    /// Refinement changed the value by less than 1%.
    pub converged: bool,
}

pub fn norm_annulus_checked(f: &dyn Field, spec: &NormSpec, sigma: f64) -> Result<AnnulusEstimate> {
    let value = norm_annulus(f, spec, sigma)?;
    let fine = NormSpec {
        samples: 2 * spec.samples,
        ..*spec
    };
    let refined = norm_annulus(f, &fine, sigma)?.max(value);
    Ok(AnnulusEstimate {
        value,
        refined,
        converged: (refined - value) <= 0.01 * refined.abs().max(f64::MIN_POSITIVE),
    })
}

/// `sigma^{-mu} ||u||_{[sigma, 2sigma]}` for `sigma = r/2, r/4, ...`.
pub fn weighted_levels(f: &dyn Field, spec: &NormSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    (1..=spec.levels)
        .map(|j| {
            let sigma = spec.r / 2f64.powi(j as i32);
            Ok(sigma.powf(-spec.mu) * norm_annulus(f, spec, sigma)?)
        })
        .collect()
}

/// `||u||_{(k,alpha),mu,r}`: sup over the dyadic levels.
pub fn norm_weighted(f: &dyn Field, spec: &NormSpec) -> Result<f64> {
    Ok(weighted_levels(f, spec)?.into_iter().fold(0.0, f64::max))
}

/// Exterior analogue: sup of `sigma^{-mu} ||u||_{[sigma,2sigma]}` over
/// `sigma = r, 2r, 4r, ...`.
pub fn norm_weighted_exterior(f: &dyn Field, spec: &NormSpec) -> Result<f64> {
    spec.validate()?;
    let mut best: f64 = 0.0;
    for j in 0..spec.levels {
        let sigma = spec.r * 2f64.powi(j as i32);
        best = best.max(sigma.powf(-spec.mu) * norm_annulus(f, spec, sigma)?);
    }
    Ok(best)
}

/// Degree-zero extension `x -> phi(r x / |x|)`.
struct SpherePullback<'a> {
    n: usize,
    r: f64,
    phi: &'a (dyn Fn(&[f64]) -> f64 + Sync),
}

impl Field for SpherePullback<'_> {
    fn dim(&self) -> usize {
        self.n
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let s = self.r / norm(x);
        let y: Vec<f64> = x.iter().map(|c| c * s).collect();
        Ok((self.phi)(&y))
    }
}

/// `||phi(r .)||_{C^{k,alpha}(S^{n-1})}` sampled on `samples` unit vectors,
/// with derivatives of the degree-zero extension and chordal distances.
pub fn norm_sphere(
    phi: &(dyn Fn(&[f64]) -> f64 + Sync),
    n: usize,
    k: usize,
    alpha: f64,
    r: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let spec = NormSpec {
        k,
        alpha,
        mu: 0.0,
        r,
        levels: 1,
        samples,
        seed,
    };
    spec.validate()?;
    let pts: Vec<Vec<f64>> = unit_annulus_points(n, samples, seed)
        .into_iter()
        .map(|p| {
            let s = norm(&p);
            p.into_iter().map(|c| c / s).collect()
        })
        .collect();
    let field = SpherePullback { n, r, phi };
    holder_norm_on(&field, &pts, k, alpha, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_field() {
        let f = FnField::new(3, |_: &[f64]| -2.5);
        let spec = NormSpec::new(0, 0.5, 0.0, 1.0);
        assert!((norm_annulus(&f, &spec, 0.3).unwrap() - 2.5).abs() < 1e-15);
        let spec2 = NormSpec::new(2, 0.5, 0.0, 1.0);
        assert!((norm_annulus(&f, &spec2, 0.3).unwrap() - 2.5).abs() < 1e-6);
    }

    #[test]
    fn modulus_at_unit_scale() {
        let f = FnField::new(4, |x: &[f64]| norm(x));
        let spec = NormSpec::new(0, 0.5, 0.0, 1.0);
        let v = norm_annulus(&f, &spec, 1.0).unwrap();
        assert!(v >= 2.0);
        // sup part is 2 and ||x|-|y|| / |x-y|^{1/2} <= |x-y|^{1/2} <= 2
        assert!(v <= 4.0 + 1e-12);
    }

    #[test]
    fn homogeneous_field_is_scale_free() {
        let mu = 1.3;
        let f = PowerField {
            n: 4,
            coefficient: 1.0,
            power: mu,
        };
        let spec = NormSpec::new(2, 0.4, mu, 1.0);
        let a = 0.1f64.powf(-mu) * norm_annulus(&f, &spec, 0.1).unwrap();
        let b = 0.003f64.powf(-mu) * norm_annulus(&f, &spec, 0.003).unwrap();
        assert!((a - b).abs() < 1e-10 * a);
    }

    #[test]
    fn finite_differences_match_analytic() {
        let p = PowerField {
            n: 3,
            coefficient: 2.0,
            power: -0.7,
        };
        let fd = FnField::new(3, move |x: &[f64]| 2.0 * norm(x).powf(-0.7));
        let x = [0.02, -0.01, 0.03];
        let (g1, g2) = (p.gradient(&x).unwrap(), fd.gradient(&x).unwrap());
        let (h1, h2) = (p.hessian(&x).unwrap(), fd.hessian(&x).unwrap());
        for i in 0..3 {
            assert!((g1[i] - g2[i]).abs() < 1e-8 * norm(&g1));
            for j in 0..3 {
                assert!((h1[i][j] - h2[i][j]).abs() < 1e-5 * h1[i][i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn mismatched_weight_grows() {
        let f = PowerField {
            n: 3,
            coefficient: 1.0,
            power: 0.5,
        };
        let spec = NormSpec::new(0, 0.5, 1.5, 1.0);
        let lv = weighted_levels(&f, &spec).unwrap();
        assert!(lv.windows(2).all(|w| w[1] > 1.9 * w[0]));
    }

    #[test]
    fn sphere_norm_examples() {
        let c = |_: &[f64]| 4.0;
        assert!((norm_sphere(&c, 4, 2, 0.5, 0.3, 64, 1).unwrap() - 4.0).abs() < 1e-6);
        let r = 0.25;
        let phi = |x: &[f64]| x[0];
        let unit = |x: &[f64]| x[0];
        let a = norm_sphere(&phi, 4, 1, 0.5, r, 64, 1).unwrap();
        let b = norm_sphere(&unit, 4, 1, 0.5, 1.0, 64, 1).unwrap();
        assert!((a - r * b).abs() < 1e-9 * b);
    }

    #[test]
    fn invalid_spec() {
        let f = FnField::new(3, |_: &[f64]| 1.0);
        let mut spec = NormSpec::new(0, 1.5, 0.0, 1.0);
        assert!(norm_annulus(&f, &spec, 1.0).is_err());
        spec.alpha = 0.5;
        spec.k = 3;
        assert!(norm_annulus(&f, &spec, 1.0).is_err());
    }
}
