//! Exact monomial integrals over `S^{n-1}` and quadrature rules for
//! non-polynomial sphere data.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::delaunay_ode::Dimension;
use crate::error::{GluingError, Result};
use crate::quadrature::gauss_legendre;

/// `Gamma(k/2)` for integer `k >= 1`.
fn gamma_half(k: u32) -> f64 {
    debug_assert!(k >= 1);
    let (mut g, mut x) = if k % 2 == 0 {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    let target = k as f64 / 2.0;
    while x < target {
        g *= x;
        x += 1.0;
    }
    g
}

pub(crate) fn integrate_monomial_sphere_raw(alpha: &[u32]) -> f64 {
    if alpha.iter().any(|a| a % 2 == 1) {
        return 0.0;
    }
    let num: f64 = alpha.iter().map(|&a| gamma_half(a + 1)).product();
    let total: u32 = alpha.iter().map(|a| a + 1).sum();
    2.0 * num / gamma_half(total)
}

/// `|S^{n-1}| = 2 pi^{n/2} / Gamma(n/2)`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma_half(n as u32)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadratureKind {
    /// Product rule in hyperspherical angles with `order` nodes per polar
    /// angle and `2 * order` azimuthal nodes.
    Product { order: usize },
    /// Antithetic pairs `+-g/|g|` with `g` standard normal.
    MonteCarlo { pairs: usize, seed: u64 },
}

/// An integral together with an estimate of its error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
}

/// Points and weights on the unit sphere; weights sum to `|S^{n-1}|`.
#[derive(Debug, Clone)]
pub struct SphereQuadrature {
    n: usize,
    kind: QuadratureKind,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    coarse: Option<Box<SphereQuadrature>>,
}

fn polar_rule(order: usize, j: usize) -> (Vec<f64>, Vec<f64>) {
    // int_0^pi g(cos phi) sin^j phi dphi = int_{-1}^1 g(z) (1-z^2)^{(j-1)/2} dz
    if j % 2 == 1 {
        let (z, w) = gauss_legendre(order);
        let p = ((j - 1) / 2) as i32;
        let w = z
            .iter()
            .zip(&w)
            .map(|(z, w)| w * (1.0 - z * z).powi(p))
            .collect();
        (z, w)
    } else {
        // Gauss-Chebyshev of the second kind carries one factor sqrt(1-z^2)
        let m = order as f64;
        let p = ((j - 2) / 2) as i32;
        let mut z = Vec::with_capacity(order);
        let mut w = Vec::with_capacity(order);
        for i in 1..=order {
            let th = i as f64 * PI / (m + 1.0);
            let zi = th.cos();
            z.push(zi);
            w.push(PI / (m + 1.0) * th.sin().powi(2) * (1.0 - zi * zi).powi(p));
        }
        (z, w)
    }
}

impl SphereQuadrature {
    /// Product rule for `n <= 5`, otherwise Monte Carlo with
    /// `order^4` antithetic pairs.
    pub fn for_dimension(n: Dimension, order: usize, seed: u64) -> Self {
        if n.get() <= 5 {
            Self::product(n.get(), order)
        } else {
            Self::monte_carlo(n.get(), order.pow(4), seed)
        }
    }

    pub fn product(n: usize, order: usize) -> Self {
        let mut q = Self::product_only(n, order);
        let coarse_order = (2 * order / 3).max(2);
        q.coarse = Some(Box::new(Self::product_only(n, coarse_order)));
        q
    }

    fn product_only(n: usize, order: usize) -> Self {
        assert!(n >= 2 && order >= 1);
        // each partial point carries (coords so far, running sin product, weight)
        let mut partial: Vec<(Vec<f64>, f64, f64)> = vec![(Vec::new(), 1.0, 1.0)];
        for k in 1..=(n - 2) {
            let (z, w) = polar_rule(order, n - 1 - k);
            let mut next = Vec::with_capacity(partial.len() * z.len());
            for (coords, s, wt) in &partial {
                for (zi, wi) in z.iter().zip(&w) {
                    let mut c = coords.clone();
                    c.push(s * zi);
                    next.push((c, s * (1.0 - zi * zi).max(0.0).sqrt(), wt * wi));
                }
            }
            partial = next;
        }
        let m_az = 2 * order;
        let w_az = 2.0 * PI / m_az as f64;
        let mut points = Vec::with_capacity(partial.len() * m_az);
        let mut weights = Vec::with_capacity(partial.len() * m_az);
        for (coords, s, wt) in &partial {
            for l in 0..m_az {
                let phi = (l as f64 + 0.5) * w_az;
                let mut c = coords.clone();
                c.push(s * phi.cos());
                c.push(s * phi.sin());
                points.push(c);
                weights.push(wt * w_az);
            }
        }
        SphereQuadrature {
            n,
            kind: QuadratureKind::Product { order },
            points,
            weights,
            coarse: None,
        }
    }

    /// `pairs` antithetic pairs; points are listed as `p_0, -p_0, p_1, -p_1, ...`.
    pub fn monte_carlo(n: usize, pairs: usize, seed: u64) -> Self {
        assert!(pairs >= 2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let area = sphere_area(n);
        let mut points = Vec::with_capacity(2 * pairs);
        while points.len() < 2 * pairs {
            let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm < 1e-12 {
                continue;
            }
            let p: Vec<f64> = g.iter().map(|c| c / norm).collect();
            let q: Vec<f64> = p.iter().map(|c| -c).collect();
            points.push(p);
            points.push(q);
        }
        let weights = vec![area / (2 * pairs) as f64; 2 * pairs];
        SphereQuadrature {
            n,
            kind: QuadratureKind::MonteCarlo { pairs, seed },
            points,
            weights,
            coarse: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> QuadratureKind {
        self.kind
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p))
            .sum()
    }

    /// Integral with an error estimate: the difference to a coarser product
    /// rule, or the standard error over antithetic pairs.
    pub fn estimate<F: Fn(&[f64]) -> f64>(&self, f: F) -> QuadEstimate {
        match self.kind {
            QuadratureKind::Product { .. } => {
                let value = self.integrate(&f);
                let error = match &self.coarse {
                    Some(c) => (c.integrate(&f) - value).abs(),
                    None => 0.0,
                };
                QuadEstimate { value, error }
            }
            QuadratureKind::MonteCarlo { pairs, .. } => {
                let area = sphere_area(self.n);
                let ys: Vec<f64> = self
                    .points
                    .chunks(2)
                    .map(|pq| 0.5 * area * (f(&pq[0]) + f(&pq[1])))
                    .collect();
                let mean = ys.iter().sum::<f64>() / pairs as f64;
                let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (pairs as f64 - 1.0);
                QuadEstimate {
                    value: mean,
                    error: (var / pairs as f64).sqrt(),
                }
            }
        }
    }

    pub(crate) fn coarse(&self) -> Option<&SphereQuadrature> {
        self.coarse.as_deref()
    }
}

/// Check a rule against exact monomial integrals up to `degree`; returns the
/// largest absolute error.
pub fn monomial_check(q: &SphereQuadrature, degree: u32) -> Result<f64> {
    let n = q.dimension();
    if n < 2 {
        return Err(GluingError::Parameter("sphere dimension too small".into()));
    }
    let mut worst: f64 = 0.0;
    for m in 0..=degree {
        for alpha in super::poly::multi_indices(n, m) {
            let exact = integrate_monomial_sphere_raw(&alpha);
            let got = q.integrate(|x| {
                alpha
                    .iter()
                    .zip(x)
                    .map(|(&a, &xi)| xi.powi(a as i32))
                    .product()
            });
            worst = worst.max((got - exact).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert!((gamma_half(1) - PI.sqrt()).abs() < 1e-15);
        assert_eq!(gamma_half(2), 1.0);
        assert_eq!(gamma_half(8), 6.0);
        assert!((gamma_half(5) - 0.75 * PI.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn areas() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-14);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-13);
    }

    #[test]
    fn product_rules_are_exact_on_low_degree() {
        for n in 3..=5 {
            let q = SphereQuadrature::product(n, 6);
            let w: f64 = q.weights().iter().sum();
            assert!((w - sphere_area(n)).abs() < 1e-12);
            assert!(monomial_check(&q, 8).unwrap() < 1e-12, "n={n}");
            for p in q.points() {
                let r: f64 = p.iter().map(|c| c * c).sum();
                assert!((r - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn monte_carlo_kills_odd_moments_and_reports_error() {
        let q = SphereQuadrature::monte_carlo(7, 4000, 7);
        assert!(q.integrate(|x| x[0] * x[1] * x[2]).abs() < 1e-14);
        let est = q.estimate(|x| x[0] * x[0]);
        let exact = sphere_area(7) / 7.0;
        assert!(est.error > 0.0);
        assert!((est.value - exact).abs() < 6.0 * est.error);
    }
}
