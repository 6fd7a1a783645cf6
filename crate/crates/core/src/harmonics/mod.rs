//! Spherical harmonics on `S^{n-1}` as homogeneous harmonic polynomials,
//! exact sphere integration, and the low/high mode projections.

mod poly;
mod sphere;

pub use poly::{harmonic_projection, multi_indices, MultiIndex, Poly};
pub use sphere::{monomial_check, sphere_area, QuadEstimate, QuadratureKind, SphereQuadrature};

use rayon::prelude::*;

use crate::delaunay_ode::Dimension;
use crate::error::{GluingError, Result};

/// Largest degree accepted by [`build_basis`].
pub const MAX_BASIS_DEGREE: u32 = 6;

/// Default truncation degree for mode expansions.
pub const DEFAULT_TRUNCATION: u32 = 4;

/// `i(i + n - 2)`.
pub fn eigenvalue(n: Dimension, i: u32) -> u64 {
    let i = i as u64;
    i * (i + n.get() as u64 - 2)
}

/// Number of independent harmonic polynomials of degree `m` in `n` variables.
pub fn harmonic_dimension(n: usize, m: u32) -> usize {
    let binom = |a: usize, b: usize| -> usize {
        let mut r: u128 = 1;
        for i in 0..b {
            r = r * (a - i) as u128 / (i + 1) as u128;
        }
        r as usize
    };
    let m = m as usize;
    let total = binom(n + m - 1, m);
    if m >= 2 {
        total - binom(n + m - 3, m - 2)
    } else {
        total
    }
}

/// Exact `\int_{S^{n-1}} x^alpha`.
pub fn integrate_monomial_sphere(n: Dimension, alpha: &[u32]) -> Result<f64> {
    if alpha.len() != n.get() {
        return Err(GluingError::Parameter(format!(
            "multi-index has {} entries, expected {}",
            alpha.len(),
            n.get()
        )));
    }
    Ok(sphere::integrate_monomial_sphere_raw(alpha))
}

/// `(degree, index within degree)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeKey {
    pub degree: u32,
    pub index: usize,
}

impl ModeKey {
    pub fn new(degree: u32, index: usize) -> Self {
        ModeKey { degree, index }
    }
}

#[derive(Debug, Clone)]
pub struct HarmonicMode {
    pub n: Dimension,
    pub degree: u32,
    pub index: usize,
    pub poly: Poly,
    pub normalized: bool,
}

impl HarmonicMode {
    pub fn key(&self) -> ModeKey {
        ModeKey::new(self.degree, self.index)
    }

    pub fn eigenvalue(&self) -> u64 {
        eigenvalue(self.n, self.degree)
    }

    /// Value of the homogeneous polynomial at any point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.poly.eval(x)
    }
}

/// Orthonormal harmonic basis on `S^{n-1}` up to a maximum degree.
#[derive(Debug, Clone)]
pub struct HarmonicBasis {
    n: Dimension,
    max_degree: u32,
    modes: Vec<HarmonicMode>,
    offsets: Vec<usize>,
}

/// Orthonormal basis of harmonics of degree `0..=max_degree`.
///
/// Within a degree the candidates are harmonic parts of the monomials whose
/// last exponent is 0 or 1 (these form a basis). They are orthogonalized in
/// the Fischer inner product, which is proportional to the `L^2(S^{n-1})`
/// product on each degree; one exact sphere integral fixes the constant.
pub fn build_basis(n: Dimension, max_degree: u32) -> Result<HarmonicBasis> {
    if max_degree > MAX_BASIS_DEGREE {
        return Err(GluingError::Parameter(format!(
            "max_degree {max_degree} exceeds {MAX_BASIS_DEGREE}"
        )));
    }
    let nv = n.get();
    let per_degree: Vec<Vec<Poly>> = (0..=max_degree)
        .into_par_iter()
        .map(|m| degree_basis(nv, m))
        .collect();
    let mut modes = Vec::new();
    let mut offsets = Vec::with_capacity(per_degree.len() + 1);
    for (m, polys) in per_degree.into_iter().enumerate() {
        offsets.push(modes.len());
        for (index, poly) in polys.into_iter().enumerate() {
            modes.push(HarmonicMode {
                n,
                degree: m as u32,
                index,
                poly,
                normalized: true,
            });
        }
    }
    offsets.push(modes.len());
    Ok(HarmonicBasis {
        n,
        max_degree,
        modes,
        offsets,
    })
}

fn degree_basis(n: usize, m: u32) -> Vec<Poly> {
    let monos = multi_indices(n, m);
    let index: std::collections::HashMap<&MultiIndex, usize> =
        monos.iter().enumerate().map(|(i, a)| (a, i)).collect();
    let fischer: Vec<f64> = monos
        .iter()
        .map(|a| {
            a.iter()
                .map(|&e| (1..=e).map(|k| k as f64).product::<f64>())
                .product()
        })
        .collect();
    let dot = |u: &[f64], v: &[f64]| -> f64 {
        u.iter()
            .zip(v)
            .zip(&fischer)
            .map(|((a, b), w)| a * b * w)
            .sum()
    };
    let target = harmonic_dimension(n, m);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(target);
    for alpha in monos.iter().filter(|a| a[n - 1] <= 1) {
        let h = harmonic_projection(&Poly::monomial(alpha.clone(), 1.0), m);
        let mut v = vec![0.0; monos.len()];
        for (k, c) in h.terms() {
            v[index[k]] = c;
        }
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-10 {
            v.iter_mut().for_each(|c| *c /= norm);
            basis.push(v);
        }
    }
    debug_assert_eq!(basis.len(), target);
    let to_poly = |v: &[f64]| -> Poly {
        let mut p = Poly::zero(n);
        for (a, &c) in monos.iter().zip(v) {
            if c.abs() > 1e-15 {
                p.add_term(a.clone(), c);
            }
        }
        p
    };
    let polys: Vec<Poly> = basis.iter().map(|v| to_poly(v)).collect();
    // Fischer-orthonormal -> L^2(S)-orthonormal by one common factor
    let scale = match polys.first() {
        Some(p) => 1.0 / p.sphere_inner(p).sqrt(),
        None => 1.0,
    };
    polys.into_iter().map(|p| p.scale(scale)).collect()
}

impl HarmonicBasis {
    pub fn dimension(&self) -> Dimension {
        self.n
    }

    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn modes(&self) -> &[HarmonicMode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn keys(&self) -> Vec<ModeKey> {
        self.modes.iter().map(|m| m.key()).collect()
    }

    /// Positions of the modes of degree `m` in [`Self::modes`].
    pub fn degree_range(&self, m: u32) -> std::ops::Range<usize> {
        if m > self.max_degree {
            return 0..0;
        }
        self.offsets[m as usize]..self.offsets[m as usize + 1]
    }

    pub fn position(&self, key: ModeKey) -> Option<usize> {
        let r = self.degree_range(key.degree);
        let p = r.start + key.index;
        (p < r.end).then_some(p)
    }

    pub fn mode(&self, key: ModeKey) -> Option<&HarmonicMode> {
        self.position(key).map(|p| &self.modes[p])
    }

    /// Values of every mode at `x`.
    pub fn eval_all(&self, x: &[f64]) -> Vec<f64> {
        self.modes.iter().map(|m| m.eval(x)).collect()
    }

    /// `c_i` with `e_{(1,i)} = c_i x_i`.
    pub fn linear_scale(&self, i: usize) -> f64 {
        let p = self.degree_range(1).start + i;
        let mut alpha = vec![0; self.n.get()];
        alpha[i] = 1;
        self.modes[p].poly.coefficient(&alpha)
    }

    /// `1 / sqrt|S^{n-1}|`, the normalized constant mode.
    pub fn constant_value(&self) -> f64 {
        1.0 / sphere_area(self.n.get()).sqrt()
    }

    /// Sum of `c_j e_j` as a polynomial.
    pub fn synthesize(&self, coeffs: &[(ModeKey, f64)]) -> Result<Poly> {
        let mut p = Poly::zero(self.n.get());
        for &(key, c) in coeffs {
            let mode = self
                .mode(key)
                .ok_or_else(|| GluingError::Parameter(format!("mode {key:?} not in basis")))?;
            p = p.add(&mode.poly.scale(c));
        }
        Ok(p)
    }
}

/// Radial profiles of a function per harmonic mode, sampled on a radius grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeExpansion {
    n: Dimension,
    radii: Vec<f64>,
    keys: Vec<ModeKey>,
    profiles: Vec<Vec<f64>>,
    error_estimate: f64,
}

impl ModeExpansion {
    pub fn new(
        n: Dimension,
        radii: Vec<f64>,
        keys: Vec<ModeKey>,
        profiles: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if keys.len() != profiles.len() {
            return Err(GluingError::Parameter(
                "one profile per mode required".into(),
            ));
        }
        for p in &profiles {
            if p.len() != radii.len() {
                return Err(GluingError::Parameter(format!(
                    "profile length {} differs from grid length {}",
                    p.len(),
                    radii.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(GluingError::Parameter("non-finite profile value".into()));
            }
        }
        Ok(ModeExpansion {
            n,
            radii,
            keys,
            profiles,
            error_estimate: 0.0,
        })
    }

    pub fn zero(n: Dimension, radii: Vec<f64>, keys: Vec<ModeKey>) -> Self {
        let profiles = vec![vec![0.0; radii.len()]; keys.len()];
        ModeExpansion {
            n,
            radii,
            keys,
            profiles,
            error_estimate: 0.0,
        }
    }

    pub fn with_error_estimate(mut self, e: f64) -> Self {
        self.error_estimate = e;
        self
    }

    pub fn dimension(&self) -> Dimension {
        self.n
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn keys(&self) -> &[ModeKey] {
        &self.keys
    }

    pub fn profiles(&self) -> &[Vec<f64>] {
        &self.profiles
    }

    pub fn profile(&self, key: ModeKey) -> Option<&[f64]> {
        self.keys
            .iter()
            .position(|k| *k == key)
            .map(|p| self.profiles[p].as_slice())
    }

    /// Quadrature error estimate carried from the projection (0 if exact).
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn max_abs(&self) -> f64 {
        self.profiles
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(key, value)` pairs at one radius index.
    pub fn coefficients_at(&self, j: usize) -> Vec<(ModeKey, f64)> {
        self.keys
            .iter()
            .zip(&self.profiles)
            .map(|(k, p)| (*k, p[j]))
            .collect()
    }

    /// Keep the modes accepted by `keep`.
    pub fn filter<F: Fn(ModeKey) -> bool>(&self, keep: F) -> ModeExpansion {
        let mut keys = Vec::new();
        let mut profiles = Vec::new();
        for (k, p) in self.keys.iter().zip(&self.profiles) {
            if keep(*k) {
                keys.push(*k);
                profiles.push(p.clone());
            }
        }
        ModeExpansion {
            n: self.n,
            radii: self.radii.clone(),
            keys,
            profiles,
            error_estimate: self.error_estimate,
        }
    }
}

/// Input to the sphere projections: either polynomial data (restricted to
/// the sphere of radius `r`) or a function of the ambient point.
pub enum SphereData<'a> {
    Polynomial(&'a Poly),
    Sampled(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

/// Quadrature and accuracy gate for sampled data.
#[derive(Debug, Clone)]
pub struct ProjectionOptions {
    pub quadrature: SphereQuadrature,
    /// Largest accepted error estimate per coefficient, relative to
    /// `1 + max |coefficient|`.
    pub tol: f64,
}

impl ProjectionOptions {
    /// Product rule exact well past the basis degree for `n <= 5`;
    /// `2^16` antithetic Monte Carlo pairs otherwise.
    pub fn default_for(basis: &HarmonicBasis) -> Self {
        let n = basis.dimension();
        if n.get() <= 5 {
            ProjectionOptions {
                quadrature: SphereQuadrature::product(n.get(), basis.max_degree() as usize + 12),
                tol: 1e-8,
            }
        } else {
            ProjectionOptions {
                quadrature: SphereQuadrature::monte_carlo(n.get(), 1 << 16, 0),
                tol: 5e-2,
            }
        }
    }
}

/// Coefficients of `data` on the sphere of radius `r` against every basis
/// mode; exact for polynomial input.
pub fn project_all(data: &SphereData, basis: &HarmonicBasis, r: f64) -> Result<ModeExpansion> {
    project_all_with(data, basis, r, None)
}

pub fn project_all_with(
    data: &SphereData,
    basis: &HarmonicBasis,
    r: f64,
    opts: Option<&ProjectionOptions>,
) -> Result<ModeExpansion> {
    if !(r > 0.0) {
        return Err(GluingError::Parameter(format!(
            "radius {r} must be positive"
        )));
    }
    let n = basis.dimension();
    let keys = basis.keys();
    match data {
        SphereData::Polynomial(p) => {
            if p.nvars() != n.get() {
                return Err(GluingError::Parameter(
                    "polynomial variable count mismatch".into(),
                ));
            }
            if p.degree().unwrap_or(0) > basis.max_degree() {
                return Err(GluingError::Contract(format!(
                    "polynomial degree {:?} exceeds basis degree {}",
                    p.degree(),
                    basis.max_degree()
                )));
            }
            let pr = p.dilate(r);
            let profiles = basis
                .modes()
                .par_iter()
                .map(|m| vec![pr.sphere_inner(&m.poly)])
                .collect();
            ModeExpansion::new(n, vec![r], keys, profiles)
        }
        SphereData::Sampled(f) => {
            let default;
            let opts = match opts {
                Some(o) => o,
                None => {
                    default = ProjectionOptions::default_for(basis);
                    &default
                }
            };
            let q = &opts.quadrature;
            if q.dimension() != n.get() {
                return Err(GluingError::Parameter(
                    "quadrature dimension mismatch".into(),
                ));
            }
            let values: Vec<f64> = q
                .points()
                .par_iter()
                .map(|p| {
                    let x: Vec<f64> = p.iter().map(|c| c * r).collect();
                    f(&x)
                })
                .collect();
            let lookup = |pts: &[Vec<f64>], i: usize| -> f64 {
                // reuse fine-rule samples when the point set is the same
                let x: Vec<f64> = pts[i].iter().map(|c| c * r).collect();
                f(&x)
            };
            let results: Vec<(f64, f64)> = basis
                .modes()
                .par_iter()
                .map(|m| match q.kind() {
                    QuadratureKind::Product { .. } => {
                        let fine: f64 = q
                            .points()
                            .iter()
                            .zip(q.weights())
                            .zip(&values)
                            .map(|((p, w), v)| w * v * m.eval(p))
                            .sum();
                        let err = match q.coarse() {
                            Some(c) => {
                                let coarse: f64 = (0..c.len())
                                    .map(|i| {
                                        c.weights()[i]
                                            * lookup(c.points(), i)
                                            * m.eval(&c.points()[i])
                                    })
                                    .sum();
                                (coarse - fine).abs()
                            }
                            None => 0.0,
                        };
                        (fine, err)
                    }
                    QuadratureKind::MonteCarlo { pairs, .. } => {
                        let area = sphere_area(n.get());
                        let ys: Vec<f64> = q
                            .points()
                            .chunks(2)
                            .zip(values.chunks(2))
                            .map(|(pq, vv)| {
                                0.5 * area * (vv[0] * m.eval(&pq[0]) + vv[1] * m.eval(&pq[1]))
                            })
                            .collect();
                        let mean = ys.iter().sum::<f64>() / pairs as f64;
                        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>()
                            / (pairs as f64 - 1.0);
                        (mean, (var / pairs as f64).sqrt())
                    }
                })
                .collect();
            let biggest = results.iter().fold(0.0_f64, |a, (v, _)| a.max(v.abs()));
            let err = results.iter().fold(0.0_f64, |a, (_, e)| a.max(*e));
            if err > opts.tol * (1.0 + biggest) {
                return Err(GluingError::Accuracy(format!(
                    "sphere quadrature error estimate {err:.3e} above tolerance"
                )));
            }
            let profiles = results.into_iter().map(|(v, _)| vec![v]).collect();
            Ok(ModeExpansion::new(n, vec![r], keys, profiles)?.with_error_estimate(err))
        }
    }
}

/// High-mode part (degrees >= 2) of `data` on the sphere of radius `r`.
pub fn project_high(data: &SphereData, basis: &HarmonicBasis, r: f64) -> Result<ModeExpansion> {
    Ok(project_all(data, basis, r)?.filter(|k| k.degree >= 2))
}

/// Low-mode part: the normalized constant coefficient and the vector `a`
/// with linear part `a . theta`.
pub fn project_low(data: &SphereData, basis: &HarmonicBasis, r: f64) -> Result<(f64, Vec<f64>)> {
    if basis.max_degree() < 1 {
        return Err(GluingError::Parameter("basis must include degree 1".into()));
    }
    let all = project_all(data, basis, r)?;
    let c0 = all.profiles()[0][0];
    let lin = basis.degree_range(1);
    let a = lin
        .clone()
        .enumerate()
        .map(|(i, p)| all.profiles()[p][0] * basis.linear_scale(i))
        .collect();
    Ok((c0, a))
}
