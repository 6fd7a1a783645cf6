//! Cauchy-data matching on the sphere of radius `r_eps`: the constant-mode
//! system for `(b, lambda)`, the coordinate-mode systems for
//! `(a_i, omega_i)` and the high-mode equation for `theta`. Contributions
//! not modelled here enter through [`DataFunctionals`].

use std::sync::Arc;

use rayon::prelude::*;

use crate::delaunay_family::{u_eps_r, u_eps_r_a_jet, FamilyParams};
use crate::delaunay_ode::{DelaunayOrbit, Dimension};
use crate::error::{GluingError, Result};
use crate::harmonics::{build_basis, HarmonicBasis, ModeKey, SphereQuadrature, DEFAULT_TRUNCATION};
use crate::linearized::ParameterBudget;
use crate::poisson::{z_inverse, BoundaryData};
use crate::weighted_norms::norm_sphere;

/// Callbacks may return at most this multiple of `r_eps^{2+d-n/2}`.
pub const MAGNITUDE_FACTOR: f64 = 10.0;

/// Matching unknowns. `omega` holds the coefficients of the coordinate
/// functions `theta_i`; `theta` is high-mode data on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingState {
    pub n: Dimension,
    pub epsilon: f64,
    pub budget: ParameterBudget,
    pub b: f64,
    pub lambda: f64,
    pub a: Vec<f64>,
    pub omega: Vec<f64>,
    pub theta: BoundaryData,
}

impl MatchingState {
    /// `b = 0`, `lambda = eps^2/4`, all else zero.
    pub fn initial(epsilon: f64, budget: ParameterBudget) -> Self {
        let n = budget.n;
        MatchingState {
            n,
            epsilon,
            budget,
            b: 0.0,
            lambda: epsilon * epsilon / 4.0,
            a: vec![0.0; n.get()],
            omega: vec![0.0; n.get()],
            theta: BoundaryData::zero(n, 1.0),
        }
    }

    pub fn r_eps(&self) -> f64 {
        self.budget.r_eps(self.epsilon)
    }

    /// `r_eps^{2+d-n/2}`, the size of every data functional.
    pub fn data_scale(&self) -> f64 {
        self.r_eps().powf(self.budget.data_exponent())
    }
}

/// `(value, r d_r value)` of a projected data term.
pub type ScalarFn = Arc<dyn Fn(&MatchingState) -> Result<(f64, f64)> + Send + Sync>;
/// High-mode source on the unit sphere.
pub type ModeFn = Arc<dyn Fn(&MatchingState) -> Result<BoundaryData> + Send + Sync>;

/// The data functionals `H_0`, `H_1..H_n` and the high-mode source `S`.
#[derive(Clone)]
pub struct DataFunctionals {
    pub name: String,
    pub h0: ScalarFn,
    pub hi: Vec<ScalarFn>,
    pub s: ModeFn,
}

impl std::fmt::Debug for DataFunctionals {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DataFunctionals")
            .field("name", &self.name)
            .field("modes", &self.hi.len())
            .finish()
    }
}

impl DataFunctionals {
    /// Register callbacks after a sample call at `probe` checks their size.
    pub fn register(
        name: &str,
        h0: ScalarFn,
        hi: Vec<ScalarFn>,
        s: ModeFn,
        probe: &MatchingState,
    ) -> Result<Self> {
        if hi.len() != probe.n.get() {
            return Err(GluingError::Parameter(format!(
                "{} coordinate functionals for n = {}",
                hi.len(),
                probe.n.get()
            )));
        }
        let f = DataFunctionals {
            name: name.to_string(),
            h0,
            hi,
            s,
        };
        f.check_magnitudes(probe)?;
        Ok(f)
    }

    pub fn check_magnitudes(&self, probe: &MatchingState) -> Result<()> {
        let limit = MAGNITUDE_FACTOR * probe.data_scale();
        let too_big = |what: &str, v: f64| -> Result<()> {
            if !(v.abs() <= limit) {
                return Err(GluingError::Parameter(format!(
                    "{what} = {v:.3e} exceeds {MAGNITUDE_FACTOR} r_eps^(2+d-n/2) = {limit:.3e}"
                )));
            }
            Ok(())
        };
        let (h, d) = (self.h0)(probe)?;
        too_big("H_0", h)?;
        too_big("r d_r H_0", d)?;
        for (i, f) in self.hi.iter().enumerate() {
            let (h, d) = f(probe)?;
            too_big(&format!("H_{}", i + 1), h)?;
            too_big(&format!("r d_r H_{}", i + 1), d)?;
        }
        too_big("S", (self.s)(probe)?.l2_norm())
    }

    /// Every functional multiplied by `c`.
    pub fn scaled(&self, c: f64) -> DataFunctionals {
        let h0 = Arc::clone(&self.h0);
        let s = Arc::clone(&self.s);
        DataFunctionals {
            name: format!("{}*{c}", self.name),
            h0: Arc::new(move |st| h0(st).map(|(a, b)| (c * a, c * b))),
            hi: self
                .hi
                .iter()
                .map(|f| {
                    let f = Arc::clone(f);
                    Arc::new(move |st: &MatchingState| f(st).map(|(a, b)| (c * a, c * b)))
                        as ScalarFn
                })
                .collect(),
            s: Arc::new(move |st| s(st).map(|d| d.scale(c))),
        }
    }

    pub fn zero(probe: &MatchingState) -> Result<Self> {
        let n = probe.n;
        let mut f = Self::constant(
            probe,
            (0.0, 0.0),
            vec![(0.0, 0.0); n.get()],
            BoundaryData::zero(n, 1.0),
        )?;
        f.name = "zero".into();
        Ok(f)
    }

    /// Data independent of the unknowns.
    pub fn constant(
        probe: &MatchingState,
        h0: (f64, f64),
        hi: Vec<(f64, f64)>,
        s: BoundaryData,
    ) -> Result<Self> {
        let hi = hi
            .into_iter()
            .map(|v| Arc::new(move |_: &MatchingState| Ok(v)) as ScalarFn)
            .collect();
        Self::register(
            "constant",
            Arc::new(move |_| Ok(h0)),
            hi,
            Arc::new(move |_| Ok(s.clone())),
            probe,
        )
    }

    /// Smooth data of size `r_eps^{2+d-n/2}` with weak dependence on every
    /// unknown.
    pub fn synthetic(probe: &MatchingState) -> Result<Self> {
        let n = probe.n;
        let m = probe.data_scale();
        let r = probe.r_eps();
        let delta6 = probe.budget.delta1;
        let h0: ScalarFn = Arc::new(move |st| {
            let a2: f64 = st.a.iter().map(|x| x * x).sum::<f64>().sqrt();
            Ok((
                0.5 * m * (1.0 + 0.2 * st.b + 0.1 * (a2 * r).tanh()),
                -0.05 * m * (1.0 + 0.1 * (st.lambda / (st.epsilon * st.epsilon)).tanh()),
            ))
        });
        let hi = (0..n.get())
            .map(|i| {
                Arc::new(move |st: &MatchingState| {
                    let w = (st.omega[i] / m).tanh();
                    Ok((
                        0.01 * (i as f64 + 1.0) * m * (1.0 + 0.1 * st.a[i] * r + 0.1 * w),
                        0.005 * m * (1.0 - 0.2 * st.b),
                    ))
                }) as ScalarFn
            })
            .collect();
        let key = ModeKey::new(2, 0);
        let s: ModeFn = Arc::new(move |st| {
            let t = st.theta.coefficient(key);
            let c = 0.02 * m * (1.0 + 0.1 * st.b) + 0.1 * r.powf(delta6) * t;
            BoundaryData::new(n, 1.0, vec![(key, c), (ModeKey::new(3, 1), 0.01 * m)])
        });
        Self::register("synthetic", h0, hi, s, probe)
    }

    /// Data from the translated Delaunay family itself: the departure of
    /// `u_{eps,R,a}(r_eps theta)` from its leading expansion, mode by mode.
    pub fn delaunay(orbit: Arc<DelaunayOrbit>, probe: &MatchingState) -> Result<Self> {
        let n = probe.n;
        let model = Arc::new(DelaunayData::new(orbit, probe)?);
        let m0 = Arc::clone(&model);
        let h0: ScalarFn = Arc::new(move |st| {
            let s = m0.sample(st)?;
            Ok((s.h0, s.d0))
        });
        let hi = (0..n.get())
            .map(|i| {
                let mi = Arc::clone(&model);
                Arc::new(move |st: &MatchingState| {
                    let s = mi.sample(st)?;
                    Ok((s.hi[i], s.di[i]))
                }) as ScalarFn
            })
            .collect();
        let ms = Arc::clone(&model);
        let s: ModeFn = Arc::new(move |st| Ok(ms.sample(st)?.high));
        Self::register("delaunay", h0, hi, s, probe)
    }

    pub fn preset(name: &str, orbit: Arc<DelaunayOrbit>, probe: &MatchingState) -> Result<Self> {
        match name {
            "zero" => Self::zero(probe),
            "constant" => {
                let n = probe.n;
                let s = BoundaryData::new(n, 1.0, vec![(ModeKey::new(2, 0), 1e-3)])?;
                Self::constant(probe, (0.01, 0.002), vec![(1e-3, 5e-4); n.get()], s)
            }
            "synthetic" => Self::synthetic(probe),
            "delaunay" => Self::delaunay(orbit, probe),
            other => Err(GluingError::Parameter(format!(
                "unknown preset {other} (zero, constant, synthetic, delaunay)"
            ))),
        }
    }
}

/// Sphere samples of the translated family for the `delaunay` preset.
struct DelaunayData {
    orbit: Arc<DelaunayOrbit>,
    quad: SphereQuadrature,
    basis: HarmonicBasis,
}

struct DelaunaySample {
    h0: f64,
    d0: f64,
    hi: Vec<f64>,
    di: Vec<f64>,
    high: BoundaryData,
}

impl DelaunayData {
    fn new(orbit: Arc<DelaunayOrbit>, probe: &MatchingState) -> Result<Self> {
        let n = probe.n;
        Ok(DelaunayData {
            orbit,
            quad: SphereQuadrature::for_dimension(n, 2 * DEFAULT_TRUNCATION as usize + 2, 0x5eed),
            basis: build_basis(n, DEFAULT_TRUNCATION)?,
        })
    }

    fn sample(&self, st: &MatchingState) -> Result<DelaunaySample> {
        let n = st.n;
        let nf = n.as_f64();
        let r = st.r_eps();
        let eps = st.epsilon;
        let params = FamilyParams::from_b(Arc::clone(&self.orbit), st.b, st.a.clone())?;
        let (f, g) = f_g_coefficients(&params, r)?;
        let vals: Vec<(f64, f64)> = self
            .quad
            .points()
            .par_iter()
            .map(|p| {
                let x: Vec<f64> = p.iter().map(|c| c * r).collect();
                let jet = u_eps_r_a_jet(&params, &x)?;
                let rdr: f64 = jet.gradient.iter().zip(&x).map(|(a, b)| a * b).sum();
                Ok((jet.value, rdr))
            })
            .collect::<Result<_>>()?;
        let w = self.quad.weights();
        let area: f64 = w.iter().sum();
        let mean = |k: usize| -> f64 {
            vals.iter()
                .zip(w)
                .map(|(v, w)| w * if k == 0 { v.0 } else { v.1 })
                .sum::<f64>()
                / area
        };
        let lead = 1.0 + st.b + eps * eps / (4.0 * (1.0 + st.b)) * r.powf(2.0 - nf);
        let dlead = (2.0 - nf) * eps * eps / (4.0 * (1.0 + st.b)) * r.powf(2.0 - nf);
        // theta_i coefficient: int g theta_i / int theta_i^2, int theta_i^2 = |S|/n
        let coord = |i: usize, k: usize| -> f64 {
            let s: f64 = self
                .quad
                .points()
                .iter()
                .zip(&vals)
                .zip(w)
                .map(|((p, v), w)| w * p[i] * if k == 0 { v.0 } else { v.1 })
                .sum();
            s * nf / area
        };
        let hi = (0..n.get())
            .map(|i| -(coord(i, 0) - f * r * st.a[i]))
            .collect();
        let di = (0..n.get())
            .map(|i| -(coord(i, 1) - g * r * st.a[i]))
            .collect();
        let high: Vec<(ModeKey, f64)> = self
            .basis
            .modes()
            .iter()
            .filter(|m| m.degree >= 2)
            .map(|m| {
                let c: f64 = self
                    .quad
                    .points()
                    .iter()
                    .zip(&vals)
                    .zip(w)
                    .map(|((p, v), w)| w * v.1 * m.eval(p))
                    .sum();
                (m.key(), c)
            })
            .collect();
        Ok(DelaunaySample {
            h0: -(mean(0) - lead),
            d0: -(mean(1) - dlead),
            hi,
            di,
            high: BoundaryData::new(n, 1.0, high)?,
        })
    }
}

/// `F = (n-2) u + r u_r` and `G = (n-2) u + n r u_r + r^2 u_rr` of
/// `u_{eps,R}` at radius `r`.
pub fn f_g_coefficients(params: &FamilyParams, r: f64) -> Result<(f64, f64)> {
    if !(r > params.r_scale()) {
        return Err(GluingError::Parameter(format!(
            "r = {r} must exceed R = {}",
            params.r_scale()
        )));
    }
    let nf = params.dimension().as_f64();
    let (u, ru, r2u) = u_eps_r(params, r)?;
    Ok(((nf - 2.0) * u + ru, (nf - 2.0) * u + nf * ru + r2u))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub outer_max: usize,
    pub alpha: f64,
    pub norm_samples: usize,
    pub seed: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            tol: 1e-13,
            max_iter: 200,
            outer_max: 50,
            alpha: 0.5,
            norm_samples: 64,
            seed: 0x5eed,
        }
    }
}

/// Result of one block solve.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockReport {
    pub iterations: usize,
    /// Successive increments of the iterate.
    pub increments: Vec<f64>,
    /// Residual of the block's equations at the returned point.
    pub residual: f64,
    pub newton: bool,
}

fn converged(d: f64, scale: f64, tol: f64) -> bool {
    d <= tol * (1.0 + scale)
}

fn non_contraction(block: &str, detail: String, norms: Vec<f64>) -> GluingError {
    GluingError::NonContraction {
        block: block.into(),
        detail,
        norms,
    }
}

/// Residuals of the constant-mode system.
pub fn b_lambda_residual(st: &MatchingState, h: f64, d: f64) -> (f64, f64) {
    let nf = st.n.as_f64();
    let r = st.r_eps();
    let x = (st.epsilon * st.epsilon / (4.0 * (1.0 + st.b)) - st.lambda) * r.powf(2.0 - nf);
    (st.b + x - h, (2.0 - nf) * x - d)
}

/// Fixed point of `(b, lambda) -> (H_0 + r d_r H_0/(n-2),
/// eps^2/(4(1+b)) + r^{n-2} r d_r H_0/(n-2))`, with a Newton fallback
/// when the iteration stalls.
pub fn solve_b_lambda(
    state: &MatchingState,
    funcs: &DataFunctionals,
    cfg: &MatchConfig,
) -> Result<(MatchingState, BlockReport)> {
    let nf = state.n.as_f64();
    let r = state.r_eps();
    let eps2 = state.epsilon * state.epsilon;
    let lam_max = r.powf(state.budget.d() / 2.0 - 1.0 + 0.75 * nf);
    let mut st = state.clone();
    let mut increments = Vec::new();
    let check = |b: f64, l: f64, incs: &[f64]| -> Result<()> {
        if !(b.abs() <= 0.5 && l.abs() <= lam_max) {
            return Err(GluingError::DomainViolation {
                block: "b_lambda".into(),
                detail: format!("(b, lambda) = ({b:.4e}, {l:.4e}) left |b| <= 1/2, |lambda| <= {lam_max:.4e} after {} steps", incs.len()),
            });
        }
        Ok(())
    };
    let mut done = false;
    let mut newton = false;
    for it in 0..cfg.max_iter {
        let (h, d) = (funcs.h0)(&st)?;
        let b = h + d / (nf - 2.0);
        let l = eps2 / (4.0 * (1.0 + st.b)) + r.powf(nf - 2.0) * d / (nf - 2.0);
        check(b, l, &increments)?;
        let inc = (b - st.b).abs() + (l - st.lambda).abs();
        st.b = b;
        st.lambda = l;
        increments.push(inc);
        if converged(inc, b.abs() + l.abs(), cfg.tol) {
            done = true;
            break;
        }
        let k = increments.len();
        if it >= 4 && increments[k - 1] > 0.9 * increments[k - 2] {
            break;
        }
    }
    if !done {
        newton = true;
        for _ in 0..50 {
            let f0 = {
                let (h, d) = (funcs.h0)(&st)?;
                b_lambda_residual(&st, h, d)
            };
            let jac = |db: f64, dl: f64| -> Result<(f64, f64)> {
                let mut s = st.clone();
                s.b += db;
                s.lambda += dl;
                let (h, d) = (funcs.h0)(&s)?;
                let f = b_lambda_residual(&s, h, d);
                Ok(((f.0 - f0.0) / (db + dl), (f.1 - f0.1) / (db + dl)))
            };
            let hb = 1e-7;
            let hl = 1e-7 * st.lambda.abs().max(1e-12);
            let (a11, a21) = jac(hb, 0.0)?;
            let (a12, a22) = jac(0.0, hl)?;
            let det = a11 * a22 - a12 * a21;
            if det == 0.0 || !det.is_finite() {
                return Err(non_contraction(
                    "b_lambda",
                    "singular Newton step".into(),
                    increments,
                ));
            }
            let db = -(a22 * f0.0 - a12 * f0.1) / det;
            let dl = -(-a21 * f0.0 + a11 * f0.1) / det;
            st.b += db;
            st.lambda += dl;
            check(st.b, st.lambda, &increments)?;
            let inc = db.abs() + dl.abs();
            increments.push(inc);
            if converged(inc, st.b.abs() + st.lambda.abs(), cfg.tol) {
                done = true;
                break;
            }
        }
    }
    if !done {
        return Err(non_contraction(
            "b_lambda",
            "no convergence".into(),
            increments,
        ));
    }
    let (h, d) = (funcs.h0)(&st)?;
    let (r1, r2) = b_lambda_residual(&st, h, d);
    Ok((
        st,
        BlockReport {
            iterations: increments.len(),
            increments,
            residual: r1.abs().max(r2.abs()),
            newton,
        },
    ))
}

/// `||theta_i||_{(2,alpha),1}` for the coordinate functions.
fn coordinate_norms(n: Dimension, cfg: &MatchConfig) -> Result<Vec<f64>> {
    (0..n.get())
        .map(|i| {
            let f = move |y: &[f64]| y[i];
            norm_sphere(&f, n.get(), 2, cfg.alpha, 1.0, cfg.norm_samples, cfg.seed)
        })
        .collect()
}

/// Residual of the coordinate-mode system for one `i`.
pub fn a_omega_residual(
    st: &MatchingState,
    f: f64,
    g: f64,
    i: usize,
    h: f64,
    d: f64,
) -> (f64, f64) {
    let nf = st.n.as_f64();
    let r = st.r_eps();
    (
        f * r * st.a[i] - st.omega[i] - h,
        g * r * st.a[i] - (1.0 - nf) * st.omega[i] - d,
    )
}

/// Fixed point of the coordinate-mode map for all `i` at once.
pub fn solve_a_omega(
    state: &MatchingState,
    funcs: &DataFunctionals,
    f: f64,
    g: f64,
    cfg: &MatchConfig,
) -> Result<(MatchingState, BlockReport)> {
    let n = state.n;
    let nf = n.as_f64();
    let r = state.r_eps();
    let denom = g + (nf - 1.0) * f;
    if !(denom.abs() > 1e-8) {
        return Err(GluingError::Parameter(format!(
            "G + (n-1)F = {denom} too close to 0"
        )));
    }
    let k = coordinate_norms(n, cfg)?;
    let a_max = (r.powf(state.budget.d() - nf / 2.0) / nf).sqrt();
    let w_bound = r.powf(state.budget.phi_exponent()) / nf;
    let mut st = state.clone();
    let mut increments = Vec::new();
    let mut done = false;
    for _ in 0..cfg.max_iter {
        let vals: Vec<(f64, f64)> = (0..n.get())
            .into_par_iter()
            .map(|i| (funcs.hi[i])(&st))
            .collect::<Result<_>>()?;
        let mut inc: f64 = 0.0;
        let mut next = st.clone();
        for (i, &(h, d)) in vals.iter().enumerate() {
            let c = d + (nf - 1.0) * h;
            let a = c / (denom * r);
            let w = f * c / denom - h;
            if !(a.abs() <= a_max && w.abs() <= w_bound / k[i]) {
                return Err(GluingError::DomainViolation {
                    block: "a_omega".into(),
                    detail: format!(
                        "(a_{i}, omega_{i}) = ({a:.4e}, {w:.4e}) outside |a_i| <= {a_max:.4e}, |omega_i| <= {:.4e}",
                        w_bound / k[i]
                    ),
                });
            }
            inc = inc.max((a - st.a[i]).abs() + (w - st.omega[i]).abs());
            next.a[i] = a;
            next.omega[i] = w;
        }
        st = next;
        increments.push(inc);
        let scale =
            st.a.iter()
                .chain(&st.omega)
                .fold(0.0_f64, |m, x| m.max(x.abs()));
        if converged(inc, scale, cfg.tol) {
            done = true;
            break;
        }
        let kk = increments.len();
        if kk >= 3
            && increments[kk - 1] > increments[kk - 2]
            && increments[kk - 2] > increments[kk - 3]
        {
            break;
        }
    }
    if !done {
        return Err(non_contraction(
            "a_omega",
            "no convergence".into(),
            increments,
        ));
    }
    let mut residual: f64 = 0.0;
    for i in 0..n.get() {
        let (h, d) = (funcs.hi[i])(&st)?;
        let (r1, r2) = a_omega_residual(&st, f, g, i, h, d);
        residual = residual.max(r1.abs()).max(r2.abs());
    }
    Ok((
        st,
        BlockReport {
            iterations: increments.len(),
            increments,
            residual,
            newton: false,
        },
    ))
}

fn theta_norm(theta: &BoundaryData, basis: &HarmonicBasis, cfg: &MatchConfig) -> Result<f64> {
    if theta.coefficients.iter().all(|(_, c)| *c == 0.0) {
        return Ok(0.0);
    }
    let f = |y: &[f64]| theta.eval(basis, y).unwrap_or(f64::NAN);
    norm_sphere(
        &f,
        theta.n.get(),
        2,
        cfg.alpha,
        1.0,
        cfg.norm_samples,
        cfg.seed,
    )
}

/// Fixed point `theta = -Z^{-1}(S(theta))`.
pub fn solve_high_mode(
    state: &MatchingState,
    funcs: &DataFunctionals,
    cfg: &MatchConfig,
) -> Result<(MatchingState, BlockReport)> {
    let n = state.n;
    let bound = state.r_eps().powf(state.budget.phi_exponent());
    let basis = build_basis(n, DEFAULT_TRUNCATION)?;
    let mut st = state.clone();
    let mut increments = Vec::new();
    let mut done = false;
    for _ in 0..cfg.max_iter {
        let s = (funcs.s)(&st)?;
        if !s.is_high_mode() {
            return Err(GluingError::Contract(
                "high-mode source has degree < 2 content".into(),
            ));
        }
        if s.max_degree() > DEFAULT_TRUNCATION {
            return Err(GluingError::Parameter(format!(
                "source degree {} above {DEFAULT_TRUNCATION}",
                s.max_degree()
            )));
        }
        let next = z_inverse(&s).scale(-1.0);
        let inc = next.add(&st.theta.scale(-1.0))?.l2_norm();
        st.theta = next;
        increments.push(inc);
        if converged(inc, st.theta.l2_norm(), cfg.tol) {
            done = true;
            break;
        }
        let k = increments.len();
        if k >= 3 && increments[k - 1] > increments[k - 2] && increments[k - 2] > increments[k - 3]
        {
            break;
        }
    }
    if !done {
        return Err(non_contraction(
            "high_mode",
            "no convergence".into(),
            increments,
        ));
    }
    let norm = theta_norm(&st.theta, &basis, cfg)?;
    if !(norm <= bound) {
        return Err(GluingError::DomainViolation {
            block: "high_mode".into(),
            detail: format!("||theta|| = {norm:.4e} above r_eps^(2+d-n/2-delta1) = {bound:.4e}"),
        });
    }
    let s = (funcs.s)(&st)?;
    let residual = crate::poisson::z_apply(&st.theta).add(&s)?.l2_norm();
    Ok((
        st,
        BlockReport {
            iterations: increments.len(),
            increments,
            residual,
            newton: false,
        },
    ))
}

/// Constraint values of a matched state, each `value <= limit`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: &'static str,
    pub value: f64,
    pub limit: f64,
}

impl Constraint {
    pub fn holds(&self) -> bool {
        self.value <= self.limit
    }
}

#[derive(Debug, Clone)]
pub struct MatchReport {
    pub state: MatchingState,
    pub f: f64,
    pub g: f64,
    pub outer_iterations: usize,
    pub outer_increments: Vec<f64>,
    /// State after each outer sweep.
    pub history: Vec<MatchingState>,
    pub high_mode: BlockReport,
    pub b_lambda: BlockReport,
    pub a_omega: BlockReport,
    /// Largest residual of the three projected systems at the final state.
    pub residual: f64,
    pub constraints: Vec<Constraint>,
}

impl MatchReport {
    pub fn constraints_hold(&self) -> bool {
        self.constraints.iter().all(Constraint::holds)
    }
}

fn state_distance(a: &MatchingState, b: &MatchingState) -> Result<f64> {
    let mut d = (a.b - b.b).abs().max((a.lambda - b.lambda).abs());
    for i in 0..a.a.len() {
        d = d
            .max((a.a[i] - b.a[i]).abs())
            .max((a.omega[i] - b.omega[i]).abs());
    }
    Ok(d.max(a.theta.add(&b.theta.scale(-1.0))?.l2_norm()))
}

fn with_block<T>(block: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        GluingError::NonContraction { .. } | GluingError::DomainViolation { .. } => e,
        other => GluingError::Solver(format!("{block}: {other}")),
    })
}

/// High mode, then `(b, lambda)`, then `(a, omega)`, repeated to a joint
/// fixed point.
pub fn assemble_match(
    orbit: Arc<DelaunayOrbit>,
    budget: &ParameterBudget,
    funcs: &DataFunctionals,
    cfg: &MatchConfig,
) -> Result<MatchReport> {
    budget.validate()?;
    let eps = orbit.epsilon();
    if orbit.dimension() != budget.n {
        return Err(GluingError::Parameter(
            "budget dimension differs from the orbit".into(),
        ));
    }
    let mut st = MatchingState::initial(eps, *budget);
    let mut outer = Vec::new();
    let mut history = Vec::new();
    let r = st.r_eps();
    for _ in 0..cfg.outer_max {
        let prev = st.clone();
        let (s1, hm) = with_block("high_mode", solve_high_mode(&st, funcs, cfg))?;
        let (s2, bl) = with_block("b_lambda", solve_b_lambda(&s1, funcs, cfg))?;
        let params = FamilyParams::from_b(Arc::clone(&orbit), s2.b, vec![0.0; budget.n.get()])?;
        let (f, g) = f_g_coefficients(&params, r)?;
        let (s3, ao) = with_block("a_omega", solve_a_omega(&s2, funcs, f, g, cfg))?;
        st = s3;
        let d = state_distance(&st, &prev)?;
        outer.push(d);
        history.push(st.clone());
        if converged(d, 0.0, cfg.tol) {
            // one more evaluation of every block at the joint point
            let (h, dd) = (funcs.h0)(&st)?;
            let (r1, r2) = b_lambda_residual(&st, h, dd);
            let mut residual = r1.abs().max(r2.abs());
            for i in 0..budget.n.get() {
                let (h, d) = (funcs.hi[i])(&st)?;
                let (r1, r2) = a_omega_residual(&st, f, g, i, h, d);
                residual = residual.max(r1.abs()).max(r2.abs());
            }
            let s = (funcs.s)(&st)?;
            residual = residual.max(crate::poisson::z_apply(&st.theta).add(&s)?.l2_norm());
            let constraints = constraints(&st, cfg)?;
            return Ok(MatchReport {
                state: st,
                f,
                g,
                outer_iterations: outer.len(),
                outer_increments: outer,
                history,
                high_mode: hm,
                b_lambda: bl,
                a_omega: ao,
                residual,
                constraints,
            });
        }
    }
    Err(non_contraction(
        "outer",
        format!("no joint convergence in {} sweeps", cfg.outer_max),
        outer,
    ))
}

/// The admissibility bounds on `b`, `lambda`, `a`, `omega` and `theta`.
pub fn constraints(st: &MatchingState, cfg: &MatchConfig) -> Result<Vec<Constraint>> {
    let n = st.n;
    let nf = n.as_f64();
    let r = st.r_eps();
    let d = st.budget.d();
    let bound = r.powf(st.budget.phi_exponent());
    let basis = build_basis(n, DEFAULT_TRUNCATION)?;
    let omega = st.omega.clone();
    let w = move |y: &[f64]| {
        let s = y.iter().map(|c| c * c).sum::<f64>().sqrt();
        omega.iter().zip(y).map(|(o, c)| o * c / s).sum::<f64>()
    };
    let wn = norm_sphere(&w, n.get(), 2, cfg.alpha, r, cfg.norm_samples, cfg.seed)?;
    Ok(vec![
        Constraint {
            name: "|b|",
            value: st.b.abs(),
            limit: 0.5,
        },
        Constraint {
            name: "|lambda|^2",
            value: st.lambda * st.lambda,
            limit: r.powf(d - 2.0 + 1.5 * nf),
        },
        Constraint {
            name: "|a|^2",
            value: st.a.iter().map(|x| x * x).sum(),
            limit: r.powf(d - nf / 2.0),
        },
        Constraint {
            name: "||omega||",
            value: wn,
            limit: bound,
        },
        Constraint {
            name: "||theta||",
            value: theta_norm(&st.theta, &basis, cfg)?,
            limit: bound,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay_ode::integrate_orbit;

    fn setup(eps: f64) -> (Arc<DelaunayOrbit>, ParameterBudget, MatchingState) {
        let n = Dimension::new(4).unwrap();
        let orbit = Arc::new(integrate_orbit(n, eps, 1e-10).unwrap());
        let budget = ParameterBudget::defaults(n);
        let st = MatchingState::initial(eps, budget);
        (orbit, budget, st)
    }

    #[test]
    fn zero_preset_exact() {
        let (orbit, budget, st) = setup(0.1);
        let f = DataFunctionals::zero(&st).unwrap();
        let rep = assemble_match(orbit, &budget, &f, &MatchConfig::default()).unwrap();
        assert_eq!(rep.state.b, 0.0);
        assert_eq!(rep.state.lambda, 0.1 * 0.1 / 4.0);
        assert!(rep
            .state
            .a
            .iter()
            .chain(&rep.state.omega)
            .all(|x| *x == 0.0));
        assert_eq!(rep.state.theta.l2_norm(), 0.0);
        assert_eq!(rep.history.len(), 1);
    }

    #[test]
    fn b_lambda_constant_example() {
        let (_, _, st) = setup(0.1);
        let f = DataFunctionals::constant(
            &st,
            (0.01, 0.0),
            vec![(0.0, 0.0); 4],
            BoundaryData::zero(st.n, 1.0),
        )
        .unwrap();
        let (out, rep) = solve_b_lambda(&st, &f, &MatchConfig::default()).unwrap();
        assert!((out.b - 0.01).abs() < 1e-15);
        assert!((out.lambda - 0.01 / (4.0 * 1.01)).abs() < 1e-15);
        assert!(rep.residual < 1e-12);
    }

    #[test]
    fn a_omega_linear_example() {
        let (_, mut budget, _) = setup(0.1);
        budget = budget.with_s(0.25f64.ln() / 0.1f64.ln()).unwrap_or(budget);
        let mut st = MatchingState::initial(0.1, budget);
        // force r_eps = 0.25 through s
        st.budget.s = 0.25f64.ln() / 0.1f64.ln();
        assert!((st.r_eps() - 0.25).abs() < 1e-14);
        let f = DataFunctionals {
            name: "c".into(),
            h0: Arc::new(|_| Ok((0.0, 0.0))),
            hi: (0..4)
                .map(|_| Arc::new(|_: &MatchingState| Ok((0.001, 0.0))) as ScalarFn)
                .collect(),
            s: Arc::new(|st| Ok(BoundaryData::zero(st.n, 1.0))),
        };
        let (out, rep) = solve_a_omega(&st, &f, 2.0, 2.0, &MatchConfig::default()).unwrap();
        for i in 0..4 {
            assert!((out.a[i] - 1.5e-3).abs() < 1e-15);
            assert!((out.omega[i] + 2.5e-4).abs() < 1e-15);
        }
        assert!(rep.residual < 1e-12);
    }

    #[test]
    fn high_mode_diagonal() {
        let (_, _, st) = setup(0.1);
        let key = ModeKey::new(2, 1);
        let s = BoundaryData::new(st.n, 1.0, vec![(key, 1e-3)]).unwrap();
        let f = DataFunctionals::constant(&st, (0.0, 0.0), vec![(0.0, 0.0); 4], s).unwrap();
        let (out, _) = solve_high_mode(&st, &f, &MatchConfig::default()).unwrap();
        assert!((out.theta.coefficient(key) + 1e-3 / 6.0).abs() < 1e-18);
        assert_eq!(out.theta.coefficients.len(), 1);
    }

    #[test]
    fn magnitude_gate() {
        let (_, _, st) = setup(0.1);
        let err = DataFunctionals::constant(
            &st,
            (100.0, 0.0),
            vec![(0.0, 0.0); 4],
            BoundaryData::zero(st.n, 1.0),
        )
        .unwrap_err();
        assert!(err.is_parameter_error());
    }

    #[test]
    fn f_g_near_asymptotics() {
        let (orbit, budget, _) = setup(0.01);
        let p = FamilyParams::from_b(orbit, 0.0, vec![0.0; 4]).unwrap();
        let (f, g) = f_g_coefficients(&p, budget.r_eps(0.01)).unwrap();
        assert!((f - 2.0).abs() < 0.01);
        assert!((g + 3.0 * f - 8.0).abs() < 0.05);
        assert!(f_g_coefficients(&p, p.r_scale() / 2.0).is_err());
    }

    #[test]
    fn synthetic_converges_within_constraints() {
        let (orbit, budget, st) = setup(0.1);
        let f = DataFunctionals::synthetic(&st).unwrap();
        let rep = assemble_match(orbit, &budget, &f, &MatchConfig::default()).unwrap();
        assert!(rep.outer_iterations <= 50);
        assert!(rep.constraints_hold(), "{:?}", rep.constraints);
        assert!(rep.residual < 1e-12, "{}", rep.residual);
        assert!(!rep.b_lambda.newton);
    }

    #[test]
    fn slow_map_falls_back_to_newton() {
        let (_, _, st) = setup(0.1);
        // b -> 0.02 - 0.97 b contracts too slowly for the plain iteration
        let f = DataFunctionals {
            name: "slow".into(),
            h0: Arc::new(|st| Ok((0.02 - 0.97 * st.b, 0.0))),
            hi: (0..4)
                .map(|_| Arc::new(|_: &MatchingState| Ok((0.0, 0.0))) as ScalarFn)
                .collect(),
            s: Arc::new(|st| Ok(BoundaryData::zero(st.n, 1.0))),
        };
        let (out, rep) = solve_b_lambda(&st, &f, &MatchConfig::default()).unwrap();
        assert!(rep.newton);
        assert!((out.b - 0.02 / 1.97).abs() < 1e-13);
        assert!(rep.residual < 1e-12);
    }

    #[test]
    fn delaunay_preset_shifts_b() {
        let (orbit, budget, st) = setup(0.1);
        let f = DataFunctionals::delaunay(Arc::clone(&orbit), &st).unwrap();
        let rep = assemble_match(orbit, &budget, &f, &MatchConfig::default()).unwrap();
        assert!(rep.state.b > 0.0 && rep.state.b < 0.1);
        assert!(rep.constraints_hold(), "{:?}", rep.constraints);
        assert!(rep.residual < 1e-12, "{}", rep.residual);
    }
}
