//! Flat-model interior fixed point `v = G(-Q(v_phi + v) - P v_phi)` on the
//! punctured ball of radius `r_eps`, with `v_phi` the harmonic extension of
//! high-mode boundary data.

use rayon::prelude::*;

use crate::delaunay_family::{u_eps_r, u_eps_r_a_jet, FamilyParams};
use crate::delaunay_ode::signed_pow;
use crate::error::{GluingError, Result};
use crate::harmonics::{
    build_basis, eigenvalue, HarmonicBasis, ModeExpansion, ModeKey, SphereQuadrature,
    DEFAULT_TRUNCATION,
};
use crate::linearized::budget::ParameterBudget;
use crate::linearized::bvp::{ModeOperators, ModeSolution, RadialGrid};
use crate::linearized::remainder::q_closed_form;
use crate::poisson::BoundaryData;
use crate::weighted_norms::norm_sphere;

#[derive(Debug, Clone, PartialEq)]
pub struct PicardConfig {
    /// Highest harmonic degree carried by the iterate.
    pub truncation: u32,
    /// Delaunay periods between the inner cut and `r_eps`.
    pub periods: f64,
    /// Largest step in `log rho`.
    pub step: f64,
    /// Nodes per polar angle of the sphere rule.
    pub sphere_order: usize,
    /// Stop when the increment is below `tol` times the iterate norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Largest admissible out-of-degree energy fraction of `Q`.
    pub aliasing_tol: f64,
    /// Sample count for the boundary-data Holder norm.
    pub norm_samples: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig {
            truncation: DEFAULT_TRUNCATION,
            periods: 3.0,
            step: 0.01,
            sphere_order: 2 * DEFAULT_TRUNCATION as usize + 2,
            tol: 1e-12,
            max_iter: 40,
            aliasing_tol: 0.01,
            norm_samples: 96,
            alpha: 0.5,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardReport {
    /// Mode profiles of the fixed point on the radial grid.
    pub solution: ModeExpansion,
    pub grid: RadialGrid,
    pub iterations: usize,
    /// `||v_{k+1} - v_k||` per step.
    pub increments: Vec<f64>,
    /// Ratios of successive increments.
    pub contraction: Vec<f64>,
    /// Relative full residual of each iterate, starting from `v = 0`.
    pub residuals: Vec<f64>,
    /// Relative full residual of the returned iterate.
    pub residual: f64,
    /// Relative residual of the background `u_{eps,R,a}` alone.
    pub background_residual: f64,
    /// Largest out-of-degree energy fraction of `Q` seen.
    pub aliasing: f64,
    /// Weighted `mu` norm of the fixed point.
    pub norm: f64,
    /// `r_eps^{2+d-mu-n/2}`.
    pub envelope: f64,
    /// `norm / envelope`.
    pub tau: f64,
    /// `min (u + v_phi + v) / (eps rho^{(2-n)/2})`.
    pub c3: f64,
    pub phi_norm: f64,
    pub phi_bound: f64,
    pub r_eps: f64,
    /// Size of the second correction relative to the first on the a != 0
    /// path.
    pub neumann_factor: Option<f64>,
}

/// Shared state: grid, operators, basis and the synthesis matrix.
struct Workspace {
    params: FamilyParams,
    ops: ModeOperators,
    basis: HarmonicBasis,
    keys: Vec<ModeKey>,
    degrees: Vec<u32>,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// `e_k(theta_q)`, row-major by point.
    e: Vec<f64>,
    /// `sup |e_k|` over the rule.
    sup_e: Vec<f64>,
    mu: f64,
    from: usize,
    translated: bool,
}

impl Workspace {
    fn m(&self) -> usize {
        self.keys.len()
    }

    fn nr(&self) -> usize {
        self.ops.grid().len()
    }

    fn synth(&self, coeffs: &[f64], q: usize) -> f64 {
        let row = &self.e[q * self.m()..(q + 1) * self.m()];
        row.iter().zip(coeffs).map(|(a, b)| a * b).sum()
    }

    fn x_at(&self, rho: f64, q: usize) -> Vec<f64> {
        self.points[q].iter().map(|c| c * rho).collect()
    }

    /// Mode coefficients of pointwise values on one sphere, and the
    /// fraction of their energy outside the truncation.
    fn project(&self, vals: &[f64]) -> (Vec<f64>, f64) {
        let m = self.m();
        let mut c = vec![0.0; m];
        let mut total = 0.0;
        for (q, v) in vals.iter().enumerate() {
            let w = self.weights[q] * v;
            total += w * v;
            let row = &self.e[q * m..(q + 1) * m];
            for k in 0..m {
                c[k] += w * row[k];
            }
        }
        let captured: f64 = c.iter().map(|x| x * x).sum();
        let out = if total > 0.0 {
            ((total - captured) / total).max(0.0)
        } else {
            0.0
        };
        (c, out)
    }

    /// Weighted `mu` norm of mode profiles from index `from`.
    fn norm(&self, sols: &[ModeSolution]) -> f64 {
        let rho = self.ops.grid().rho();
        (self.from..self.nr())
            .map(|j| {
                let s: f64 = sols
                    .iter()
                    .zip(&self.sup_e)
                    .map(|(p, se)| se * (p.w[j].abs() + p.rw[j].abs() + p.r2w[j].abs()))
                    .sum();
                rho[j].powf(-self.mu) * s
            })
            .fold(0.0, f64::max)
    }

    fn solve_all(&self, f: &[Vec<f64>]) -> Result<Vec<ModeSolution>> {
        (0..self.m())
            .into_par_iter()
            .map(|k| self.ops.solve(self.degrees[k], &f[k], self.mu))
            .collect()
    }

    /// `delta P y` projected, `delta P = P_a - P`.
    fn perturb(&self, y: &[ModeSolution], dp: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let m = self.m();
        let rows: Vec<Vec<f64>> = (0..self.nr())
            .into_par_iter()
            .map(|j| {
                let coeffs: Vec<f64> = y.iter().map(|s| s.w[j]).collect();
                let vals: Vec<f64> = (0..self.points.len())
                    .map(|q| dp[j][q] * self.synth(&coeffs, q))
                    .collect();
                self.project(&vals).0
            })
            .collect();
        (0..m)
            .map(|k| rows.iter().map(|r| r[k]).collect())
            .collect()
    }
}

/// Background values at one polar node: `u`, `Delta u`, potential.
#[derive(Clone, Copy)]
struct Background {
    u: f64,
    lap: f64,
    pot: f64,
}

fn background(ws: &Workspace, j: usize, q: usize) -> Result<Background> {
    let n = ws.params.dimension();
    let rho = ws.ops.grid().rho()[j];
    if ws.translated {
        let jet = u_eps_r_a_jet(&ws.params, &ws.x_at(rho, q))?;
        Ok(Background {
            u: jet.value,
            lap: jet.laplacian(),
            pot: n.potential_coefficient() * jet.value.powf(n.conformal_exponent()),
        })
    } else {
        let (u, ru, r2u) = u_eps_r(&ws.params, rho)?;
        Ok(Background {
            u,
            lap: (r2u + (n.as_f64() - 1.0) * ru) / (rho * rho),
            pot: n.potential_coefficient() * u.powf(n.conformal_exponent()),
        })
    }
}

/// Per-iterate sweep over the polar grid.
struct Sweep {
    /// Projected `Q(v_phi + v) + P_a v_phi`, per mode.
    source: Vec<Vec<f64>>,
    residual: f64,
    background_residual: f64,
    aliasing: f64,
    c3: f64,
}

fn sweep(
    ws: &Workspace,
    bg: &[Vec<Background>],
    vphi: &[Vec<f64>],
    v: &[ModeSolution],
) -> Result<Sweep> {
    let n = ws.params.dimension();
    let nf = n.as_f64();
    let c = n.nonlinear_coefficient();
    let p = n.critical_exponent();
    let eps = ws.params.orbit().epsilon();
    let grid = ws.ops.grid();
    let m = ws.m();
    let lam: Vec<f64> = ws
        .degrees
        .iter()
        .map(|&d| eigenvalue(n, d) as f64)
        .collect();
    let rows: Vec<Result<(Vec<f64>, f64, f64, f64, f64)>> = (0..ws.nr())
        .into_par_iter()
        .map(|j| {
            let rho = grid.rho()[j];
            let vp: Vec<f64> = (0..m).map(|k| vphi[k][j]).collect();
            let vv: Vec<f64> = (0..m).map(|k| v[k].w[j]).collect();
            let lap_v: Vec<f64> = (0..m)
                .map(|k| (v[k].r2w[j] + (nf - 1.0) * v[k].rw[j] - lam[k] * v[k].w[j]) / (rho * rho))
                .collect();
            let mut vals = Vec::with_capacity(ws.points.len());
            let (mut res, mut bres) = (0.0_f64, 0.0_f64);
            let mut c3 = f64::INFINITY;
            let floor = eps * rho.powf((2.0 - nf) / 2.0);
            for q in 0..ws.points.len() {
                let b = bg[j][q];
                let phi_q = ws.synth(&vp, q);
                let w = phi_q + ws.synth(&vv, q);
                let qv = q_closed_form(n, b.u, w)?;
                vals.push(qv + b.pot * if ws.translated { phi_q } else { 0.0 });
                let total = b.u + w;
                let scale = c * total.abs().powf(p);
                let r = b.lap + ws.synth(&lap_v, q) + c * signed_pow(total, p);
                res = res.max(r.abs() / scale);
                bres = bres.max((b.lap + c * b.u.powf(p)).abs() / (c * b.u.powf(p)));
                c3 = c3.min(total / floor);
            }
            let (coef, alias) = ws.project(&vals);
            Ok((coef, alias, res, bres, c3))
        })
        .collect();
    let mut source = vec![vec![0.0; ws.nr()]; m];
    let (mut res, mut bres, mut alias, mut c3) = (0.0_f64, 0.0_f64, 0.0_f64, f64::INFINITY);
    for (j, row) in rows.into_iter().enumerate() {
        let (coef, a, r, b, c) = row?;
        for k in 0..m {
            source[k][j] = coef[k];
        }
        alias = alias.max(a);
        res = res.max(r);
        bres = bres.max(b);
        c3 = c3.min(c);
    }
    if !ws.translated {
        // radial potential acts diagonally on the modes of v_phi
        let q = ws.ops.scaled_potential();
        let rho = grid.rho();
        for k in 0..m {
            for j in 0..ws.nr() {
                source[k][j] += q[j] / (rho[j] * rho[j]) * vphi[k][j];
            }
        }
    }
    Ok(Sweep {
        source,
        residual: res,
        background_residual: bres,
        aliasing: alias,
        c3,
    })
}

fn sub(a: &[ModeSolution], b: &[ModeSolution]) -> Vec<ModeSolution> {
    a.iter()
        .zip(b)
        .map(|(x, y)| ModeSolution {
            w: x.w.iter().zip(&y.w).map(|(p, q)| p - q).collect(),
            rw: x.rw.iter().zip(&y.rw).map(|(p, q)| p - q).collect(),
            r2w: x.r2w.iter().zip(&y.r2w).map(|(p, q)| p - q).collect(),
            residual: 0.0,
        })
        .collect()
}

fn add(a: &[ModeSolution], b: &[ModeSolution]) -> Vec<ModeSolution> {
    a.iter()
        .zip(b)
        .map(|(x, y)| ModeSolution {
            w: x.w.iter().zip(&y.w).map(|(p, q)| p + q).collect(),
            rw: x.rw.iter().zip(&y.rw).map(|(p, q)| p + q).collect(),
            r2w: x.r2w.iter().zip(&y.r2w).map(|(p, q)| p + q).collect(),
            residual: 0.0,
        })
        .collect()
}

fn build(
    params: &FamilyParams,
    phi: &BoundaryData,
    budget: &ParameterBudget,
    cfg: &PicardConfig,
) -> Result<(Workspace, f64, f64, f64)> {
    let n = params.dimension();
    budget.validate()?;
    if budget.n != n {
        return Err(GluingError::Parameter(
            "budget dimension differs from the orbit".into(),
        ));
    }
    let eps = params.orbit().epsilon();
    let r_eps = budget.r_eps(eps);
    if (phi.r - r_eps).abs() > 1e-12 * r_eps {
        return Err(GluingError::Parameter(format!(
            "boundary data lives on radius {}, expected r_eps = {r_eps}",
            phi.r
        )));
    }
    if !phi.is_high_mode() {
        return Err(GluingError::Contract(
            "boundary data must be high-mode".into(),
        ));
    }
    if phi.max_degree() > cfg.truncation {
        return Err(GluingError::Parameter(format!(
            "boundary data degree {} above truncation {}",
            phi.max_degree(),
            cfg.truncation
        )));
    }
    let a_norm = params.a().iter().map(|c| c * c).sum::<f64>().sqrt();
    if a_norm * r_eps.powf(1.0 - budget.delta2) > 1.0 {
        return Err(GluingError::Parameter(format!(
            "|a| = {a_norm} exceeds r_eps^(delta2 - 1)"
        )));
    }
    let basis = build_basis(n, cfg.truncation)?;
    let phi_fn = |y: &[f64]| phi.eval(&basis, y).unwrap_or(f64::NAN);
    let phi_norm = norm_sphere(
        &phi_fn,
        n.get(),
        2,
        cfg.alpha,
        r_eps,
        cfg.norm_samples,
        cfg.seed,
    )?;
    let phi_bound = budget.kappa * r_eps.powf(budget.phi_exponent());
    if !(phi_norm <= phi_bound) {
        return Err(GluingError::Parameter(format!(
            "||phi|| = {phi_norm:.3e} exceeds kappa r_eps^(2+d-n/2-delta1) = {phi_bound:.3e}"
        )));
    }
    let grid = RadialGrid::for_family(params, r_eps, cfg.periods, cfg.step)?;
    let t0 = grid.t()[0];
    let period = params.orbit().period();
    let from = grid.t().iter().position(|t| *t >= t0 + period).unwrap_or(0);
    let ops = ModeOperators::new(params, grid)?;
    let quad = SphereQuadrature::for_dimension(n, cfg.sphere_order, cfg.seed);
    let points = quad.points().to_vec();
    let weights = quad.weights().to_vec();
    let keys = basis.keys();
    let m = keys.len();
    let mut e = Vec::with_capacity(points.len() * m);
    for p in &points {
        e.extend(basis.eval_all(p));
    }
    let mut sup_e = vec![0.0_f64; m];
    for q in 0..points.len() {
        for k in 0..m {
            sup_e[k] = sup_e[k].max(e[q * m + k].abs());
        }
    }
    let degrees = keys.iter().map(|k| k.degree).collect();
    let ws = Workspace {
        params: params.clone(),
        ops,
        basis,
        keys,
        degrees,
        points,
        weights,
        e,
        sup_e,
        mu: budget.mu,
        from,
        translated: a_norm > 0.0,
    };
    Ok((ws, r_eps, phi_norm, phi_bound))
}

/// Iterate `v <- G(-Q(v_phi + v) - P v_phi)` from `v = 0`.
///
/// For `a != 0` the inverse of `L_a = L + (P_a - P)` is replaced by the
/// two-term series `G - G dP G + G dP G dP G`; the run is refused when the
/// second term is more than half the first.
pub fn picard_interior(
    params: &FamilyParams,
    phi: &BoundaryData,
    budget: &ParameterBudget,
    cfg: &PicardConfig,
) -> Result<PicardReport> {
    let (ws, r_eps, phi_norm, phi_bound) = build(params, phi, budget, cfg)?;
    let m = ws.m();
    let nr = ws.nr();
    let rho = ws.ops.grid().rho().to_vec();
    let vphi: Vec<Vec<f64>> = ws
        .keys
        .iter()
        .map(|k| {
            let c = phi.coefficient(*k);
            rho.iter()
                .map(|r| c * (r / r_eps).powi(k.degree as i32))
                .collect()
        })
        .collect();
    let bg: Vec<Vec<Background>> = (0..nr)
        .into_par_iter()
        .map(|j| {
            (0..ws.points.len())
                .map(|q| background(&ws, j, q))
                .collect()
        })
        .collect::<Result<_>>()?;
    let dp: Option<Vec<Vec<f64>>> = ws.translated.then(|| {
        let q = ws.ops.scaled_potential();
        (0..nr)
            .map(|j| {
                bg[j]
                    .iter()
                    .map(|b| b.pot - q[j] / (rho[j] * rho[j]))
                    .collect()
            })
            .collect()
    });

    let mut v: Vec<ModeSolution> = vec![ModeSolution::zero(nr); m];
    let mut increments = Vec::new();
    let mut residuals = Vec::new();
    let mut aliasing: f64 = 0.0;
    let mut neumann: Option<f64> = None;
    let mut last;
    let mut iterations = 0;
    loop {
        let s = sweep(&ws, &bg, &vphi, &v)?;
        residuals.push(s.residual);
        aliasing = aliasing.max(s.aliasing);
        last = s;
        if aliasing > cfg.aliasing_tol {
            return Err(GluingError::Accuracy(format!(
                "out-of-degree energy fraction {aliasing:.3e} above {}",
                cfg.aliasing_tol
            )));
        }
        let converged = increments
            .last()
            .is_some_and(|d: &f64| *d <= cfg.tol * ws.norm(&v).max(f64::MIN_POSITIVE));
        if converged || iterations == cfg.max_iter {
            break;
        }
        let f: Vec<Vec<f64>> = last
            .source
            .iter()
            .map(|s| s.iter().map(|x| -x).collect())
            .collect();
        let mut next = ws.solve_all(&f)?;
        if let Some(dp) = &dp {
            let y1 = ws.solve_all(&ws.perturb(&next, dp))?;
            let y2 = ws.solve_all(&ws.perturb(&y1, dp))?;
            let (n0, n1) = (ws.norm(&next), ws.norm(&y1));
            let factor = if n0 > 0.0 { n1 / n0 } else { 0.0 };
            neumann = Some(neumann.map_or(factor, |x: f64| x.max(factor)));
            if factor > 0.5 {
                return Err(GluingError::Unsupported(format!(
                    "translation too large for the two-term inverse (ratio {factor:.3})"
                )));
            }
            next = add(&sub(&next, &y1), &y2);
        }
        let d = ws.norm(&sub(&next, &v));
        if !d.is_finite() {
            return Err(GluingError::NonContraction {
                block: "interior".into(),
                detail: "non-finite iterate".into(),
                norms: increments,
            });
        }
        increments.push(d);
        v = next;
        iterations += 1;
        let k = increments.len();
        if k >= 3 && increments[k - 1] > increments[k - 2] && increments[k - 2] > increments[k - 3]
        {
            return Err(GluingError::NonContraction {
                block: "interior".into(),
                detail: "increments grew twice in a row".into(),
                norms: increments,
            });
        }
    }
    let converged = increments
        .last()
        .is_some_and(|d| *d <= cfg.tol * ws.norm(&v).max(f64::MIN_POSITIVE));
    if !converged && iterations > 0 {
        return Err(GluingError::NonContraction {
            block: "interior".into(),
            detail: format!("no convergence in {} iterations", cfg.max_iter),
            norms: increments,
        });
    }
    let contraction = increments
        .windows(2)
        .map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 })
        .collect();
    let norm = ws.norm(&v);
    let envelope = r_eps.powf(budget.envelope_exponent());
    let profiles = v.iter().map(|s| s.w.clone()).collect();
    let solution = ModeExpansion::new(params.dimension(), rho, ws.keys.clone(), profiles)?;
    let _ = &ws.basis;
    Ok(PicardReport {
        solution,
        grid: ws.ops.grid().clone(),
        iterations,
        increments,
        contraction,
        residual: last.residual,
        background_residual: last.background_residual,
        residuals,
        aliasing,
        norm,
        envelope,
        tau: norm / envelope,
        c3: last.c3,
        phi_norm,
        phi_bound,
        r_eps,
        neumann_factor: neumann,
    })
}

/// `||v(phi1) - v(phi2)|| / ||phi1 - phi2||` and that ratio times
/// `r_eps^mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzReport {
    pub ratio: f64,
    pub constant: f64,
}

pub fn lipschitz_check(
    params: &FamilyParams,
    phi1: &BoundaryData,
    phi2: &BoundaryData,
    budget: &ParameterBudget,
    cfg: &PicardConfig,
) -> Result<LipschitzReport> {
    let a = picard_interior(params, phi1, budget, cfg)?;
    let b = picard_interior(params, phi2, budget, cfg)?;
    let (ws, r_eps, _, _) = build(params, phi1, budget, cfg)?;
    let diff: Vec<ModeSolution> = a
        .solution
        .profiles()
        .iter()
        .zip(b.solution.profiles())
        .map(|(x, y)| {
            let w: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
            let h = ws.ops.grid().step();
            let t = ws.ops.grid().t();
            derived_profile(&w, t, h)
        })
        .collect();
    let dphi = phi1.add(&phi2.scale(-1.0))?;
    let basis = build_basis(params.dimension(), cfg.truncation)?;
    let f = |y: &[f64]| dphi.eval(&basis, y).unwrap_or(f64::NAN);
    let dn = norm_sphere(
        &f,
        params.dimension().get(),
        2,
        cfg.alpha,
        r_eps,
        cfg.norm_samples,
        cfg.seed,
    )?;
    if !(dn > 0.0) {
        return Err(GluingError::Parameter("identical boundary data".into()));
    }
    let ratio = ws.norm(&diff) / dn;
    Ok(LipschitzReport {
        ratio,
        constant: ratio * r_eps.powf(budget.mu),
    })
}

/// Profile with `rho w'` and `rho^2 w''` from differences in `t`.
fn derived_profile(w: &[f64], _t: &[f64], h: f64) -> ModeSolution {
    let (d1, d2) = crate::linearized::bvp::derivatives(w, h);
    ModeSolution {
        w: w.to_vec(),
        rw: d1.clone(),
        r2w: d2.iter().zip(&d1).map(|(a, b)| a - b).collect(),
        residual: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay_ode::{integrate_orbit, Dimension};
    use std::sync::Arc;

    fn setup() -> (FamilyParams, ParameterBudget, PicardConfig) {
        let n = Dimension::new(4).unwrap();
        let orbit = Arc::new(integrate_orbit(n, 0.1, 1e-10).unwrap());
        let params = FamilyParams::from_b(orbit, 0.0, vec![0.0; 4]).unwrap();
        let cfg = PicardConfig {
            periods: 2.0,
            ..PicardConfig::default()
        };
        (params, ParameterBudget::defaults(n), cfg)
    }

    #[test]
    fn zero_data_is_fixed() {
        let (params, budget, cfg) = setup();
        let phi = BoundaryData::zero(budget.n, budget.r_eps(0.1));
        let rep = picard_interior(&params, &phi, &budget, &cfg).unwrap();
        assert_eq!(rep.norm, 0.0);
        assert!(rep.residual < 1e-8, "{}", rep.residual);
    }

    #[test]
    fn oversized_data_rejected() {
        let (params, budget, cfg) = setup();
        let phi = BoundaryData::new(
            budget.n,
            budget.r_eps(0.1),
            vec![(ModeKey::new(2, 0), 10.0)],
        )
        .unwrap();
        let err = picard_interior(&params, &phi, &budget, &cfg).unwrap_err();
        assert!(matches!(err, GluingError::Parameter(_)), "{err}");
    }

    #[test]
    fn small_degree_two_data_converges() {
        let (params, budget, cfg) = setup();
        let r = budget.r_eps(0.1);
        let bound = budget.kappa * r.powf(budget.phi_exponent());
        let phi = BoundaryData::new(budget.n, r, vec![(ModeKey::new(2, 0), 0.01 * bound)]).unwrap();
        let rep = picard_interior(&params, &phi, &budget, &cfg).unwrap();
        assert!(
            rep.contraction.iter().skip(1).all(|c| *c < 0.5),
            "{:?}",
            rep.contraction
        );
        assert!(rep.residual < 1e-6, "{}", rep.residual);
        assert!(rep.c3 > 0.0);
    }
}
