//! Mode-by-mode radial solves for `L_{eps,R} w = f`.
//!
//! For a harmonic of degree `i`, in `t = log rho` and with
//! `w = e^{-alpha t} Y`, `alpha = (n-2)/2`, the radial equation
//! `w'' + (n-1)/rho w' - lambda_i/rho^2 w + P(rho) w = f` becomes
//! `Y'' = g Y + S` with `g = alpha^2 + lambda_i - rho^2 P` and
//! `S = e^{(alpha+2) t} f`. It is discretized with Numerov's stencil on a
//! uniform `t` grid.

use crate::delaunay_family::{u_eps_r, FamilyParams};
use crate::error::{GluingError, Result};
use crate::harmonics::eigenvalue;

/// Uniform grid in `t = log rho` on `[rho_in, rho_out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialGrid {
    t: Vec<f64>,
    rho: Vec<f64>,
    h: f64,
}

impl RadialGrid {
    pub fn new(rho_in: f64, rho_out: f64, max_step: f64) -> Result<Self> {
        if !(rho_in > 0.0 && rho_out > rho_in && max_step > 0.0) {
            return Err(GluingError::Parameter(format!(
                "bad radial grid ({rho_in}, {rho_out}, step {max_step})"
            )));
        }
        let (a, b) = (rho_in.ln(), rho_out.ln());
        let cells = ((b - a) / max_step).ceil().max(8.0) as usize;
        let h = (b - a) / cells as f64;
        let t: Vec<f64> = (0..=cells)
            .map(|j| if j == cells { b } else { a + j as f64 * h })
            .collect();
        let mut rho: Vec<f64> = t.iter().map(|s| s.exp()).collect();
        rho[0] = rho_in;
        rho[cells] = rho_out;
        Ok(RadialGrid { t, rho, h })
    }

    /// Grid ending at `r_outer` and starting `periods` Delaunay periods
    /// further in.
    pub fn for_family(
        params: &FamilyParams,
        r_outer: f64,
        periods: f64,
        max_step: f64,
    ) -> Result<Self> {
        let rho_in = r_outer * (-periods * params.orbit().period()).exp();
        RadialGrid::new(rho_in, r_outer, max_step)
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// `n(n+2)/4 u_{eps,R}(rho)^{4/(n-2)}`.
pub fn potential(params: &FamilyParams, rho: f64) -> Result<f64> {
    let n = params.dimension();
    let (u, _, _) = u_eps_r(params, rho)?;
    Ok(n.potential_coefficient() * u.powf(n.conformal_exponent()))
}

/// The radial operators of every degree on one grid; stores `rho^2 P`.
#[derive(Debug, Clone)]
pub struct ModeOperators {
    params: FamilyParams,
    grid: RadialGrid,
    q: Vec<f64>,
}

/// A solved profile with its scaled derivatives `rho w'` and `rho^2 w''`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSolution {
    pub w: Vec<f64>,
    pub rw: Vec<f64>,
    pub r2w: Vec<f64>,
    /// Largest stencil residual relative to the largest `|f|`.
    pub residual: f64,
}

impl ModeSolution {
    pub fn zero(len: usize) -> Self {
        ModeSolution {
            w: vec![0.0; len],
            rw: vec![0.0; len],
            r2w: vec![0.0; len],
            residual: 0.0,
        }
    }
}

/// One radial problem: degree, right-hand side on the grid, weight.
#[derive(Debug, Clone, Copy)]
pub struct RadialBVP<'a> {
    pub ops: &'a ModeOperators,
    pub degree: u32,
    pub rhs: &'a [f64],
    pub mu: f64,
}

/// Residual tolerance for the discrete solve.
pub const SOLVE_TOL: f64 = 1e-8;

impl ModeOperators {
    pub fn new(params: &FamilyParams, grid: RadialGrid) -> Result<Self> {
        let n = params.dimension();
        let coef = n.potential_coefficient();
        let q = grid
            .rho()
            .iter()
            .map(|&rho| {
                let (v, _, _) = params.orbit().eval((params.r_scale() / rho).ln());
                coef * v.powf(n.conformal_exponent())
            })
            .collect();
        Ok(ModeOperators {
            params: params.clone(),
            grid,
            q,
        })
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn params(&self) -> &FamilyParams {
        &self.params
    }

    /// `rho^2 P(rho)` on the grid.
    pub fn scaled_potential(&self) -> &[f64] {
        &self.q
    }

    fn alpha(&self) -> f64 {
        (self.params.dimension().as_f64() - 2.0) / 2.0
    }

    /// `L_i w` from a profile and its scaled derivatives.
    pub fn apply(&self, degree: u32, w: &[f64], rw: &[f64], r2w: &[f64]) -> Vec<f64> {
        let n = self.params.dimension();
        let lam = eigenvalue(n, degree) as f64;
        let nf = n.as_f64();
        (0..w.len())
            .map(|j| {
                let rho = self.grid.rho[j];
                (r2w[j] + (nf - 1.0) * rw[j] - lam * w[j] + self.q[j] * w[j]) / (rho * rho)
            })
            .collect()
    }

    /// Solve `L_i w = f`. Degrees `>= 2`: Dirichlet at the outer radius and
    /// the decaying branch `Y ~ e^{(i+alpha) t}` at the inner cut. Degrees 0
    /// and 1: zero Cauchy data at the inner cut, marched outward.
    pub fn solve(&self, degree: u32, rhs: &[f64], mu: f64) -> Result<ModeSolution> {
        let n = self.params.dimension();
        let nf = n.as_f64();
        if rhs.len() != self.grid.len() {
            return Err(GluingError::Parameter(format!(
                "rhs has {} samples, grid has {}",
                rhs.len(),
                self.grid.len()
            )));
        }
        if degree >= 2 {
            if !(mu > -nf && mu < 2.0) {
                return Err(GluingError::Parameter(format!(
                    "mu = {mu} outside (-n, 2) for a high mode"
                )));
            }
        } else if !(mu > 1.0 && mu < 2.0) {
            return Err(GluingError::Parameter(format!(
                "mu = {mu} outside (1, 2) for a low mode"
            )));
        }
        if rhs.iter().any(|v| !v.is_finite()) {
            return Err(GluingError::Parameter("non-finite right-hand side".into()));
        }
        let fmax = rhs.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let len = self.grid.len();
        if fmax == 0.0 {
            return Ok(ModeSolution::zero(len));
        }
        let alpha = self.alpha();
        let lam = eigenvalue(n, degree) as f64;
        let h = self.grid.h;
        let h12 = h * h / 12.0;
        let t = &self.grid.t;
        let g: Vec<f64> = self.q.iter().map(|q| alpha * alpha + lam - q).collect();
        let s: Vec<f64> = (0..len)
            .map(|j| ((alpha + 2.0) * t[j]).exp() * rhs[j])
            .collect();
        let a: Vec<f64> = g.iter().map(|gj| 1.0 - h12 * gj).collect();
        let b: Vec<f64> = g.iter().map(|gj| -2.0 * (1.0 + 5.0 * h12 * gj)).collect();
        let d = |j: usize| h12 * (s[j - 1] + 10.0 * s[j] + s[j + 1]);

        let mut y = vec![0.0; len];
        if degree >= 2 {
            let kappa = degree as f64 + alpha;
            let m = len - 2; // unknowns y[1..=len-2]
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut lower = vec![0.0; m];
            let mut r = vec![0.0; m];
            for k in 0..m {
                let j = k + 1;
                diag[k] = b[j];
                lower[k] = a[j - 1];
                upper[k] = a[j + 1];
                r[k] = d(j);
            }
            diag[0] += lower[0] * (-kappa * h).exp();
            // Thomas
            for k in 1..m {
                let w = lower[k] / diag[k - 1];
                diag[k] -= w * upper[k - 1];
                r[k] -= w * r[k - 1];
            }
            if diag.iter().any(|v| v.abs() < 1e-300 || !v.is_finite()) {
                return Err(GluingError::Solver("singular tridiagonal system".into()));
            }
            let mut sol = vec![0.0; m];
            sol[m - 1] = r[m - 1] / diag[m - 1];
            for k in (0..m - 1).rev() {
                sol[k] = (r[k] - upper[k] * sol[k + 1]) / diag[k];
            }
            y[1..=m].copy_from_slice(&sol);
            y[0] = (-kappa * h).exp() * y[1];
            y[len - 1] = 0.0;
        } else {
            for j in 1..len - 1 {
                y[j + 1] = (d(j) - a[j - 1] * y[j - 1] - b[j] * y[j]) / a[j + 1];
            }
        }

        let mut worst: f64 = 0.0;
        for j in 1..len - 1 {
            let stencil = a[j - 1] * y[j - 1] + b[j] * y[j] + a[j + 1] * y[j + 1] - d(j);
            let phys = stencil / (h * h) * (-(alpha + 2.0) * t[j]).exp();
            worst = worst.max(phys.abs());
        }
        let residual = worst / fmax;
        if !(residual <= SOLVE_TOL) {
            return Err(GluingError::Solver(format!(
                "mode {degree} solve residual {residual:.3e} above {SOLVE_TOL:.0e}"
            )));
        }
        let (yp, ypp) = derivatives(&y, h);
        let mut w = vec![0.0; len];
        let mut rw = vec![0.0; len];
        let mut r2w = vec![0.0; len];
        for j in 0..len {
            let e = (-alpha * t[j]).exp();
            let wt = e * (yp[j] - alpha * y[j]);
            let wtt = e * (ypp[j] - 2.0 * alpha * yp[j] + alpha * alpha * y[j]);
            w[j] = e * y[j];
            rw[j] = wt;
            r2w[j] = wtt - wt;
        }
        Ok(ModeSolution {
            w,
            rw,
            r2w,
            residual,
        })
    }
}

/// Fourth-order first and second differences on a uniform grid.
pub(crate) fn derivatives(y: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    assert!(n >= 6, "need at least six samples");
    let mut d1 = vec![0.0; n];
    let mut d2 = vec![0.0; n];
    let h2 = h * h;
    for j in 2..n - 2 {
        d1[j] = (y[j - 2] - 8.0 * y[j - 1] + 8.0 * y[j + 1] - y[j + 2]) / (12.0 * h);
        d2[j] =
            (-y[j - 2] + 16.0 * y[j - 1] - 30.0 * y[j] + 16.0 * y[j + 1] - y[j + 2]) / (12.0 * h2);
    }
    let left = |y0: f64, y1: f64, y2: f64, y3: f64, y4: f64, y5: f64| {
        (
            (-25.0 * y0 + 48.0 * y1 - 36.0 * y2 + 16.0 * y3 - 3.0 * y4) / (12.0 * h),
            (-3.0 * y0 - 10.0 * y1 + 18.0 * y2 - 6.0 * y3 + y4) / (12.0 * h),
            (45.0 * y0 - 154.0 * y1 + 214.0 * y2 - 156.0 * y3 + 61.0 * y4 - 10.0 * y5)
                / (12.0 * h2),
            (10.0 * y0 - 15.0 * y1 - 4.0 * y2 + 14.0 * y3 - 6.0 * y4 + y5) / (12.0 * h2),
        )
    };
    let (a0, a1, b0, b1) = left(y[0], y[1], y[2], y[3], y[4], y[5]);
    d1[0] = a0;
    d1[1] = a1;
    d2[0] = b0;
    d2[1] = b1;
    let (a0, a1, b0, b1) = left(y[n - 1], y[n - 2], y[n - 3], y[n - 4], y[n - 5], y[n - 6]);
    d1[n - 1] = -a0;
    d1[n - 2] = -a1;
    d2[n - 1] = b0;
    d2[n - 2] = b1;
    (d1, d2)
}

/// Solve one [`RadialBVP`].
pub fn solve_mode_bvp(bvp: &RadialBVP) -> Result<ModeSolution> {
    bvp.ops.solve(bvp.degree, bvp.rhs, bvp.mu)
}

/// `sup rho^{-mu} (|w| + |rho w'| + |rho^2 w''|)` over grid indices
/// `from..`, the radial surrogate of the weighted `C^{2,alpha}` norm.
pub fn profile_norm(grid: &RadialGrid, sol: &ModeSolution, mu: f64, from: usize) -> f64 {
    (from..grid.len())
        .map(|j| grid.rho[j].powf(-mu) * (sol.w[j].abs() + sol.rw[j].abs() + sol.r2w[j].abs()))
        .fold(0.0, f64::max)
}

/// `sup rho^{2-mu} |f|` over grid indices `from..`.
pub fn source_norm(grid: &RadialGrid, f: &[f64], mu: f64, from: usize) -> f64 {
    (from..grid.len())
        .map(|j| grid.rho[j].powf(2.0 - mu) * f[j].abs())
        .fold(0.0, f64::max)
}
