//! The Fowler ODE `v'' = (n-2)^2/4 v - n(n-2)/4 v^{(n+2)/(n-2)}` written as a
//! Hamiltonian system in `(v, w = v')`, its periodic orbits, and dense
//! periodic evaluation of one stored period.

use crate::error::{GluingError, Result};

/// Ambient dimension `n` of the punctured ball, restricted to `3..=10`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Dimension(usize);

impl Dimension {
    pub const MIN: usize = 3;
    pub const MAX: usize = 10;

    pub fn new(n: usize) -> Result<Self> {
        if !(Self::MIN..=Self::MAX).contains(&n) {
            return Err(GluingError::Parameter(format!(
                "dimension n = {n} outside supported range {}..={}",
                Self::MIN,
                Self::MAX
            )));
        }
        Ok(Dimension(n))
    }

    #[inline]
    pub fn get(self) -> usize {
        self.0
    }

    #[inline]
    pub fn as_f64(self) -> f64 {
        self.0 as f64
    }

    /// `d = [(n-2)/2]`.
    pub fn d(self) -> usize {
        (self.0 - 2) / 2
    }

    /// `(n+2)/(n-2)`.
    pub fn critical_exponent(self) -> f64 {
        let n = self.as_f64();
        (n + 2.0) / (n - 2.0)
    }

    /// `4/(n-2)`, the exponent of the conformal factor in the metric.
    pub fn conformal_exponent(self) -> f64 {
        4.0 / (self.as_f64() - 2.0)
    }

    /// `(2-n)/2`, the homogeneity of the singular radial profile.
    pub fn radial_exponent(self) -> f64 {
        (2.0 - self.as_f64()) / 2.0
    }

    /// The constant (cylinder) solution `((n-2)/n)^{(n-2)/4}`.
    pub fn cylinder_value(self) -> f64 {
        let n = self.as_f64();
        ((n - 2.0) / n).powf((n - 2.0) / 4.0)
    }

    /// Energy of the cylinder, `-((n-2)/n)^{n/2} (n-2)/2`.
    pub fn cylinder_energy(self) -> f64 {
        let n = self.as_f64();
        -((n - 2.0) / n).powf(n / 2.0) * (n - 2.0) / 2.0
    }

    /// `n(n-2)/4`, coefficient of the nonlinearity.
    pub fn nonlinear_coefficient(self) -> f64 {
        let n = self.as_f64();
        n * (n - 2.0) / 4.0
    }

    /// `n(n+2)/4`, coefficient of the linearized potential.
    pub fn potential_coefficient(self) -> f64 {
        let n = self.as_f64();
        n * (n + 2.0) / 4.0
    }
}

/// `|v|^{p-1} v`, the odd extension of `v^p`.
#[inline]
pub(crate) fn signed_pow(v: f64, p: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(p)
    }
}

/// `w' = (n-2)^2/4 v - n(n-2)/4 v^{(n+2)/(n-2)}` without domain checks.
#[inline]
pub(crate) fn force(n: Dimension, v: f64) -> f64 {
    let nf = n.as_f64();
    let a = (nf - 2.0) * (nf - 2.0) / 4.0;
    a * v - n.nonlinear_coefficient() * signed_pow(v, n.critical_exponent())
}

/// Derivative of [`force`] with respect to `v`.
#[inline]
pub(crate) fn force_derivative(n: Dimension, v: f64) -> f64 {
    let nf = n.as_f64();
    let a = (nf - 2.0) * (nf - 2.0) / 4.0;
    let p = n.critical_exponent();
    a - n.nonlinear_coefficient() * p * v.abs().powf(p - 1.0)
}

#[inline]
fn energy(n: Dimension, v: f64, w: f64) -> f64 {
    let nf = n.as_f64();
    let a = (nf - 2.0) * (nf - 2.0) / 4.0;
    w * w - a * v * v + a * v.abs().powf(2.0 * nf / (nf - 2.0))
}

fn check_nonnegative(v: f64) -> Result<()> {
    if v < 0.0 || v.is_nan() {
        return Err(GluingError::Domain(format!(
            "v = {v} is negative; fractional power undefined"
        )));
    }
    Ok(())
}

/// Right-hand side of the first-order system: `(v', w')`.
pub fn ode_rhs(n: Dimension, v: f64, w: f64) -> Result<(f64, f64)> {
    check_nonnegative(v)?;
    Ok((w, force(n, v)))
}

/// `H(v, w) = w^2 - (n-2)^2/4 v^2 + (n-2)^2/4 v^{2n/(n-2)}`.
pub fn hamiltonian(n: Dimension, v: f64, w: f64) -> Result<f64> {
    check_nonnegative(v)?;
    Ok(energy(n, v, w))
}

// Gragg-Bulirsch-Stoer step: modified midpoint rule extrapolated in h^2.
const GBS_SEQUENCE: [usize; 12] = [2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24];
const GBS_TOL: f64 = 1e-14;

fn modified_midpoint(n: Dimension, y: [f64; 2], h: f64, m: usize) -> [f64; 2] {
    let sub = h / m as f64;
    let mut z0 = y;
    let mut z1 = [y[0] + sub * y[1], y[1] + sub * force(n, y[0])];
    for _ in 1..m {
        let z2 = [
            z0[0] + 2.0 * sub * z1[1],
            z0[1] + 2.0 * sub * force(n, z1[0]),
        ];
        z0 = z1;
        z1 = z2;
    }
    [
        0.5 * (z1[0] + z0[0] + sub * z1[1]),
        0.5 * (z1[1] + z0[1] + sub * force(n, z1[0])),
    ]
}

/// One extrapolated step of size `h`; `None` when the table does not settle.
fn gbs_step(n: Dimension, y: [f64; 2], h: f64) -> Option<[f64; 2]> {
    let mut table: Vec<[f64; 2]> = Vec::with_capacity(GBS_SEQUENCE.len());
    for (j, &m) in GBS_SEQUENCE.iter().enumerate() {
        let mut row = vec![modified_midpoint(n, y, h, m)];
        for k in 1..=j {
            let ratio = (m as f64 / GBS_SEQUENCE[j - k] as f64).powi(2);
            let prev = table[k - 1];
            let cur = row[k - 1];
            row.push([
                cur[0] + (cur[0] - prev[0]) / (ratio - 1.0),
                cur[1] + (cur[1] - prev[1]) / (ratio - 1.0),
            ]);
        }
        if j >= 2 {
            let a = row[j];
            let b = row[j - 1];
            let scale = 1.0 + a[0].abs().max(a[1].abs());
            if (a[0] - b[0]).abs().max((a[1] - b[1]).abs()) <= GBS_TOL * scale {
                return Some(a);
            }
        }
        table = row.to_vec();
        // keep the full diagonal row as the new previous row
        table.truncate(j + 1);
    }
    None
}

/// Advance `y` by `h`, subdividing until the extrapolation converges.
fn advance(n: Dimension, y: [f64; 2], h: f64) -> Result<[f64; 2]> {
    if let Some(next) = gbs_step(n, y, h) {
        return Ok(next);
    }
    if h.abs() < 1e-9 {
        return Err(GluingError::Integration(format!(
            "step size underflow at v = {}, w = {}",
            y[0], y[1]
        )));
    }
    let mid = advance(n, y, 0.5 * h)?;
    advance(n, mid, 0.5 * h)
}

const MAX_STEP: f64 = 0.1;

/// Integrate from `(v0, w0)` and record the state every `dt_out` up to
/// `t_end`. Returns rows `(t, v, w)` starting at `t = 0`.
pub fn integrate_trajectory(
    n: Dimension,
    v0: f64,
    w0: f64,
    t_end: f64,
    dt_out: f64,
) -> Result<Vec<(f64, f64, f64)>> {
    check_nonnegative(v0)?;
    if !(dt_out > 0.0) || !(t_end >= 0.0) {
        return Err(GluingError::Parameter(format!(
            "need dt_out > 0 and t_end >= 0 (got {dt_out}, {t_end})"
        )));
    }
    let steps = (t_end / dt_out).ceil() as usize;
    let sub = (dt_out / MAX_STEP).ceil().max(1.0) as usize;
    let mut y = [v0, w0];
    let mut rows = Vec::with_capacity(steps + 1);
    rows.push((0.0, v0, w0));
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * dt_out;
        let t_next = (k as f64 * dt_out).min(t_end);
        let h = (t_next - t_prev) / sub as f64;
        for _ in 0..sub {
            y = advance(n, y, h)?;
        }
        rows.push((t_next, y[0], y[1]));
    }
    Ok(rows)
}

/// Tolerances for [`integrate_orbit_with`].
#[derive(Debug, Clone, Copy)]
pub struct OrbitOptions {
    /// Allowed relative drift of the Hamiltonian along the orbit.
    pub tol_h: f64,
    /// Allowed `|v(T) - v(0)| + |w(T) - w(0)|`.
    pub tol_period: f64,
    /// Upper bound on the spacing of stored samples.
    pub max_sample_spacing: f64,
    /// Give up looking for the period after this much time.
    pub horizon: f64,
}

impl Default for OrbitOptions {
    fn default() -> Self {
        OrbitOptions {
            tol_h: 1e-10,
            tol_period: 1e-8,
            max_sample_spacing: 4e-3,
            horizon: 1e3,
        }
    }
}

/// One period of the Fowler solution with `v(0) = min v = epsilon`.
///
/// Immutable after construction; evaluation reduces `t` modulo the period
/// and interpolates the stored samples with quintic Hermite polynomials
/// whose derivative data come from the ODE itself.
#[derive(Debug, Clone)]
pub struct DelaunayOrbit {
    n: Dimension,
    epsilon: f64,
    period: f64,
    h0: f64,
    spacing: f64,
    v: Vec<f64>,
    w: Vec<f64>,
}

/// `integrate_orbit_with` using `tol` as the Hamiltonian tolerance.
pub fn integrate_orbit(n: Dimension, epsilon: f64, tol: f64) -> Result<DelaunayOrbit> {
    integrate_orbit_with(
        n,
        epsilon,
        &OrbitOptions {
            tol_h: tol,
            ..OrbitOptions::default()
        },
    )
}

pub fn integrate_orbit_with(
    n: Dimension,
    epsilon: f64,
    opts: &OrbitOptions,
) -> Result<DelaunayOrbit> {
    let cyl = n.cylinder_value();
    if !(epsilon > 0.0 && epsilon < cyl) {
        return Err(GluingError::Parameter(format!(
            "epsilon = {epsilon} outside (0, {cyl}) for n = {}",
            n.get()
        )));
    }
    if !(opts.tol_h > 0.0) {
        return Err(GluingError::Parameter(format!(
            "tolerance must be positive, got {}",
            opts.tol_h
        )));
    }
    let h0 = energy(n, epsilon, 0.0);
    // rounding in H scales with its O(1) terms, not with |h0| ~ eps^2
    let drift_limit = opts.tol_h * h0.abs().max(n.cylinder_energy().abs());

    let period = find_period(n, epsilon, h0, drift_limit, opts.horizon)?;

    let count = ((period / opts.max_sample_spacing).ceil() as usize).max(4096);
    let spacing = period / count as f64;
    let mut v = Vec::with_capacity(count + 1);
    let mut w = Vec::with_capacity(count + 1);
    let mut y = [epsilon, 0.0];
    v.push(y[0]);
    w.push(y[1]);
    for _ in 0..count {
        y = advance(n, y, spacing)?;
        if (energy(n, y[0], y[1]) - h0).abs() > drift_limit {
            return Err(GluingError::Integration(format!(
                "Hamiltonian drift {:.3e} exceeds tolerance while sampling",
                (energy(n, y[0], y[1]) - h0).abs()
            )));
        }
        v.push(y[0]);
        w.push(y[1]);
    }
    let closure = (y[0] - epsilon).abs() + y[1].abs();
    if closure > opts.tol_period {
        return Err(GluingError::Integration(format!(
            "orbit fails to close: |v(T)-v(0)| + |w(T)-w(0)| = {closure:.3e}"
        )));
    }
    Ok(DelaunayOrbit {
        n,
        epsilon,
        period,
        h0,
        spacing,
        v,
        w,
    })
}

/// Time of the first return to `w = 0` at a minimum of `v`.
fn find_period(n: Dimension, epsilon: f64, h0: f64, drift_limit: f64, horizon: f64) -> Result<f64> {
    let cyl = n.cylinder_value();
    let mut t = 0.0;
    let mut y = [epsilon, 0.0];
    let mut h = MAX_STEP;
    let mut seen_negative = false;
    while t < horizon {
        let next = advance(n, y, h)?;
        if (energy(n, next[0], next[1]) - h0).abs() > drift_limit {
            if h < 1e-6 {
                return Err(GluingError::Integration(
                    "Hamiltonian drift not controllable by step refinement".into(),
                ));
            }
            h *= 0.5;
            continue;
        }
        if next[1] < 0.0 {
            seen_negative = true;
        }
        if seen_negative && next[1] >= 0.0 && next[0] < cyl {
            // bracket [0, h] from y; bisect on the sub-step length
            let (mut lo, mut hi) = (0.0_f64, h);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let probe = advance(n, y, mid)?;
                if probe[1] < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Ok(t + 0.5 * (lo + hi));
        }
        y = next;
        t += h;
        h = (h * 1.5).min(MAX_STEP);
    }
    Err(GluingError::Integration(format!(
        "no minimum return within horizon {horizon}"
    )))
}

#[inline]
fn quintic_hermite(s: f64, p0: f64, d0: f64, s0: f64, p1: f64, d1: f64, s1: f64) -> f64 {
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let h0 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h3 = 0.5 * (s3 - 2.0 * s4 + s5);
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    h0 * p0 + h1 * d0 + h2 * s0 + h3 * s1 + h4 * d1 + h5 * p1
}

impl DelaunayOrbit {
    pub fn dimension(&self) -> Dimension {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    /// Conserved energy `H(epsilon, 0)`.
    pub fn h0(&self) -> f64 {
        self.h0
    }

    /// Stored samples `(t, v, w)` over one closed period.
    pub fn samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.v
            .iter()
            .zip(&self.w)
            .enumerate()
            .map(move |(i, (&v, &w))| (i as f64 * self.spacing, v, w))
    }

    /// `(v(t), v'(t), v''(t))` for any real `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let tau = t.rem_euclid(self.period);
        let x = tau / self.spacing;
        let last = self.v.len() - 2;
        let i = (x.floor() as usize).min(last);
        let s = x - i as f64;
        let h = self.spacing;
        let n = self.n;
        let (v0, v1) = (self.v[i], self.v[i + 1]);
        let (w0, w1) = (self.w[i], self.w[i + 1]);
        let (f0, f1) = (force(n, v0), force(n, v1));
        let v = quintic_hermite(s, v0, h * w0, h * h * f0, v1, h * w1, h * h * f1);
        let w = quintic_hermite(
            s,
            w0,
            h * f0,
            h * h * force_derivative(n, v0) * w0,
            w1,
            h * f1,
            h * h * force_derivative(n, v1) * w1,
        );
        (v, w, force(n, v))
    }

    /// Largest `max(|v'|/v, |v''|/v)` over the stored samples.
    pub fn derivative_domination_constant(&self) -> f64 {
        self.v
            .iter()
            .zip(&self.w)
            .map(|(&v, &w)| (w.abs() / v).max(force(self.n, v).abs() / v))
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.v.iter().copied().fold(f64::MIN, f64::max)
    }

    /// Largest `|H - h0| / |h0|` after integrating `periods` full periods from
    /// `(epsilon, 0)` with the adaptive integrator (independent of the stored
    /// samples).
    pub fn hamiltonian_drift(&self, periods: usize) -> Result<f64> {
        let n = self.n;
        let steps_per_period = (self.period / MAX_STEP).ceil() as usize;
        let h = self.period / steps_per_period as f64;
        let mut y = [self.epsilon, 0.0];
        let mut worst: f64 = 0.0;
        for _ in 0..periods * steps_per_period {
            y = advance(n, y, h)?;
            worst = worst.max((energy(n, y[0], y[1]) - self.h0).abs());
        }
        Ok(worst / self.h0.abs())
    }
}

/// Free-function form of [`DelaunayOrbit::eval`].
pub fn eval_orbit(orbit: &DelaunayOrbit, t: f64) -> (f64, f64, f64) {
    orbit.eval(t)
}
