//! The admissible constants of the interior and matching arguments.

use crate::delaunay_ode::Dimension;
use crate::error::{GluingError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterBudget {
    pub n: Dimension,
    pub s: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta4: f64,
    pub mu: f64,
    pub nu: f64,
    pub tau: f64,
    pub kappa: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl ParameterBudget {
    /// Midpoints of the admissible ranges, `delta1 = 1/(8n)`,
    /// `delta2 = 1/8`, `delta4 = delta1`, `mu = 1.1`, `tau = kappa = gamma = 1`,
    /// `beta = 2`.
    pub fn defaults(n: Dimension) -> Self {
        let nf = n.as_f64();
        let delta1 = 1.0 / (8.0 * nf);
        let (lo, hi) = s_interval(n, delta1);
        ParameterBudget {
            n,
            s: 0.5 * (lo + hi),
            delta1,
            delta2: 0.125,
            delta4: delta1,
            mu: 1.1,
            nu: 0.5 * ((1.5 - nf) + (2.0 - nf)),
            tau: 1.0,
            kappa: 1.0,
            beta: 2.0,
            gamma: 1.0,
        }
    }

    pub fn with_s(mut self, s: f64) -> Result<Self> {
        self.s = s;
        self.validate()?;
        Ok(self)
    }

    /// `d = [(n-2)/2]`.
    pub fn d(&self) -> f64 {
        self.n.d() as f64
    }

    /// `r_eps = eps^s`.
    pub fn r_eps(&self, epsilon: f64) -> f64 {
        epsilon.powf(self.s)
    }

    /// Exponent of the boundary-data bound, `2 + d - n/2 - delta1`.
    pub fn phi_exponent(&self) -> f64 {
        2.0 + self.d() - self.n.as_f64() / 2.0 - self.delta1
    }

    /// Exponent of the interior fixed-point envelope, `2 + d - mu - n/2`.
    pub fn envelope_exponent(&self) -> f64 {
        2.0 + self.d() - self.mu - self.n.as_f64() / 2.0
    }

    /// Magnitude exponent of the matching data, `2 + d - n/2`.
    pub fn data_exponent(&self) -> f64 {
        2.0 + self.d() - self.n.as_f64() / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let nf = self.n.as_f64();
        let bad = |what: String| Err(GluingError::Parameter(what));
        let d1_max = 1.0 / (8.0 * nf - 16.0);
        if !(self.delta1 > 0.0 && self.delta1 < d1_max) {
            return bad(format!("delta1 = {} outside (0, {d1_max})", self.delta1));
        }
        let (lo, hi) = s_interval(self.n, self.delta1);
        if !(self.s > lo && self.s < hi) {
            return bad(format!("s = {} outside ({lo}, {hi})", self.s));
        }
        if !(self.mu > 1.0 && self.mu < 1.25) {
            return bad(format!("mu = {} outside (1, 5/4)", self.mu));
        }
        if !(self.nu > 1.5 - nf && self.nu < 2.0 - nf) {
            return bad(format!(
                "nu = {} outside ({}, {})",
                self.nu,
                1.5 - nf,
                2.0 - nf
            ));
        }
        if !(self.delta2 > self.delta1) {
            return bad(format!(
                "delta2 = {} must exceed delta1 = {}",
                self.delta2, self.delta1
            ));
        }
        if !(self.delta4 > 0.0 && self.delta4 < 0.5) {
            return bad(format!("delta4 = {} outside (0, 1/2)", self.delta4));
        }
        for (name, v) in [
            ("tau", self.tau),
            ("kappa", self.kappa),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        Ok(())
    }
}

/// `((d + 1 - delta1)^{-1}, 4 (d - 2 + 3n/2)^{-1})`.
pub fn s_interval(n: Dimension, delta1: f64) -> (f64, f64) {
    let d = n.d() as f64;
    let nf = n.as_f64();
    (1.0 / (d + 1.0 - delta1), 4.0 / (d - 2.0 + 1.5 * nf))
}
