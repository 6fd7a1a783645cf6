//! Sparse real polynomials in `n` variables.

use std::collections::BTreeMap;

use super::sphere::integrate_monomial_sphere_raw;

/// Exponent vector of a monomial.
pub type MultiIndex = Vec<u32>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    n: usize,
    terms: BTreeMap<MultiIndex, f64>,
}

impl Poly {
    pub fn zero(n: usize) -> Self {
        Poly {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        let mut p = Poly::zero(n);
        p.add_term(vec![0; n], c);
        p
    }

    /// The coordinate function `x_i` (0-based).
    pub fn coordinate(n: usize, i: usize) -> Self {
        let mut alpha = vec![0; n];
        alpha[i] = 1;
        Poly::monomial(alpha, 1.0)
    }

    pub fn monomial(alpha: MultiIndex, c: f64) -> Self {
        let mut p = Poly::zero(alpha.len());
        p.add_term(alpha, c);
        p
    }

    /// `|x|^{2j}`.
    pub fn radius_power(n: usize, j: u32) -> Self {
        let mut r2 = Poly::zero(n);
        for i in 0..n {
            let mut alpha = vec![0; n];
            alpha[i] = 2;
            r2.add_term(alpha, 1.0);
        }
        let mut out = Poly::constant(n, 1.0);
        for _ in 0..j {
            out = out.mul(&r2);
        }
        out
    }

    pub fn nvars(&self) -> usize {
        self.n
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> {
        self.terms.iter().map(|(k, v)| (k, *v))
    }

    pub fn coefficient(&self, alpha: &[u32]) -> f64 {
        self.terms.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn add_term(&mut self, alpha: MultiIndex, c: f64) {
        assert_eq!(alpha.len(), self.n, "multi-index length mismatch");
        if c == 0.0 {
            return;
        }
        let entry = self.terms.entry(alpha).or_insert(0.0);
        *entry += c;
        if *entry == 0.0 {
            self.terms.retain(|_, v| *v != 0.0);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            out.add_term(k.clone(), *v);
        }
        out
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Poly {
        let mut out = Poly::zero(self.n);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero(self.n);
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let k: MultiIndex = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                out.add_term(k, va * vb);
            }
        }
        out
    }

    /// Drop coefficients below `tol` times the largest one.
    pub fn pruned(&self, tol: f64) -> Poly {
        let big = self.terms.values().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut out = Poly::zero(self.n);
        for (k, v) in &self.terms {
            if v.abs() > tol * big {
                out.terms.insert(k.clone(), *v);
            }
        }
        out
    }

    /// Largest total degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.iter().sum()).max()
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|k| k.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    /// Part of total degree exactly `m`.
    pub fn homogeneous_part(&self, m: u32) -> Poly {
        let mut out = Poly::zero(self.n);
        for (k, v) in &self.terms {
            if k.iter().sum::<u32>() == m {
                out.terms.insert(k.clone(), *v);
            }
        }
        out
    }

    pub fn derivative(&self, i: usize) -> Poly {
        let mut out = Poly::zero(self.n);
        for (k, v) in &self.terms {
            if k[i] > 0 {
                let mut kk = k.clone();
                kk[i] -= 1;
                out.add_term(kk, v * k[i] as f64);
            }
        }
        out
    }

    pub fn laplacian(&self) -> Poly {
        let mut out = Poly::zero(self.n);
        for (k, v) in &self.terms {
            for i in 0..self.n {
                if k[i] >= 2 {
                    let mut kk = k.clone();
                    kk[i] -= 2;
                    out.add_term(kk, v * (k[i] * (k[i] - 1)) as f64);
                }
            }
        }
        out
    }

    /// Substitute `x -> r x`.
    pub fn dilate(&self, r: f64) -> Poly {
        let mut out = Poly::zero(self.n);
        for (k, v) in &self.terms {
            out.add_term(k.clone(), v * r.powi(k.iter().sum::<u32>() as i32));
        }
        out
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let maxdeg = self
            .terms
            .keys()
            .flat_map(|k| k.iter().copied())
            .max()
            .unwrap_or(0) as usize;
        // powers[i][e] = x_i^e
        let powers: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| {
                let mut p = Vec::with_capacity(maxdeg + 1);
                let mut acc = 1.0;
                for _ in 0..=maxdeg {
                    p.push(acc);
                    acc *= xi;
                }
                p
            })
            .collect();
        self.terms
            .iter()
            .map(|(k, v)| {
                v * k
                    .iter()
                    .enumerate()
                    .map(|(i, &e)| powers[i][e as usize])
                    .product::<f64>()
            })
            .sum()
    }

    /// Exact `\int_{S^{n-1}} p q`.
    pub fn sphere_inner(&self, other: &Poly) -> f64 {
        let mut total = 0.0;
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let k: Vec<u32> = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                total += va * vb * integrate_monomial_sphere_raw(&k);
            }
        }
        total
    }
}

/// All exponent vectors of total degree `m` in `n` variables, with higher
/// powers of earlier variables first.
pub fn multi_indices(n: usize, m: u32) -> Vec<MultiIndex> {
    fn rec(n: usize, m: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() == n - 1 {
            let mut v = prefix.clone();
            v.push(m);
            out.push(v);
            return;
        }
        for e in (0..=m).rev() {
            prefix.push(e);
            rec(n, m - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, m, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Harmonic part of a homogeneous polynomial of degree `m`:
/// `sum_j (-1)^j |x|^{2j} Delta^j p / (2^j j! prod_{i=1}^j (n + 2m - 2 - 2i))`.
pub fn harmonic_projection(p: &Poly, m: u32) -> Poly {
    let n = p.nvars();
    let mut out = p.clone();
    let mut lap = p.clone();
    let mut denom = 1.0;
    for j in 1..=(m / 2) {
        lap = lap.laplacian();
        if lap.is_zero() {
            break;
        }
        denom *= 2.0 * j as f64 * (n as f64 + 2.0 * m as f64 - 2.0 - 2.0 * j as f64);
        let sign = if j % 2 == 1 { -1.0 } else { 1.0 };
        out = out.add(&Poly::radius_power(n, j).mul(&lap).scale(sign / denom));
    }
    out
}
