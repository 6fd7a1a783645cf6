//! Interior and exterior harmonic extension of sphere data, diagonal over
//! harmonic modes, and the boundary operator `Z = d_r(P_1 - Q_1)`.

use crate::delaunay_ode::Dimension;
use crate::error::{GluingError, Result};
use crate::harmonics::{HarmonicBasis, ModeKey};

/// Mode coefficients of data on the sphere of radius `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryData {
    pub n: Dimension,
    pub r: f64,
    pub coefficients: Vec<(ModeKey, f64)>,
}

impl BoundaryData {
    pub fn new(n: Dimension, r: f64, coefficients: Vec<(ModeKey, f64)>) -> Result<Self> {
        if !(r > 0.0) {
            return Err(GluingError::Parameter(format!(
                "radius {r} must be positive"
            )));
        }
        Ok(BoundaryData { n, r, coefficients })
    }

    pub fn zero(n: Dimension, r: f64) -> Self {
        BoundaryData {
            n,
            r,
            coefficients: Vec::new(),
        }
    }

    /// Largest degree carrying a nonzero coefficient.
    pub fn max_degree(&self) -> u32 {
        self.coefficients
            .iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(k, _)| k.degree)
            .max()
            .unwrap_or(0)
    }

    pub fn is_high_mode(&self) -> bool {
        self.coefficients
            .iter()
            .all(|(k, c)| k.degree >= 2 || *c == 0.0)
    }

    /// Euclidean norm of the coefficient vector (the `L^2` norm on the unit
    /// sphere).
    pub fn l2_norm(&self) -> f64 {
        self.coefficients
            .iter()
            .map(|(_, c)| c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn coefficient(&self, key: ModeKey) -> f64 {
        self.coefficients
            .iter()
            .filter(|(k, _)| *k == key)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn scale(&self, s: f64) -> BoundaryData {
        self.map(|_, c| s * c)
    }

    pub fn add(&self, other: &BoundaryData) -> Result<BoundaryData> {
        if self.n != other.n {
            return Err(GluingError::Parameter("dimension mismatch".into()));
        }
        let mut coeffs = self.coefficients.clone();
        for &(k, c) in &other.coefficients {
            match coeffs.iter_mut().find(|(kk, _)| *kk == k) {
                Some(slot) => slot.1 += c,
                None => coeffs.push((k, c)),
            }
        }
        coeffs.sort_by_key(|(k, _)| *k);
        Ok(BoundaryData {
            n: self.n,
            r: self.r,
            coefficients: coeffs,
        })
    }

    fn map<F: Fn(ModeKey, f64) -> f64>(&self, f: F) -> BoundaryData {
        BoundaryData {
            n: self.n,
            r: self.r,
            coefficients: self
                .coefficients
                .iter()
                .map(|&(k, c)| (k, f(k, c)))
                .collect(),
        }
    }

    /// Value on the boundary sphere at the point `x` (`|x| = r`).
    pub fn eval(&self, basis: &HarmonicBasis, x: &[f64]) -> Result<f64> {
        let rx = norm(x);
        let theta: Vec<f64> = x.iter().map(|c| c / rx).collect();
        self.sum_modes(basis, &theta, |_| 1.0)
    }

    fn sum_modes<W: Fn(u32) -> f64>(
        &self,
        basis: &HarmonicBasis,
        theta: &[f64],
        w: W,
    ) -> Result<f64> {
        let mut total = 0.0;
        for &(key, c) in &self.coefficients {
            if c == 0.0 {
                continue;
            }
            let mode = basis
                .mode(key)
                .ok_or_else(|| GluingError::Parameter(format!("mode {key:?} not in basis")))?;
            total += c * w(key.degree) * mode.eval(theta);
        }
        Ok(total)
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|c| c * c).sum::<f64>().sqrt()
}

/// `P_r(phi)(x) = sum (|x|/r)^i phi_i e_i(theta)` for high-mode data.
pub fn interior_extend(data: &BoundaryData, basis: &HarmonicBasis, x: &[f64]) -> Result<f64> {
    if !data.is_high_mode() {
        return Err(GluingError::Contract(
            "interior extension takes high-mode data only (degree >= 2)".into(),
        ));
    }
    let rx = norm(x);
    if rx > data.r * (1.0 + 1e-12) {
        return Err(GluingError::Parameter(format!(
            "|x| = {rx} outside the ball of radius {}",
            data.r
        )));
    }
    if rx == 0.0 {
        return Ok(0.0);
    }
    let theta: Vec<f64> = x.iter().map(|c| c / rx).collect();
    let t = rx / data.r;
    data.sum_modes(basis, &theta, |i| t.powi(i as i32))
}

/// `Q_r(phi)(x) = sum (|x|/r)^{2-n-i} phi_i e_i(theta)` for data orthogonal
/// to constants.
pub fn exterior_extend(data: &BoundaryData, basis: &HarmonicBasis, x: &[f64]) -> Result<f64> {
    if data
        .coefficients
        .iter()
        .any(|(k, c)| k.degree == 0 && *c != 0.0)
    {
        return Err(GluingError::Contract(
            "exterior extension needs data orthogonal to constants".into(),
        ));
    }
    let rx = norm(x);
    if rx < data.r * (1.0 - 1e-12) {
        return Err(GluingError::Parameter(format!(
            "|x| = {rx} inside the ball of radius {}",
            data.r
        )));
    }
    let theta: Vec<f64> = x.iter().map(|c| c / rx).collect();
    let t = rx / data.r;
    let nf = data.n.as_f64();
    data.sum_modes(basis, &theta, |i| t.powf(2.0 - nf - i as f64))
}

/// `2i + n - 2`.
pub fn z_multiplier(n: Dimension, degree: u32) -> f64 {
    2.0 * degree as f64 + n.as_f64() - 2.0
}

/// Multiply each degree-`i` coefficient by `2i + n - 2`.
pub fn z_apply(data: &BoundaryData) -> BoundaryData {
    data.map(|k, c| c * z_multiplier(data.n, k.degree))
}

/// Divide each degree-`i` coefficient by `2i + n - 2`.
pub fn z_inverse(data: &BoundaryData) -> BoundaryData {
    data.map(|k, c| c / z_multiplier(data.n, k.degree))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::build_basis;

    fn setup(n: usize) -> (Dimension, HarmonicBasis) {
        let d = Dimension::new(n).unwrap();
        (d, build_basis(d, 4).unwrap())
    }

    #[test]
    fn interior_scaling_and_boundary() {
        let (n, b) = setup(4);
        let r = 0.4;
        let data = BoundaryData::new(n, r, vec![(ModeKey::new(2, 3), 1.7)]).unwrap();
        let e = &b.mode(ModeKey::new(2, 3)).unwrap().poly;
        let theta = [0.5, 0.5, -0.5, 0.5];
        let half: Vec<f64> = theta.iter().map(|c| c * r / 2.0).collect();
        let v = interior_extend(&data, &b, &half).unwrap();
        assert!((v - 1.7 * 0.25 * e.eval(&theta)).abs() < 1e-14);
        let edge: Vec<f64> = theta.iter().map(|c| c * r).collect();
        assert!(
            (interior_extend(&data, &b, &edge).unwrap() - data.eval(&b, &edge).unwrap()).abs()
                < 1e-14
        );
    }

    #[test]
    fn contracts() {
        let (n, b) = setup(4);
        let low = BoundaryData::new(n, 1.0, vec![(ModeKey::new(1, 0), 1.0)]).unwrap();
        assert!(matches!(
            interior_extend(&low, &b, &[0.1, 0.0, 0.0, 0.0]),
            Err(GluingError::Contract(_))
        ));
        assert!(exterior_extend(&low, &b, &[2.0, 0.0, 0.0, 0.0]).is_ok());
        let c = BoundaryData::new(n, 1.0, vec![(ModeKey::new(0, 0), 1.0)]).unwrap();
        assert!(matches!(
            exterior_extend(&c, &b, &[2.0, 0.0, 0.0, 0.0]),
            Err(GluingError::Contract(_))
        ));
    }

    #[test]
    fn exterior_factor() {
        let (n, b) = setup(4);
        let data = BoundaryData::new(n, 0.5, vec![(ModeKey::new(2, 0), 1.0)]).unwrap();
        let theta = [0.6, 0.0, 0.8, 0.0];
        let on: Vec<f64> = theta.iter().map(|c| c * 0.5).collect();
        let out: Vec<f64> = theta.iter().map(|c| c * 1.0).collect();
        let ratio =
            exterior_extend(&data, &b, &out).unwrap() / exterior_extend(&data, &b, &on).unwrap();
        assert!((ratio - 1.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn z_roundtrip() {
        let (n, _) = setup(4);
        assert_eq!(z_multiplier(n, 2), 6.0);
        let data = BoundaryData::new(
            n,
            1.0,
            vec![
                (ModeKey::new(2, 0), 0.3),
                (ModeKey::new(3, 5), -1.1),
                (ModeKey::new(4, 2), 2e-3),
            ],
        )
        .unwrap();
        let back = z_inverse(&z_apply(&data));
        for ((_, a), (_, b)) in back.coefficients.iter().zip(&data.coefficients) {
            assert!((a - b).abs() <= 1e-14 * b.abs());
        }
    }
}
