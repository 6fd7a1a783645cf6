//! Spectra of `L^1 = Delta + n` on products of round spheres and the
//! resulting nondegeneracy test.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};

use crate::error::{GluingError, Result};

/// Default distance from zero below which an eigenvalue counts as kernel.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-12;

/// Product of round spheres `S^{m_1}(k_1) x ... x S^{m_r}(k_r)`, `k` the
/// sectional curvature.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSpec {
    pub factors: Vec<(usize, f64)>,
}

impl SpectrumSpec {
    pub fn new(factors: Vec<(usize, f64)>) -> Result<Self> {
        if factors.is_empty() {
            return Err(GluingError::Parameter(
                "at least one factor required".into(),
            ));
        }
        for &(m, k) in &factors {
            if m < 1 {
                return Err(GluingError::Parameter(
                    "sphere dimension must be positive".into(),
                ));
            }
            if !(k > 0.0 && k.is_finite()) {
                return Err(GluingError::Parameter(format!(
                    "curvature {k} must be positive"
                )));
            }
        }
        Ok(SpectrumSpec { factors })
    }

    /// Total dimension `n = sum m_k`.
    pub fn dimension(&self) -> usize {
        self.factors.iter().map(|f| f.0).sum()
    }

    /// `sum m_k (m_k - 1) k_k`.
    pub fn scalar_curvature(&self) -> f64 {
        self.factors
            .iter()
            .map(|&(m, k)| (m * m.saturating_sub(1)) as f64 * k)
            .sum()
    }

    /// Scalar curvature equals `n(n-1)` to relative `1e-12`.
    pub fn check_normalization(&self) -> Result<()> {
        let n = self.dimension() as f64;
        let target = n * (n - 1.0);
        let s = self.scalar_curvature();
        if (s - target).abs() > 1e-12 * target.max(1.0) {
            return Err(GluingError::Parameter(format!(
                "scalar curvature {s} differs from n(n-1) = {target}"
            )));
        }
        Ok(())
    }

    /// `sum i_k (i_k + m_k - 1) k_k`.
    pub fn eigenvalue(&self, index: &[u32]) -> f64 {
        self.factors
            .iter()
            .zip(index)
            .map(|(&(m, k), &i)| {
                let i = i as f64;
                i * (i + m as f64 - 1.0) * k
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralValue {
    pub value: f64,
    pub index: Vec<u32>,
}

#[derive(PartialEq)]
struct Entry(f64, Vec<u32>);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .total_cmp(&other.0)
            .then_with(|| self.1.cmp(&other.1))
    }
}

/// The `count` smallest Laplace eigenvalues `mu` (with `Delta e = -mu e`)
/// as index tuples, harmonic multiplicities not repeated.
pub fn laplace_spectrum(spec: &SpectrumSpec, count: usize) -> Vec<SpectralValue> {
    let r = spec.factors.len();
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    let start = vec![0u32; r];
    heap.push(Reverse(Entry(0.0, start.clone())));
    seen.insert(start);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let Some(Reverse(Entry(value, index))) = heap.pop() else {
            break;
        };
        for f in 0..r {
            let mut next = index.clone();
            next[f] += 1;
            if seen.insert(next.clone()) {
                heap.push(Reverse(Entry(spec.eigenvalue(&next), next)));
            }
        }
        out.push(SpectralValue { value, index });
    }
    out
}

/// Eigenvalues `n - mu` of `Delta + n`, ordered as the Laplace spectrum.
pub fn linearized_spectrum(spec: &SpectrumSpec, count: usize) -> Result<Vec<SpectralValue>> {
    spec.check_normalization()?;
    let n = spec.dimension() as f64;
    Ok(laplace_spectrum(spec, count)
        .into_iter()
        .map(|s| SpectralValue {
            value: n - s.value,
            index: s.index,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nondegeneracy {
    pub nondegenerate: bool,
    /// Index tuples with `|n - mu| <= tol`.
    pub kernel: Vec<Vec<u32>>,
    /// `min |n - mu|` over all modes.
    pub gap: f64,
}

/// Kernel detection for `Delta + n`: enumerates until `mu` exceeds
/// `n + tol`, past which no eigenvalue can vanish.
pub fn is_nondegenerate(spec: &SpectrumSpec, tol: f64) -> Result<Nondegeneracy> {
    if !(tol >= 0.0) {
        return Err(GluingError::Parameter(format!(
            "tol = {tol} must be nonnegative"
        )));
    }
    spec.check_normalization()?;
    let n = spec.dimension() as f64;
    let mut kernel = Vec::new();
    let mut gap = f64::INFINITY;
    let mut count = 16;
    loop {
        let sp = laplace_spectrum(spec, count);
        let last = sp.last().map_or(0.0, |s| s.value);
        if last > n + tol || sp.len() < count {
            for s in sp {
                let l = n - s.value;
                gap = gap.min(l.abs());
                if l.abs() <= tol {
                    kernel.push(s.index);
                }
                if s.value > n + tol {
                    break;
                }
            }
            break;
        }
        count *= 2;
    }
    Ok(Nondegeneracy {
        nondegenerate: kernel.is_empty(),
        kernel,
        gap,
    })
}

/// The two product families of the examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `S^2(k_1) x S^2(k_2)`, `k_1 + k_2 = 6`.
    S2xS2,
    /// `S^2(k_3) x S^3(k_4)`, `k_3 + 3 k_4 = 10`.
    S2xS3,
}

impl Family {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "s2xs2" => Ok(Family::S2xS2),
            "s2xs3" => Ok(Family::S2xS3),
            other => Err(GluingError::Parameter(format!("unknown family {other}"))),
        }
    }

    fn dims(self) -> (usize, usize) {
        match self {
            Family::S2xS2 => (2, 2),
            Family::S2xS3 => (2, 3),
        }
    }

    /// The member with curvature `k` on factor `factor` (0 or 1), the other
    /// fixed by the normalization; `None` if that curvature is not positive.
    pub fn member(self, factor: usize, k: f64) -> Option<SpectrumSpec> {
        let (m1, m2) = self.dims();
        let n = (m1 + m2) as f64;
        let total = n * (n - 1.0);
        let (c1, c2) = ((m1 * (m1 - 1)) as f64, (m2 * (m2 - 1)) as f64);
        let (k1, k2) = if factor == 0 {
            (k, (total - c1 * k) / c2)
        } else {
            ((total - c2 * k) / c1, k)
        };
        SpectrumSpec::new(vec![(m1, k1), (m2, k2)]).ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateValue {
    /// Factor carrying the kernel mode (0 or 1).
    pub factor: usize,
    /// Harmonic degree on that factor.
    pub degree: u32,
    /// Curvature of that factor.
    pub curvature: f64,
}

/// A stated degenerate curvature compared with the kernel condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Discrepancy {
    pub factor: usize,
    pub degree: u32,
    pub stated: f64,
    pub derived: f64,
    /// `min |eigenvalue of L^1|` at the stated value.
    pub gap_at_stated: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateSet {
    pub family: Family,
    pub values: Vec<DegenerateValue>,
    /// Stated values that fail the kernel condition.
    pub discrepancies: Vec<Discrepancy>,
}

/// Curvatures at which a single-factor mode of degree `i <= i_max` lies in
/// the kernel: `i(i + m - 1) k = n`.
pub fn degenerate_curvature_set(family: Family, i_max: u32) -> Result<DegenerateSet> {
    if i_max < 1 {
        return Err(GluingError::Parameter("i_max must be at least 1".into()));
    }
    let (m1, m2) = family.dims();
    let n = (m1 + m2) as f64;
    let mut values = Vec::new();
    let mut discrepancies = Vec::new();
    for (factor, m) in [(0usize, m1), (1usize, m2)] {
        for i in 1..=i_max {
            let root = (i * (i + m as u32 - 1)) as f64;
            let k = n / root;
            if family.member(factor, k).is_none() {
                continue;
            }
            values.push(DegenerateValue {
                factor,
                degree: i,
                curvature: k,
            });
            // stated constants: 4/(i(i+1)) and 4/(i(i+2))
            let stated = 4.0 / root;
            if (stated - k).abs() > DEFAULT_KERNEL_TOL {
                if let Some(spec) = family.member(factor, stated) {
                    let nd = is_nondegenerate(&spec, DEFAULT_KERNEL_TOL)?;
                    if nd.nondegenerate {
                        discrepancies.push(Discrepancy {
                            factor,
                            degree: i,
                            stated,
                            derived: k,
                            gap_at_stated: nd.gap,
                        });
                    }
                }
            }
        }
    }
    Ok(DegenerateSet {
        family,
        values,
        discrepancies,
    })
}
