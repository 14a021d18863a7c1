use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_ordering, ParameterVector, PriorBox, N_PARAMS};

/// Number of log-spaced values per parameter (K1, K2, K3, R).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub counts: [usize; N_PARAMS],
}

impl Default for ScanSpec {
    /// 15 x 4 x 15 x 20.
    fn default() -> Self {
        Self {
            counts: [15, 4, 15, 20],
        }
    }
}

impl ScanSpec {
    /// Desk-scale grid, 6 x 4 x 6 x 5.
    pub fn coarse() -> Self {
        Self {
            counts: [6, 4, 6, 5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.counts.contains(&0) {
            return Err(Error::InvalidInput("scan counts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn raw_count(&self) -> usize {
        self.counts.iter().product()
    }
}

/// `n` log-spaced values spanning `[lo, hi]` inclusive; the geometric
/// midpoint when `n == 1`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    /// Ordered candidates in lexicographic (K1, K2, K3, R) order.
    pub candidates: Vec<ParameterVector>,
    /// Size of the full Cartesian product before the ordering filter.
    pub raw_count: usize,
}

pub fn scan_grid(spec: &ScanSpec, prior: &PriorBox) -> Result<ScanGrid> {
    spec.validate()?;
    prior.validate()?;
    let axes: Vec<Vec<f64>> = prior
        .bounds()
        .iter()
        .zip(spec.counts)
        .map(|(&(lo, hi), n)| log_space(lo, hi, n))
        .collect();
    let mut candidates = Vec::new();
    for &k1 in &axes[0] {
        for &k2 in &axes[1] {
            for &k3 in &axes[2] {
                for &r in &axes[3] {
                    let p = ParameterVector::new(k1, k2, k3, r);
                    if validate_ordering(&p) {
                        candidates.push(p);
                    }
                }
            }
        }
    }
    Ok(ScanGrid {
        candidates,
        raw_count: spec.raw_count(),
    })
}
