use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_PARAMS: usize = 4;

pub const PARAM_NAMES: [&str; N_PARAMS] = ["k_zone1", "k_zone2", "k_zone3", "r_irrig"];

/// The calibrated quantities: three zone conductivities (m/s) and the
/// irrigation recharge rate (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub k_zone1: f64,
    pub k_zone2: f64,
    pub k_zone3: f64,
    pub r_irrig: f64,
}

impl ParameterVector {
    pub const fn new(k_zone1: f64, k_zone2: f64, k_zone3: f64, r_irrig: f64) -> Self {
        Self {
            k_zone1,
            k_zone2,
            k_zone3,
            r_irrig,
        }
    }

    /// Base-case truth used to generate synthetic data.
    pub const fn base_case() -> Self {
        Self::new(6.5e-5, 4.5e-4, 5.0e-3, 2.5e-8)
    }

    pub const fn to_array(self) -> [f64; N_PARAMS] {
        [self.k_zone1, self.k_zone2, self.k_zone3, self.r_irrig]
    }

    pub const fn from_array(a: [f64; N_PARAMS]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn from_slice(s: &[f64]) -> Result<Self> {
        let a: [f64; N_PARAMS] = s.try_into().map_err(|_| {
            Error::InvalidInput(format!("expected {N_PARAMS} parameters, got {}", s.len()))
        })?;
        Ok(Self::from_array(a))
    }

    /// Zone conductivity for zone id 1..=3.
    pub fn zone_k(&self, zone: u8) -> f64 {
        match zone {
            1 => self.k_zone1,
            2 => self.k_zone2,
            3 => self.k_zone3,
            _ => panic!("zone id {zone} out of range"),
        }
    }

    pub fn all_positive(&self) -> bool {
        self.to_array().iter().all(|v| *v > 0.0 && v.is_finite())
    }

    pub fn ln(&self) -> [f64; N_PARAMS] {
        self.to_array().map(f64::ln)
    }

    pub fn exp(log: &[f64]) -> Self {
        Self::new(log[0].exp(), log[1].exp(), log[2].exp(), log[3].exp())
    }

    /// Bit pattern key, used to cache forward solves by exact parameter value.
    pub fn key(&self) -> [u64; N_PARAMS] {
        self.to_array().map(f64::to_bits)
    }
}

impl std::ops::Index<usize> for ParameterVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.k_zone1,
            1 => &self.k_zone2,
            2 => &self.k_zone3,
            3 => &self.r_irrig,
            _ => panic!("parameter index {i} out of range"),
        }
    }
}

impl std::ops::IndexMut<usize> for ParameterVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        match i {
            0 => &mut self.k_zone1,
            1 => &mut self.k_zone2,
            2 => &mut self.k_zone3,
            3 => &mut self.r_irrig,
            _ => panic!("parameter index {i} out of range"),
        }
    }
}

/// Physical ordering of the zone conductivities, `k1 <= k2 <= k3`.
pub fn validate_ordering(p: &ParameterVector) -> bool {
    p.k_zone1 <= p.k_zone2 && p.k_zone2 <= p.k_zone3
}

/// Uniform prior support per parameter, as (low, high).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorBox {
    pub k_zone1: (f64, f64),
    pub k_zone2: (f64, f64),
    pub k_zone3: (f64, f64),
    pub r_irrig: (f64, f64),
}

impl Default for PriorBox {
    fn default() -> Self {
        Self {
            k_zone1: (5.0e-5, 1.0e-3),
            k_zone2: (5.0e-5, 1.0e-3),
            k_zone3: (1.0e-4, 1.0e-2),
            r_irrig: (1.0e-10, 1.0e-6),
        }
    }
}

impl PriorBox {
    pub fn bounds(&self) -> [(f64, f64); N_PARAMS] {
        [self.k_zone1, self.k_zone2, self.k_zone3, self.r_irrig]
    }

    pub fn from_bounds(b: [(f64, f64); N_PARAMS]) -> Result<Self> {
        let prior = Self {
            k_zone1: b[0],
            k_zone2: b[1],
            k_zone3: b[2],
            r_irrig: b[3],
        };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in PARAM_NAMES.iter().zip(self.bounds()) {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(Error::Validation(format!(
                    "prior bounds for {name} must satisfy 0 < low < high (got {lo}, {hi})"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: &ParameterVector) -> bool {
        self.bounds()
            .iter()
            .zip(p.to_array())
            .all(|((lo, hi), v)| v >= *lo && v <= *hi)
    }

    /// Variance of the uniform prior, `(b - a)^2 / 12`.
    pub fn variances(&self) -> [f64; N_PARAMS] {
        self.bounds().map(|(lo, hi)| (hi - lo).powi(2) / 12.0)
    }

    pub fn log_ranges(&self) -> [f64; N_PARAMS] {
        self.bounds().map(|(lo, hi)| (hi / lo).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_examples() {
        assert!(validate_ordering(&ParameterVector::new(
            1e-4, 2e-4, 3e-4, 1e-8
        )));
        assert!(!validate_ordering(&ParameterVector::new(
            2e-4, 1e-4, 3e-4, 1e-8
        )));
        assert!(validate_ordering(&ParameterVector::base_case()));
    }

    #[test]
    fn base_case_inside_default_prior() {
        assert!(PriorBox::default().contains(&ParameterVector::base_case()));
    }

    #[test]
    fn uniform_variance() {
        let b = PriorBox::from_bounds([(0.5, 1.0), (0.5, 1.0), (0.5, 1.0), (1e-3, 1.0)]).unwrap();
        assert!((b.variances()[0] - 0.25 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn prior_rejects_inverted_bounds() {
        assert!(PriorBox::from_bounds([(1.0, 0.5), (0.5, 1.0), (0.5, 1.0), (0.5, 1.0)]).is_err());
        assert!(PriorBox::from_bounds([(0.0, 0.5), (0.5, 1.0), (0.5, 1.0), (0.5, 1.0)]).is_err());
    }

    #[test]
    fn index_matches_array() {
        let p = ParameterVector::base_case();
        let a = p.to_array();
        for (i, v) in a.iter().enumerate() {
            assert_eq!(p[i], *v);
        }
    }
}
