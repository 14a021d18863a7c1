use serde::{Deserialize, Serialize};

use super::forward::{ForwardModel, Response};
use crate::error::{Error, Result};
use crate::model::{validate_ordering, ParameterVector, Scenario, Well};

/// Observed heads plus the expert flooded-area datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSet {
    pub wells: Vec<Well>,
    /// Target flooded-area percentage.
    pub h_pas_star: f64,
    /// Its standard deviation (percentage points).
    pub sigma_hpas: f64,
}

impl ObservationSet {
    pub fn new(wells: Vec<Well>, h_pas_star: f64, sigma_hpas: f64) -> Result<Self> {
        let obs = Self {
            wells,
            h_pas_star,
            sigma_hpas,
        };
        obs.validate()?;
        Ok(obs)
    }

    /// Wells with observations and the expert target of a scenario.
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let wells = s
            .wells
            .iter()
            .filter(|w| w.observed_head.is_some())
            .cloned()
            .collect();
        Self::new(wells, s.expert.h_pas_star, s.expert.sigma_hpas)
    }

    pub fn validate(&self) -> Result<()> {
        if self.wells.is_empty() {
            return Err(Error::InvalidInput(
                "at least one observed head is required".into(),
            ));
        }
        if let Some(w) = self
            .wells
            .iter()
            .find(|w| !w.observed_head.is_some_and(f64::is_finite))
        {
            return Err(Error::InvalidInput(format!(
                "well {} has no finite observation",
                w.id
            )));
        }
        if !(self.sigma_hpas > 0.0) || !self.h_pas_star.is_finite() {
            return Err(Error::InvalidInput("sigma_hpas must be > 0".into()));
        }
        Ok(())
    }

    pub fn n_wells(&self) -> usize {
        self.wells.len()
    }

    pub fn observed(&self) -> Vec<f64> {
        self.wells
            .iter()
            .map(|w| w.observed_head.unwrap_or(f64::NAN))
            .collect()
    }
}

/// Value of the joint NLL when every residual vanishes.
pub fn nll_constant(nb: usize, sigma_h: f64, sigma_hpas: f64) -> f64 {
    let nb = nb as f64;
    nb * sigma_h.ln() + sigma_hpas.ln() + 0.5 * (nb + 1.0) * (2.0 * std::f64::consts::PI).ln()
}

/// Sum of squared head residuals.
pub fn ssr(model: &[f64], observed: &[f64]) -> f64 {
    model
        .iter()
        .zip(observed)
        .map(|(m, o)| (m - o).powi(2))
        .sum()
}

/// Joint NLL from precomputed responses; `+inf` for failed solves.
pub fn nll_from_response(
    r: &Response,
    observed: &[f64],
    obs: &ObservationSet,
    sigma_h: f64,
) -> f64 {
    if !r.converged || r.heads.len() != observed.len() {
        return f64::INFINITY;
    }
    let head_term = ssr(&r.heads, observed) / (2.0 * sigma_h * sigma_h);
    let d = r.h_pas - obs.h_pas_star;
    let expert_term = d * d / (2.0 * obs.sigma_hpas * obs.sigma_hpas);
    let v = head_term + expert_term + nll_constant(observed.len(), sigma_h, obs.sigma_hpas);
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Joint negative log-likelihood of heads and flooded area.
///
/// Unordered or non-positive parameters and failed solves evaluate to
/// `+inf`. The forward model is responsible for the well set; it must match
/// `obs.wells`.
pub fn nll_joint(
    p: &ParameterVector,
    obs: &ObservationSet,
    sigma_h: f64,
    fm: &ForwardModel,
) -> f64 {
    if !p.all_positive() || !validate_ordering(p) || !(sigma_h > 0.0) {
        return f64::INFINITY;
    }
    let r = fm.evaluate(p);
    nll_from_response(&r, &obs.observed(), obs, sigma_h)
}
