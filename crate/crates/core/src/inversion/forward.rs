use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::error::Result;
use crate::flow::{
    compute_hpas, sample_wells, solve_steady_heads, solve_steady_heads_hinted, SolverOptions,
};
use crate::model::{ParameterVector, Scenario, Well};

/// Model responses used by the likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct Response {
    /// Heads at the observation wells (m).
    pub heads: Vec<f64>,
    /// Flooded-area percentage.
    pub h_pas: f64,
    pub converged: bool,
    /// Why the solve failed, if it did.
    pub failure: Option<String>,
}

impl Response {
    fn failed(msg: String) -> Self {
        Self {
            heads: Vec::new(),
            h_pas: f64::NAN,
            converged: false,
            failure: Some(msg),
        }
    }
}

/// Forward model memoized by the exact bit pattern of the parameters.
///
/// Responses do not depend on observations or on the noise level, so a
/// single instance can serve a whole calibration campaign.
pub struct ForwardModel {
    scenario: Arc<Scenario>,
    wells: Vec<Well>,
    opts: SolverOptions,
    cache: Mutex<HashMap<[u64; 4], Arc<Response>>>,
    // Drain state of the latest solve; only speeds up the next one.
    last_drains: Mutex<Option<Vec<bool>>>,
}

impl ForwardModel {
    pub fn new(scenario: Arc<Scenario>, wells: Vec<Well>, opts: SolverOptions) -> Self {
        Self {
            scenario,
            wells,
            opts,
            cache: Mutex::new(HashMap::new()),
            last_drains: Mutex::new(None),
        }
    }

    /// Responses at the scenario's own wells.
    pub fn for_scenario(scenario: Arc<Scenario>, opts: SolverOptions) -> Self {
        let wells = scenario.wells.clone();
        Self::new(scenario, wells, opts)
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn wells(&self) -> &[Well] {
        &self.wells
    }

    pub fn options(&self) -> &SolverOptions {
        &self.opts
    }

    /// An independent model sharing the responses computed so far.
    ///
    /// Counters of the fork start from the current cache size, so runs that
    /// fork the same parent report the same counts in any execution order.
    pub fn fork(&self) -> Self {
        Self {
            scenario: Arc::clone(&self.scenario),
            wells: self.wells.clone(),
            opts: self.opts,
            cache: Mutex::new(self.cache.lock().unwrap().clone()),
            last_drains: Mutex::new(self.last_drains.lock().unwrap().clone()),
        }
    }

    /// Number of distinct parameter vectors solved so far.
    pub fn solves(&self) -> usize {
        self.cache.lock().unwrap().len()
    }

    /// Solves without consulting the cache.
    pub fn compute(&self, p: &ParameterVector) -> Response {
        let hint = self.last_drains.lock().unwrap().clone();
        match solve_steady_heads_hinted(&self.scenario, p, &self.opts, hint.as_deref()) {
            Ok(hf) => {
                if hf.converged {
                    *self.last_drains.lock().unwrap() = Some(hf.drain_active.clone());
                }
                match sample_wells(&hf, &self.scenario, &self.wells) {
                    Ok(heads) => Response {
                        h_pas: compute_hpas(&hf, &self.scenario),
                        heads,
                        converged: hf.converged,
                        failure: (!hf.converged)
                            .then(|| format!("not converged after {} iterations", hf.iterations)),
                    },
                    Err(e) => Response::failed(e.to_string()),
                }
            }
            Err(e) => Response::failed(e.to_string()),
        }
    }

    pub fn evaluate(&self, p: &ParameterVector) -> Arc<Response> {
        let key = p.key();
        if let Some(r) = self.cache.lock().unwrap().get(&key) {
            return Arc::clone(r);
        }
        let r = Arc::new(self.compute(p));
        Arc::clone(self.cache.lock().unwrap().entry(key).or_insert(r))
    }

    /// Fails with the solver's error when the base solve is not usable.
    pub fn evaluate_checked(&self, p: &ParameterVector) -> Result<Arc<Response>> {
        let r = self.evaluate(p);
        if r.converged {
            Ok(r)
        } else {
            // Re-run to surface the structured error if there is one.
            let hf = solve_steady_heads(&self.scenario, p, &self.opts)?;
            Err(crate::Error::NotConverged {
                iterations: hf.iterations,
                max_change: hf.max_head_change,
            })
        }
    }
}
