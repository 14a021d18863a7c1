use rand_distr::{Distribution, StandardNormal};

use super::likelihood::ObservationSet;
use crate::error::{Error, Result};
use crate::flow::{compute_hpas, sample_wells, solve_steady_heads, SolverOptions};
use crate::model::{ParameterVector, Scenario};
use crate::rng::stream_rng;

/// Noisy synthetic head datasets at the scenario's wells.
///
/// Replicate `r` draws its noise from stream `r` of `seed`, so every
/// dataset is reproducible on its own. The expert target is set to the
/// flooded area of `p_true`, keeping the expert datum consistent with the
/// truth; `sigma_hpas` is taken from the scenario.
pub fn generate_synthetic_heads(
    scenario: &Scenario,
    p_true: &ParameterVector,
    sigma: f64,
    seed: u64,
    replicates: usize,
    opts: &SolverOptions,
) -> Result<Vec<ObservationSet>> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "noise sigma must be >= 0, got {sigma}"
        )));
    }
    let hf = solve_steady_heads(scenario, p_true, opts)?;
    if !hf.converged {
        return Err(Error::NotConverged {
            iterations: hf.iterations,
            max_change: hf.max_head_change,
        });
    }
    let clean = sample_wells(&hf, scenario, &scenario.wells)?;
    let h_pas = compute_hpas(&hf, scenario);
    (0..replicates)
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let wells = scenario
                .wells
                .iter()
                .zip(&clean)
                .map(|(w, h)| {
                    let eps: f64 = StandardNormal.sample(&mut rng);
                    let mut w = w.clone();
                    w.observed_head = Some(h + sigma * eps);
                    w
                })
                .collect();
            ObservationSet::new(wells, h_pas, scenario.expert.sigma_hpas)
        })
        .collect()
}
