use std::sync::Arc;

use nalgebra::Matrix4;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::SolverOptions;
use crate::inversion::{calibrate, generate_synthetic_heads, scan_grid, CalibrateOptions, ForwardModel, ScanSpec};
use crate::laplace::{laplace, CovarianceOptions, PosteriorGaussian, DEFAULT_STEP_FRACTION};
use crate::model::{validate_ordering, ParameterVector, PriorBox, Scenario, N_PARAMS};
use crate::rng::derive_seed;

pub const DEFAULT_NOISE_LEVELS: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0];
pub const DEFAULT_REPLICATES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamMetrics {
    /// Estimate over truth.
    pub ratio: f64,
    /// Posterior standard deviation over posterior mean.
    pub cov: f64,
    /// Posterior variance over the uniform-prior variance.
    pub variance_reduction: f64,
    /// Truth within mean +- 2 standard deviations.
    pub truth_in_2sigma: bool,
}

pub fn identifiability_metrics(
    mu: &ParameterVector,
    sigma: &Matrix4<f64>,
    p_true: &ParameterVector,
    prior: &PriorBox,
) -> [ParamMetrics; N_PARAMS] {
    let prior_var = prior.variances();
    std::array::from_fn(|j| {
        let var = sigma[(j, j)];
        let sd = var.sqrt();
        ParamMetrics {
            ratio: mu[j] / p_true[j],
            cov: sd / mu[j],
            variance_reduction: var / prior_var[j],
            truth_in_2sigma: (mu[j] - p_true[j]).abs() <= 2.0 * sd,
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub calibrate: CalibrateOptions,
    pub solver: SolverOptions,
    pub step_fraction: f64,
    pub covariance: CovarianceOptions,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            calibrate: CalibrateOptions {
                scan: ScanSpec::coarse(),
                keep_trace: false,
                ..CalibrateOptions::default()
            },
            solver: SolverOptions::default(),
            step_fraction: DEFAULT_STEP_FRACTION,
            covariance: CovarianceOptions::default(),
        }
    }
}

/// Outcome of one synthetic inversion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignCell {
    pub level: f64,
    pub replicate: usize,
    pub mu_post: Option<ParameterVector>,
    pub sigma_h_hat: Option<f64>,
    pub nll_at_min: Option<f64>,
    pub posterior: Option<PosteriorGaussian>,
    pub metrics: Option<[ParamMetrics; N_PARAMS]>,
    pub n_solves: usize,
    pub simplex_evals: usize,
    pub hpas_flat: Option<bool>,
    pub cone_crossing: Option<[bool; N_PARAMS]>,
    /// Calibration or posterior failure; the cell is kept in the report.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub level: f64,
    pub n_cells: usize,
    pub n_failed: usize,
    pub sigma_hat_mean: f64,
    /// Sample standard deviation of the replicate estimates.
    pub sigma_hat_std: f64,
    /// `sigma_hat_mean / level` (NaN at zero noise).
    pub sigma_hat_ratio: f64,
    /// Fraction of parameter ratios inside [0.5, 2].
    pub within_factor_2: f64,
    /// Fraction of variance-reduction ratios below 0.1.
    pub vr_below_0_1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentifiabilityReport {
    pub p_true: ParameterVector,
    pub levels: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub h_pas_star: f64,
    /// Level-major, replicate-minor.
    pub cells: Vec<CampaignCell>,
}

impl IdentifiabilityReport {
    pub fn level_cells(&self, level: f64) -> impl Iterator<Item = &CampaignCell> {
        self.cells.iter().filter(move |c| c.level == level)
    }

    pub fn summaries(&self) -> Vec<LevelSummary> {
        self.levels.iter().map(|l| self.summary(*l)).collect()
    }

    pub fn summary(&self, level: f64) -> LevelSummary {
        let cells: Vec<_> = self.level_cells(level).collect();
        let hats: Vec<f64> = cells.iter().filter_map(|c| c.sigma_h_hat).collect();
        let mean = hats.iter().sum::<f64>() / hats.len() as f64;
        let std = if hats.len() > 1 {
            (hats.iter().map(|h| (h - mean).powi(2)).sum::<f64>() / (hats.len() - 1) as f64).sqrt()
        } else {
            0.0
        };
        let metrics: Vec<ParamMetrics> = cells.iter().filter_map(|c| c.metrics).flatten().collect();
        // Failed cells count against both fractions.
        let total = (cells.len() * N_PARAMS) as f64;
        let frac = |pred: &dyn Fn(&ParamMetrics) -> bool| metrics.iter().filter(|m| pred(m)).count() as f64 / total;
        LevelSummary {
            level,
            n_cells: cells.len(),
            n_failed: cells.iter().filter(|c| c.failure.is_some()).count(),
            sigma_hat_mean: mean,
            sigma_hat_std: std,
            sigma_hat_ratio: if level > 0.0 { mean / level } else { f64::NAN },
            within_factor_2: frac(&|m| (0.5..=2.0).contains(&m.ratio)),
            vr_below_0_1: frac(&|m| m.variance_reduction < 0.1),
        }
    }
}

/// Seed of the synthetic data at `level`; independent of the other levels.
pub fn level_seed(seed: u64, level: f64) -> u64 {
    derive_seed(seed, level.to_bits())
}

/// Repeated synthetic inversions at each noise level.
///
/// Each (level, replicate) pair generates data, calibrates, builds the
/// Laplace posterior and scores it against `p_true`. Failures are recorded
/// in the cell and never abort the campaign. The expert target of every
/// dataset is the flooded area of `p_true`.
pub fn identifiability_study(
    scenario: Arc<Scenario>,
    p_true: &ParameterVector,
    levels: &[f64],
    replicates: usize,
    seed: u64,
    opts: &StudyOptions,
) -> Result<IdentifiabilityReport> {
    if !scenario.prior.contains(p_true) || !validate_ordering(p_true) {
        return Err(Error::InvalidInput(format!(
            "true parameters must be ordered and inside the prior box: {p_true:?}"
        )));
    }
    if levels.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
        return Err(Error::InvalidInput("noise levels must be finite and >= 0".into()));
    }
    if replicates == 0 {
        return Err(Error::InvalidInput("replicates must be >= 1".into()));
    }
    let mut datasets = Vec::new();
    for &level in levels {
        let data = generate_synthetic_heads(&scenario, p_true, level, level_seed(seed, level), replicates, &opts.solver)?;
        datasets.extend(data.into_iter().enumerate().map(|(r, d)| (level, r, d)));
    }
    let h_pas_star = datasets.first().map_or(f64::NAN, |d| d.2.h_pas_star);

    // Every inversion starts from the same solved scan grid.
    let base = ForwardModel::for_scenario(Arc::clone(&scenario), opts.solver);
    let grid = scan_grid(&opts.calibrate.scan, &scenario.prior)?;
    grid.candidates.par_iter().for_each(|p| {
        base.evaluate(p);
    });

    let cells = datasets
        .par_iter()
        .map(|(level, replicate, obs)| {
            let fm = base.fork();
            let mut cell = CampaignCell {
                level: *level,
                replicate: *replicate,
                mu_post: None,
                sigma_h_hat: None,
                nll_at_min: None,
                posterior: None,
                metrics: None,
                n_solves: 0,
                simplex_evals: 0,
                hpas_flat: None,
                cone_crossing: None,
                failure: None,
            };
            match calibrate(&fm, obs, &opts.calibrate) {
                Ok(cal) => {
                    cell.mu_post = Some(cal.mu_post);
                    cell.sigma_h_hat = Some(cal.sigma_h_hat);
                    cell.nll_at_min = Some(cal.nll_at_min);
                    cell.simplex_evals = cal.simplex_evals;
                    match laplace(&fm, obs, &cal.mu_post, cal.sigma_h_hat, opts.step_fraction, &opts.covariance) {
                        Ok(lp) => {
                            cell.metrics = Some(identifiability_metrics(
                                &cal.mu_post,
                                &lp.posterior.sigma,
                                p_true,
                                &scenario.prior,
                            ));
                            cell.hpas_flat = Some(lp.jacobians.hpas_flat);
                            cell.cone_crossing = Some(lp.jacobians.cone_crossing);
                            cell.posterior = Some(lp.posterior);
                        }
                        Err(e) => cell.failure = Some(format!("posterior: {e}")),
                    }
                }
                Err(e) => cell.failure = Some(format!("calibration: {e}")),
            }
            cell.n_solves = fm.solves();
            cell
        })
        .collect();
    Ok(IdentifiabilityReport {
        p_true: *p_true,
        levels: levels.to_vec(),
        replicates,
        seed,
        h_pas_star,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector4;

    #[test]
    fn metrics_at_truth_with_zero_covariance() {
        let p = ParameterVector::base_case();
        let m = identifiability_metrics(&p, &Matrix4::zeros(), &p, &PriorBox::default());
        for x in m {
            assert_eq!(x.ratio, 1.0);
            assert_eq!(x.cov, 0.0);
            assert_eq!(x.variance_reduction, 0.0);
            assert!(x.truth_in_2sigma);
        }
    }

    #[test]
    fn variance_reduction_arithmetic() {
        let prior = PriorBox::from_bounds([(1e-9, 1.0), (1e-9, 1.0), (1e-9, 1.0), (1e-9, 1.0)]).unwrap();
        let sigma = Matrix4::from_diagonal(&Vector4::repeat(1.0 / 120.0));
        let p = ParameterVector::new(0.5, 0.5, 0.5, 0.5);
        let m = identifiability_metrics(&p, &sigma, &p, &prior);
        assert!((m[0].variance_reduction - 0.1).abs() < 1e-8);
    }
}
