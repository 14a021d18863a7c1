use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::forward::ForwardModel;
use super::likelihood::{nll_from_response, nll_joint, ssr, ObservationSet};
use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::scan::{log_space, scan_grid, ScanSpec};
use crate::error::{Error, Result};
use crate::model::ParameterVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrateOptions {
    /// Noise levels swept (m).
    pub sigma_grid: Vec<f64>,
    pub scan: ScanSpec,
    /// Scan candidates refined per noise level.
    pub n_starts: usize,
    /// Initial simplex edge as a fraction of each log-range.
    pub step_fraction: f64,
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_evals: usize,
    /// Keep every evaluated candidate in the result.
    pub keep_trace: bool,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        Self {
            sigma_grid: default_sigma_grid(),
            scan: ScanSpec::default(),
            n_starts: 3,
            step_fraction: 0.05,
            f_tol: 1e-8,
            x_tol: 1e-6,
            max_evals: 500,
            keep_trace: true,
        }
    }
}

/// 12 log-spaced values in [0.1, 8] m.
pub fn default_sigma_grid() -> Vec<f64> {
    log_space(0.1, 8.0, 12)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Scan,
    Simplex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub sigma_h: f64,
    pub phase: Phase,
    /// Index of the simplex start (scan entries: candidate index).
    pub index: usize,
    pub p: ParameterVector,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub mu_post: ParameterVector,
    pub sigma_h_hat: f64,
    pub nll_at_min: f64,
    pub h_pas_at_min: f64,
    /// Sum of squared head residuals at the optimum (m^2).
    pub ssr_at_min: f64,
    pub n_candidates: usize,
    pub n_raw_candidates: usize,
    /// Distinct forward solves made by this calibration's model.
    pub n_solves: usize,
    pub simplex_evals: usize,
    pub simplex_exhausted: usize,
    pub trace: Vec<TraceEntry>,
}

/// Tolerance on the log-space box test, absorbing exp/ln round trips.
const LOG_SLACK: f64 = 1e-12;

struct Refined {
    p: ParameterVector,
    nll: f64,
    evals: usize,
    converged: bool,
    trace: Vec<TraceEntry>,
}

/// Noise-level sweep, grid scan and simplex refinement of the joint NLL.
///
/// For every `sigma_h` the scan candidates are ranked, the best
/// `n_starts` are refined by Nelder-Mead in log-parameter space, and the
/// overall lowest (p, sigma_h) pair is returned. Forward solves are shared
/// through the model's cache.
pub fn calibrate(
    fm: &ForwardModel,
    obs: &ObservationSet,
    opts: &CalibrateOptions,
) -> Result<CalibrationResult> {
    obs.validate()?;
    if opts.sigma_grid.is_empty() || opts.sigma_grid.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidInput(
            "sigma_grid must be non-empty and positive".into(),
        ));
    }
    if opts.n_starts == 0 {
        return Err(Error::InvalidInput("n_starts must be >= 1".into()));
    }
    let same_wells = fm.wells().len() == obs.wells.len()
        && fm
            .wells()
            .iter()
            .zip(&obs.wells)
            .all(|(a, b)| a.cell == b.cell);
    if !same_wells {
        return Err(Error::InvalidInput(
            "forward model and observations use different wells".into(),
        ));
    }
    let prior = fm.scenario().prior;
    let grid = scan_grid(&opts.scan, &prior)?;
    let observed = obs.observed();

    let responses: Vec<_> = grid.candidates.par_iter().map(|p| fm.evaluate(p)).collect();

    let log_ranges = prior.log_ranges();
    let log_bounds: Vec<(f64, f64)> = prior
        .bounds()
        .iter()
        .map(|(lo, hi)| (lo.ln(), hi.ln()))
        .collect();
    let mut nm =
        NelderMeadOptions::new(log_ranges.iter().map(|r| opts.step_fraction * r).collect());
    nm.f_tol = opts.f_tol;
    nm.x_tol = opts.x_tol;
    nm.max_evals = opts.max_evals;

    // Starts per sigma, ranked by NLL then candidate index.
    let mut jobs = Vec::new();
    let mut trace = Vec::new();
    for (si, &sigma) in opts.sigma_grid.iter().enumerate() {
        let mut ranked: Vec<(f64, usize)> = responses
            .iter()
            .enumerate()
            .map(|(k, r)| (nll_from_response(r, &observed, obs, sigma), k))
            .collect();
        if opts.keep_trace {
            trace.extend(ranked.iter().map(|&(nll, k)| TraceEntry {
                sigma_h: sigma,
                phase: Phase::Scan,
                index: k,
                p: grid.candidates[k],
                nll,
            }));
        }
        ranked.retain(|(v, _)| v.is_finite());
        ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (start, &(_, k)) in ranked.iter().take(opts.n_starts).enumerate() {
            jobs.push((si, start, grid.candidates[k]));
        }
    }
    if jobs.is_empty() {
        return Err(Error::AllInfeasible);
    }

    let refined: Vec<Result<Refined>> = jobs
        .par_iter()
        .map(|&(si, start, p0)| {
            let sigma = opts.sigma_grid[si];
            let mut local = Vec::new();
            let objective = |x: &[f64]| {
                let p = ParameterVector::exp(x);
                // Uniform prior: zero density outside the box.
                let inside = x
                    .iter()
                    .zip(&log_bounds)
                    .all(|(v, (lo, hi))| *v >= lo - LOG_SLACK && *v <= hi + LOG_SLACK);
                let v = if inside {
                    nll_joint(&p, obs, sigma, fm)
                } else {
                    f64::INFINITY
                };
                if opts.keep_trace {
                    local.push(TraceEntry {
                        sigma_h: sigma,
                        phase: Phase::Simplex,
                        index: start,
                        p,
                        nll: v,
                    });
                }
                v
            };
            let r = nelder_mead(objective, &p0.ln(), &nm)?;
            Ok(Refined {
                p: ParameterVector::exp(&r.x),
                nll: r.f,
                evals: r.evals,
                converged: r.converged,
                trace: local,
            })
        })
        .collect();

    let mut best: Option<(f64, f64, ParameterVector)> = None;
    let mut simplex_evals = 0;
    let mut simplex_exhausted = 0;
    for (job, r) in jobs.iter().zip(refined) {
        let r = r?;
        simplex_evals += r.evals;
        simplex_exhausted += usize::from(!r.converged);
        trace.extend(r.trace);
        let sigma = opts.sigma_grid[job.0];
        if r.nll.is_finite() && best.is_none_or(|(b, _, _)| r.nll < b) {
            best = Some((r.nll, sigma, r.p));
        }
    }
    let (nll_at_min, sigma_h_hat, mu_post) = best.ok_or(Error::AllInfeasible)?;
    let resp = fm.evaluate(&mu_post);
    Ok(CalibrationResult {
        mu_post,
        sigma_h_hat,
        nll_at_min,
        h_pas_at_min: resp.h_pas,
        ssr_at_min: ssr(&resp.heads, &observed),
        n_candidates: grid.candidates.len(),
        n_raw_candidates: grid.raw_count,
        n_solves: fm.solves(),
        simplex_evals,
        simplex_exhausted,
        trace,
    })
}
