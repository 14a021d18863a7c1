use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde_json::json;

use gwuq_core::flow::{compute_hpas, flux_budget, sample_wells, solve_steady_heads, SolverOptions};
use gwuq_core::inversion::{
    calibrate, default_sigma_grid, generate_synthetic_heads, CalibrateOptions, ForwardModel, ObservationSet, Phase,
    ScanSpec,
};
use gwuq_core::laplace::{laplace, CovarianceOptions, PosteriorGaussian};
use gwuq_core::model::{
    generate_synthetic_valley, load_scenario, read_wells_csv, save_scenario, with_wells, ParameterVector, Scenario,
    ValleySpec, PARAM_NAMES,
};
use gwuq_core::rng::derive_seed;
use gwuq_core::tracking::{
    build_velocity_field, release_grid, travel_time_distribution, TrackOptions, WeakSinkRule,
};
use gwuq_core::uq::{
    ensemble_summary, forward_uq, identifiability_study, HistogramOptions, StudyOptions, UqOptions, PERCENTILES,
};

use crate::cli::{
    CalibrateArgs, IdentifyArgs, MakeSyntheticArgs, Mode, ModelArgs, ScanSize, SolveArgs, TrackArgs, UqArgs,
};
use crate::manifest::Counters;
use crate::output::{num, opt, OutDir};

/// What a command reports back for the manifest.
pub struct Outcome {
    pub counters: Counters,
    pub inputs: Vec<std::path::PathBuf>,
    /// Nonzero exit requested despite complete output (e.g. no convergence).
    pub exit_code: u8,
}

impl Outcome {
    fn new(inputs: &[&Path]) -> Self {
        Self {
            counters: Counters::default(),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            exit_code: 0,
        }
    }
}

fn solver_options(mode: Mode) -> SolverOptions {
    match mode {
        Mode::Confined => SolverOptions::default(),
        Mode::Unconfined => SolverOptions::unconfined(),
    }
}

fn parse_params(p: &Option<Vec<f64>>) -> Result<ParameterVector> {
    match p {
        None => Ok(ParameterVector::base_case()),
        Some(v) => {
            let p = ParameterVector::from_slice(v)?;
            if !p.all_positive() {
                return Err(gwuq_core::Error::InvalidInput(format!("parameters must be positive: {v:?}")).into());
            }
            Ok(p)
        }
    }
}

fn load(path: &Path) -> Result<Scenario> {
    Ok(load_scenario(path)?)
}

fn param_columns(p: &ParameterVector) -> Vec<String> {
    p.to_array().iter().map(|v| num(*v)).collect()
}

pub const NOT_CONVERGED: u8 = 3;

pub fn solve(args: &SolveArgs, out: &mut OutDir) -> Result<Outcome> {
    let ModelArgs { scenario, params, mode } = &args.model;
    let mut outcome = Outcome::new(&[scenario]);
    let s = load(scenario)?;
    let p = parse_params(params)?;
    let hf = solve_steady_heads(&s, &p, &solver_options(*mode))?;
    outcome.counters.solves = 1;
    let g = &s.grid;
    out.csv(
        "heads.csv",
        &["layer", "row", "col", "active", "head_m"],
        (0..g.n_cells()).map(|i| {
            let c = g.cell(i);
            vec![
                c.layer.to_string(),
                c.row.to_string(),
                c.col.to_string(),
                g.active[i].to_string(),
                if g.active[i] { num(hf.head[i]) } else { String::new() },
            ]
        }),
    )?;
    let budget = flux_budget(&hf, &s, &p);
    let h_pas = compute_hpas(&hf, &s);
    out.json(
        "budget.json",
        &json!({
            "params": p,
            "mode": hf.mode,
            "converged": hf.converged,
            "iterations": hf.iterations,
            "residual_norm": hf.residual_norm,
            "max_head_change": hf.max_head_change,
            "budget": budget,
            "relative_imbalance": budget.relative_imbalance(),
            "h_pas": h_pas,
            "drains_active": hf.drain_active.iter().filter(|a| **a).count(),
        }),
    )?;
    let heads = sample_wells(&hf, &s, &s.wells)?;
    out.csv(
        "well_heads.csv",
        &["well_id", "layer", "row", "col", "simulated_head_m", "observed_head_m"],
        s.wells.iter().zip(&heads).map(|(w, h)| {
            vec![
                w.id.clone(),
                w.cell.layer.to_string(),
                w.cell.row.to_string(),
                w.cell.col.to_string(),
                num(*h),
                opt(w.observed_head),
            ]
        }),
    )?;
    if !hf.converged {
        eprintln!("warning: flow solve did not converge ({} iterations)", hf.iterations);
        outcome.exit_code = NOT_CONVERGED;
    }
    Ok(outcome)
}

pub fn track(args: &TrackArgs, out: &mut OutDir) -> Result<Outcome> {
    let ModelArgs { scenario, params, mode } = &args.model;
    let mut outcome = Outcome::new(&[scenario]);
    let s = load(scenario)?;
    let p = parse_params(params)?;
    let hf = solve_steady_heads(&s, &p, &solver_options(*mode))?;
    outcome.counters.solves = 1;
    if !hf.converged {
        return Err(gwuq_core::Error::NotConverged {
            iterations: hf.iterations,
            max_change: hf.max_head_change,
        }
        .into());
    }
    let vf = build_velocity_field(&hf, &s, &p)?;
    let starts = release_grid(&s.grid, args.spacing)?;
    let opts = TrackOptions {
        max_time_years: args.max_time_years,
        weak_sinks: if args.stop_at_weak_sinks {
            WeakSinkRule::Stop
        } else {
            WeakSinkRule::PassThrough
        },
        ..TrackOptions::default()
    };
    let sample = travel_time_distribution(&vf, &starts, &opts)?;
    outcome.counters.tracked_particles = sample.n_released;
    if sample.times.is_empty() {
        eprintln!("warning: no particle with a positive travel time");
    }
    out.csv(
        "travel_times.csv",
        &["particle_id", "layer", "row", "col", "time_years", "reason"],
        sample
            .particles
            .iter()
            .filter(|r| !(r.reason.terminated() && r.time_years == 0.0))
            .map(|r| {
                vec![
                    r.particle_id.to_string(),
                    r.start.layer.to_string(),
                    r.start.row.to_string(),
                    r.start.col.to_string(),
                    num(r.time_years),
                    r.reason.as_str().to_string(),
                ]
            }),
    )?;
    let percentiles: Option<Vec<f64>> = (!sample.times.is_empty()).then(|| {
        PERCENTILES
            .iter()
            .map(|q| gwuq_core::uq::percentile(&sample.times, *q).expect("non-empty"))
            .collect()
    });
    out.json(
        "travel_time_summary.json",
        &json!({
            "params": p,
            "spacing": args.spacing,
            "n_released": sample.n_released,
            "n_zero_excluded": sample.n_zero_excluded,
            "n_unterminated": sample.n_unterminated,
            "n_times": sample.times.len(),
            "percentile_levels": PERCENTILES,
            "percentiles_years": percentiles,
            "max_relative_divergence": vf.max_relative_divergence(),
        }),
    )?;
    Ok(outcome)
}

fn observations(s: &Scenario, wells: Option<&Path>) -> Result<(Scenario, ObservationSet)> {
    let s = match wells {
        Some(path) => with_wells(s, read_wells_csv(path)?)?,
        None => s.clone(),
    };
    let obs = ObservationSet::from_scenario(&s).context("scenario has no usable observations")?;
    // The forward model samples exactly the observed wells.
    let s = with_wells(&s, obs.wells.clone())?;
    Ok((s, obs))
}

fn scan_spec(size: ScanSize) -> ScanSpec {
    match size {
        ScanSize::Full => ScanSpec::default(),
        ScanSize::Coarse => ScanSpec::coarse(),
    }
}

pub fn calibrate_cmd(args: &CalibrateArgs, out: &mut OutDir) -> Result<Outcome> {
    let mut inputs: Vec<&Path> = vec![&args.scenario];
    if let Some(w) = &args.wells {
        inputs.push(w);
    }
    let mut outcome = Outcome::new(&inputs);
    let base = load(&args.scenario)?;
    let (s, obs) = observations(&base, args.wells.as_deref())?;
    let s = Arc::new(s);
    let fm = ForwardModel::for_scenario(Arc::clone(&s), solver_options(args.mode));
    let copts = CalibrateOptions {
        sigma_grid: args.sigma_grid.clone().unwrap_or_else(default_sigma_grid),
        scan: scan_spec(args.scan),
        n_starts: args.n_starts,
        max_evals: args.max_evals,
        keep_trace: args.trace,
        ..CalibrateOptions::default()
    };
    let cal = calibrate(&fm, &obs, &copts)?;
    out.json(
        "calibration.json",
        &json!({
            "mu_post": cal.mu_post,
            "sigma_h_hat": cal.sigma_h_hat,
            "nll_at_min": cal.nll_at_min,
            "h_pas_at_min": cal.h_pas_at_min,
            "h_pas_star": obs.h_pas_star,
            "sigma_hpas": obs.sigma_hpas,
            "ssr_at_min": cal.ssr_at_min,
            "n_wells": obs.n_wells(),
            "n_candidates": cal.n_candidates,
            "n_raw_candidates": cal.n_raw_candidates,
            "simplex_evals": cal.simplex_evals,
            "simplex_exhausted": cal.simplex_exhausted,
            "sigma_grid": copts.sigma_grid,
        }),
    )?;
    if args.trace {
        out.csv(
            "trace.csv",
            &["sigma_h", "phase", "index", "k_zone1", "k_zone2", "k_zone3", "r_irrig", "nll"],
            cal.trace.iter().map(|t| {
                let mut row = vec![
                    num(t.sigma_h),
                    match t.phase {
                        Phase::Scan => "scan".to_string(),
                        Phase::Simplex => "simplex".to_string(),
                    },
                    t.index.to_string(),
                ];
                row.extend(param_columns(&t.p));
                row.push(num(t.nll));
                row
            }),
        )?;
    }
    let cov = CovarianceOptions {
        ridge: args.ridge,
        ..CovarianceOptions::default()
    };
    let lp = laplace(&fm, &obs, &cal.mu_post, cal.sigma_h_hat, args.step_fraction, &cov);
    outcome.counters.solves = fm.solves();
    let lp = lp?;
    out.json("posterior.json", &lp.posterior)?;
    out.json(
        "jacobian.json",
        &json!({
            "step_fraction": lp.jacobians.step_fraction,
            "steps": lp.jacobians.steps,
            "j_h": (0..lp.jacobians.j_h.nrows())
                .map(|i| (0..4).map(|j| lp.jacobians.j_h[(i, j)]).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "j_hpas": lp.jacobians.j_hpas,
            "hpas_flat": lp.jacobians.hpas_flat,
            "cone_crossing": lp.jacobians.cone_crossing,
            "ridge": args.ridge,
        }),
    )?;
    if lp.jacobians.hpas_flat {
        eprintln!("note: flooded-area response is flat at the optimum; it adds no curvature");
    }
    Ok(outcome)
}

pub fn identify(args: &IdentifyArgs, out: &mut OutDir) -> Result<Outcome> {
    let mut outcome = Outcome::new(&[&args.scenario]);
    let s = Arc::new(load(&args.scenario)?);
    let p_true = parse_params(&args.params)?;
    let mut opts = StudyOptions {
        step_fraction: args.step_fraction,
        ..StudyOptions::default()
    };
    opts.calibrate.scan = scan_spec(args.scan);
    let report = identifiability_study(s, &p_true, &args.levels, args.replicates, args.common.seed, &opts)?;
    outcome.counters.solves = report.cells.iter().map(|c| c.n_solves).sum();

    let mut rows = Vec::new();
    for c in &report.cells {
        for (j, name) in PARAM_NAMES.iter().enumerate() {
            let m = c.metrics.map(|m| m[j]);
            rows.push(vec![
                num(c.level),
                c.replicate.to_string(),
                name.to_string(),
                num(p_true[j]),
                opt(c.mu_post.map(|p| p[j])),
                opt(c.posterior.as_ref().map(|pg| pg.sigma[(j, j)].sqrt())),
                opt(m.map(|m| m.ratio)),
                opt(m.map(|m| m.cov)),
                opt(m.map(|m| m.variance_reduction)),
                m.map(|m| m.truth_in_2sigma.to_string()).unwrap_or_default(),
                opt(c.sigma_h_hat),
                c.failure.clone().unwrap_or_default(),
            ]);
        }
    }
    out.csv(
        "identifiability_report.csv",
        &[
            "level_m",
            "replicate",
            "parameter",
            "true_value",
            "estimate",
            "posterior_std",
            "ratio_to_true",
            "coefficient_of_variation",
            "variance_reduction_ratio",
            "truth_in_2sigma",
            "sigma_h_hat",
            "failure",
        ],
        rows,
    )?;
    out.json(
        "identifiability_summary.json",
        &json!({
            "p_true": p_true,
            "h_pas_star": report.h_pas_star,
            "replicates": report.replicates,
            "seed": report.seed,
            "scan": opts.calibrate.scan,
            "sigma_grid": opts.calibrate.sigma_grid,
            "levels": report.summaries(),
            "thresholds_note": "within-factor-2 and variance-reduction < 0.1 fractions are tool-defined reporting thresholds",
        }),
    )?;
    for c in &report.cells {
        if let Some(pg) = &c.posterior {
            out.json(&format!("posteriors/level_{}_rep_{}.json", num(c.level), c.replicate), pg)?;
        }
    }
    Ok(outcome)
}

pub fn uq(args: &UqArgs, out: &mut OutDir) -> Result<Outcome> {
    let mut outcome = Outcome::new(&[&args.scenario, &args.posterior]);
    let s = load(&args.scenario)?;
    let text = std::fs::read_to_string(&args.posterior)
        .map_err(|e| gwuq_core::Error::io(&args.posterior, e))?;
    let pg: PosteriorGaussian = serde_json::from_str(&text).map_err(gwuq_core::Error::from)?;
    let opts = UqOptions {
        solver: solver_options(args.mode),
        release_spacing: args.spacing,
        threshold_years: args.threshold_years,
        max_rejects: args.max_rejects,
        ..UqOptions::default()
    };
    let ens = forward_uq(&s, &pg, args.n, derive_seed(args.common.seed, 0x5551), &opts)?;
    outcome.counters.solves = ens.n_solves;
    outcome.counters.tracked_particles = ens.n_tracked;
    outcome.counters.rejections = ens.rejected_draws;

    let mut header = vec!["realization"];
    header.extend(PARAM_NAMES);
    header.extend(["p25_years", "p50_years", "p75_years", "p90_years", "p99_years"]);
    header.extend(["fraction_under_threshold", "n_released", "n_zero_excluded", "n_unterminated", "failure"]);
    out.csv(
        "ensemble_percentiles.csv",
        &header,
        ens.realizations.iter().map(|r| {
            let mut row = vec![r.index.to_string()];
            row.extend(param_columns(&r.params));
            for k in 0..PERCENTILES.len() {
                row.push(opt(r.percentiles.map(|p| p[k])));
            }
            row.push(opt(r.fraction_under));
            let counts = r.sample.as_ref().map(|s| (s.n_released, s.n_zero_excluded, s.n_unterminated));
            row.push(counts.map(|c| c.0.to_string()).unwrap_or_default());
            row.push(counts.map(|c| c.1.to_string()).unwrap_or_default());
            row.push(counts.map(|c| c.2.to_string()).unwrap_or_default());
            row.push(r.failure.clone().unwrap_or_default());
            row
        }),
    )?;
    let hist = HistogramOptions {
        p50_relative_width: args.p50_bin,
        fraction_width: args.fraction_bin,
    };
    let summary = ensemble_summary(&ens, &hist)?;
    out.json("ensemble_summary.json", &summary)?;
    out.csv(
        "histogram_p50.csv",
        &["lower_years", "upper_years", "count"],
        summary.p50_histogram.bins().map(|(a, b, c)| vec![num(a), num(b), c.to_string()]),
    )?;
    out.csv(
        "histogram_fraction_under.csv",
        &["lower", "upper", "count"],
        summary.fraction_histogram.bins().map(|(a, b, c)| vec![num(a), num(b), c.to_string()]),
    )?;
    // Long format: one empirical CDF step per particle and realization.
    let mut cdf = Vec::new();
    for r in ens.realizations.iter().filter(|r| r.ok()) {
        let times = &r.sample.as_ref().expect("ok realization has a sample").times;
        let n = times.len() as f64;
        for (k, t) in times.iter().enumerate() {
            cdf.push(vec![r.index.to_string(), num(*t), num((k + 1) as f64 / n)]);
        }
    }
    out.csv("travel_time_cdf.csv", &["realization", "time_years", "cdf"], cdf)?;
    if summary.n_failed > 0 {
        eprintln!("warning: {} realizations failed and were excluded", summary.n_failed);
    }
    Ok(outcome)
}

pub fn make_synthetic(args: &MakeSyntheticArgs, out: &mut OutDir) -> Result<Outcome> {
    let mut outcome = Outcome::new(&[]);
    if !(args.sigma >= 0.0) {
        bail!(gwuq_core::Error::InvalidInput("sigma must be >= 0".into()));
    }
    let spec = ValleySpec {
        n_rows: args.rows,
        n_cols: args.cols,
        n_layers: args.layers,
        cell_size: args.cell_size,
        n_wells: args.wells,
        seed: args.valley_seed,
        ..ValleySpec::valley_small()
    };
    let s = generate_synthetic_valley(&spec)?;
    let p = parse_params(&args.params)?;
    let solver = SolverOptions::default();
    let data = generate_synthetic_heads(&s, &p, args.sigma, derive_seed(args.common.seed, 0x5a7e), 1, &solver)?;
    outcome.counters.solves = 2;
    let obs = &data[0];
    let mut s = with_wells(&s, obs.wells.clone())?;
    s.expert.h_pas_star = obs.h_pas_star;
    s.expert.sigma_hpas = obs.sigma_hpas;
    let path = out.path("scenario.toml");
    save_scenario(&s, &path)?;
    out.mark("scenario.toml");
    gwuq_core::model::write_wells_csv(&obs.wells, out.path("observations.csv"))?;
    out.mark("observations.csv");
    out.json(
        "truth.json",
        &json!({
            "p_true": p,
            "sigma_h": args.sigma,
            "h_pas_true": obs.h_pas_star,
            "valley": spec,
        }),
    )?;
    Ok(outcome)
}
