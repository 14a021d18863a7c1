use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::{sample_posterior, DEFAULT_MAX_REJECTS};
use crate::error::{Error, Result};
use crate::flow::{solve_steady_heads, SolverOptions};
use crate::laplace::PosteriorGaussian;
use crate::model::{ParameterVector, Scenario};
use crate::tracking::{build_velocity_field, release_grid, travel_time_distribution, TrackOptions, TravelTimeSample};

pub const PERCENTILES: [f64; 5] = [25.0, 50.0, 75.0, 90.0, 99.0];

/// Percentile of an ascending sample by linear interpolation at position
/// `(n - 1) q / 100`.
pub fn percentile(sorted: &[f64], q: f64) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::InvalidInput("percentile of an empty sample".into()));
    }
    if !(0.0..=100.0).contains(&q) {
        return Err(Error::InvalidInput(format!("percentile level {q} outside [0, 100]")));
    }
    let pos = (sorted.len() - 1) as f64 * q / 100.0;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let w = pos - lo as f64;
    Ok(if w == 0.0 {
        sorted[lo]
    } else {
        sorted[lo] + w * (sorted[hi] - sorted[lo])
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UqOptions {
    pub solver: SolverOptions,
    pub track: TrackOptions,
    /// Release every `spacing`-th row and column of the top layer.
    pub release_spacing: usize,
    /// Travel-time threshold for the "young water" fraction (years).
    pub threshold_years: f64,
    pub max_rejects: usize,
}

impl Default for UqOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            track: TrackOptions::default(),
            release_spacing: 5,
            threshold_years: 25.0,
            max_rejects: DEFAULT_MAX_REJECTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub index: usize,
    pub params: ParameterVector,
    /// Why the realization is excluded from summaries, if it is.
    pub failure: Option<String>,
    pub sample: Option<TravelTimeSample>,
    /// At [`PERCENTILES`] (years).
    pub percentiles: Option<[f64; 5]>,
    /// Fraction of positive travel times below the threshold.
    pub fraction_under: Option<f64>,
}

impl Realization {
    pub fn ok(&self) -> bool {
        self.percentiles.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeEnsemble {
    pub realizations: Vec<Realization>,
    pub threshold_years: f64,
    pub rejected_draws: usize,
    pub n_solves: usize,
    pub n_tracked: usize,
}

impl TravelTimeEnsemble {
    pub fn n_failed(&self) -> usize {
        self.realizations.iter().filter(|r| !r.ok()).count()
    }
}

/// Flow solve and particle tracking for one parameter vector.
pub fn travel_times_for(scenario: &Scenario, p: &ParameterVector, opts: &UqOptions) -> Result<TravelTimeSample> {
    let hf = solve_steady_heads(scenario, p, &opts.solver)?;
    if !hf.converged {
        return Err(Error::NotConverged {
            iterations: hf.iterations,
            max_change: hf.max_head_change,
        });
    }
    let vf = build_velocity_field(&hf, scenario, p)?;
    let starts = release_grid(&scenario.grid, opts.release_spacing)?;
    travel_time_distribution(&vf, &starts, &opts.track)
}

fn realization(scenario: &Scenario, index: usize, p: ParameterVector, opts: &UqOptions) -> Realization {
    let mut r = Realization {
        index,
        params: p,
        failure: None,
        sample: None,
        percentiles: None,
        fraction_under: None,
    };
    match travel_times_for(scenario, &p, opts) {
        Ok(sample) => {
            if sample.times.is_empty() {
                r.failure = Some("no particle with a positive travel time".into());
            } else {
                r.percentiles = Some(PERCENTILES.map(|q| percentile(&sample.times, q).expect("non-empty")));
                let under = sample.times.iter().filter(|t| **t < opts.threshold_years).count();
                r.fraction_under = Some(under as f64 / sample.times.len() as f64);
            }
            r.sample = Some(sample);
        }
        Err(e) => r.failure = Some(e.to_string()),
    }
    r
}

/// Monte Carlo propagation of the posterior to travel-time percentiles.
pub fn forward_uq(scenario: &Scenario, pg: &PosteriorGaussian, n: usize, seed: u64, opts: &UqOptions) -> Result<TravelTimeEnsemble> {
    if n == 0 {
        return Err(Error::InvalidInput("ensemble size must be >= 1".into()));
    }
    if !(opts.threshold_years > 0.0) {
        return Err(Error::InvalidInput("threshold_years must be > 0".into()));
    }
    let draws = sample_posterior(pg, n, seed, opts.max_rejects)?;
    let realizations: Vec<Realization> = draws
        .draws
        .par_iter()
        .enumerate()
        .map(|(i, p)| realization(scenario, i, *p, opts))
        .collect();
    let n_tracked = realizations
        .iter()
        .filter_map(|r| r.sample.as_ref())
        .map(|s| s.n_released)
        .sum();
    Ok(TravelTimeEnsemble {
        n_solves: realizations.len(),
        n_tracked,
        realizations,
        threshold_years: opts.threshold_years,
        rejected_draws: draws.rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Result<Self> {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Ok(Self {
            median: percentile(&v, 50.0)?,
            min: v[0],
            max: v[v.len() - 1],
        })
    }

    pub fn range(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// Lower edge of the first bin.
    pub origin: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Fixed-width bins aligned on multiples of `bin_width`.
    pub fn new(values: &[f64], bin_width: f64) -> Result<Self> {
        if !(bin_width > 0.0) {
            return Err(Error::InvalidInput("bin width must be > 0".into()));
        }
        if values.is_empty() {
            return Ok(Self {
                bin_width,
                origin: 0.0,
                counts: Vec::new(),
            });
        }
        let bin = |v: f64| (v / bin_width).floor() as i64;
        let first = values.iter().map(|v| bin(*v)).min().expect("non-empty");
        let last = values.iter().map(|v| bin(*v)).max().expect("non-empty");
        let mut counts = vec![0; (last - first + 1) as usize];
        for v in values {
            counts[(bin(*v) - first) as usize] += 1;
        }
        Ok(Self {
            bin_width,
            origin: first as f64 * bin_width,
            counts,
        })
    }

    /// `(lower edge, upper edge, count)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, usize)> + '_ {
        self.counts.iter().enumerate().map(|(i, c)| {
            let lo = self.origin + i as f64 * self.bin_width;
            (lo, lo + self.bin_width, *c)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramOptions {
    /// Median-travel-time bin width relative to the ensemble median.
    pub p50_relative_width: f64,
    /// Fraction-under-threshold bin width, in fraction units.
    pub fraction_width: f64,
}

impl Default for HistogramOptions {
    fn default() -> Self {
        Self {
            p50_relative_width: 0.0005,
            fraction_width: 0.001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentileRow {
    pub percentile: f64,
    #[serde(flatten)]
    pub spread: Spread,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_realizations: usize,
    pub n_successful: usize,
    pub n_failed: usize,
    pub rejected_draws: usize,
    pub threshold_years: f64,
    pub percentiles: Vec<PercentileRow>,
    pub fraction_under: Spread,
    pub p50_histogram: Histogram,
    pub fraction_histogram: Histogram,
}

impl EnsembleSummary {
    pub fn p50(&self) -> &Spread {
        &self.percentiles[1].spread
    }
}

/// Median, min and max of each percentile over the successful realizations.
pub fn ensemble_summary(ens: &TravelTimeEnsemble, hist: &HistogramOptions) -> Result<EnsembleSummary> {
    let ok: Vec<&Realization> = ens.realizations.iter().filter(|r| r.ok()).collect();
    if ok.is_empty() {
        return Err(Error::InvalidInput("no successful realization to summarize".into()));
    }
    let mut rows = Vec::with_capacity(PERCENTILES.len());
    for (k, q) in PERCENTILES.iter().enumerate() {
        let vals: Vec<f64> = ok.iter().map(|r| r.percentiles.expect("ok")[k]).collect();
        rows.push(PercentileRow {
            percentile: *q,
            spread: Spread::of(&vals)?,
        });
    }
    let p50: Vec<f64> = ok.iter().map(|r| r.percentiles.expect("ok")[1]).collect();
    let fractions: Vec<f64> = ok.iter().map(|r| r.fraction_under.expect("ok")).collect();
    let p50_width = hist.p50_relative_width * rows[1].spread.median;
    Ok(EnsembleSummary {
        n_realizations: ens.realizations.len(),
        n_successful: ok.len(),
        n_failed: ens.realizations.len() - ok.len(),
        rejected_draws: ens.rejected_draws,
        threshold_years: ens.threshold_years,
        fraction_under: Spread::of(&fractions)?,
        p50_histogram: Histogram::new(&p50, if p50_width > 0.0 { p50_width } else { 1.0 })?,
        fraction_histogram: Histogram::new(&fractions, hist.fraction_width)?,
        percentiles: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile(&[10.0], 37.0).unwrap(), 10.0);
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0, 5.0], 50.0).unwrap(), 3.0);
        let hundred: Vec<f64> = (1..=100).map(f64::from).collect();
        assert!((percentile(&hundred, 75.0).unwrap() - 75.25).abs() < 1e-12);
        assert!(percentile(&[], 50.0).is_err());
    }

    fn fake(p50s: &[f64]) -> TravelTimeEnsemble {
        TravelTimeEnsemble {
            realizations: p50s
                .iter()
                .enumerate()
                .map(|(i, m)| Realization {
                    index: i,
                    params: ParameterVector::base_case(),
                    failure: None,
                    sample: None,
                    percentiles: Some([m / 2.0, *m, m * 2.0, m * 3.0, m * 4.0]),
                    fraction_under: Some(0.5),
                })
                .collect(),
            threshold_years: 25.0,
            rejected_draws: 0,
            n_solves: p50s.len(),
            n_tracked: 0,
        }
    }

    #[test]
    fn summary_of_two() {
        let s = ensemble_summary(&fake(&[4.0, 6.0]), &HistogramOptions::default()).unwrap();
        assert_eq!(*s.p50(), Spread { median: 5.0, min: 4.0, max: 6.0 });
    }

    #[test]
    fn summary_of_one_has_no_spread() {
        let s = ensemble_summary(&fake(&[7.0]), &HistogramOptions::default()).unwrap();
        for row in &s.percentiles {
            assert_eq!(row.spread.min, row.spread.max);
            assert_eq!(row.spread.median, row.spread.max);
        }
    }

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::new(&[0.01, 0.02, 0.15, 0.151, 0.35], 0.1).unwrap();
        assert_eq!(h.counts, vec![2, 2, 0, 1]);
        assert_eq!(h.counts.iter().sum::<usize>(), 5);
    }
}
