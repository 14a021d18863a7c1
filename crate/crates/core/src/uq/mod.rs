//! Identifiability campaigns and Monte Carlo propagation of the posterior
//! to travel times.

mod ensemble;
mod identifiability;
mod sampling;

pub use ensemble::{
    ensemble_summary, forward_uq, percentile, travel_times_for, EnsembleSummary, Histogram, HistogramOptions,
    PercentileRow, Realization, Spread, TravelTimeEnsemble, UqOptions, PERCENTILES,
};
pub use identifiability::{
    identifiability_metrics, identifiability_study, level_seed, CampaignCell, IdentifiabilityReport, LevelSummary,
    ParamMetrics, StudyOptions, DEFAULT_NOISE_LEVELS, DEFAULT_REPLICATES,
};
pub use sampling::{covariance_factor, sample_posterior, PosteriorSample, DEFAULT_MAX_REJECTS};
