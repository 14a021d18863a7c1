use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const DEFAULT_SEED: u64 = 20240607;

#[derive(Debug, Parser)]
#[command(name = "gwuq", version, about = "Groundwater flow calibration and travel-time uncertainty")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Steady heads, flux budget, flooded area and well heads.
    Solve(SolveArgs),
    /// Particle travel times from a release grid on the top layer.
    Track(TrackArgs),
    /// Grid scan + simplex calibration, then the Laplace posterior.
    Calibrate(CalibrateArgs),
    /// Identifiability campaign on synthetic data.
    Identify(IdentifyArgs),
    /// Monte Carlo travel-time ensemble from a posterior file.
    Uq(UqArgs),
    /// Synthetic valley scenario with noisy observations.
    MakeSynthetic(MakeSyntheticArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Track(_) => "track",
            Command::Calibrate(_) => "calibrate",
            Command::Identify(_) => "identify",
            Command::Uq(_) => "uq",
            Command::MakeSynthetic(_) => "make-synthetic",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Solve(a) => &a.common,
            Command::Track(a) => &a.common,
            Command::Calibrate(a) => &a.common,
            Command::Identify(a) => &a.common,
            Command::Uq(a) => &a.common,
            Command::MakeSynthetic(a) => &a.common,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Master seed; every random stream is derived from it.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (results do not depend on it).
    #[arg(long, env = "GWUQ_WORKERS")]
    #[serde(skip)]
    pub workers: Option<usize>,
    #[arg(long, default_value = "out")]
    #[serde(skip)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Confined,
    Unconfined,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanSize {
    /// 15 x 4 x 15 x 20.
    Full,
    /// 6 x 4 x 6 x 5.
    Coarse,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ModelArgs {
    /// Scenario TOML file.
    #[arg(long)]
    pub scenario: PathBuf,
    /// k_zone1,k_zone2,k_zone3,r_irrig (m/s); base case when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = Mode::Confined)]
    pub mode: Mode,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SolveArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrackArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Release every n-th row and column of the top layer.
    #[arg(long, default_value_t = 5)]
    pub spacing: usize,
    #[arg(long, default_value_t = 10_000.0)]
    pub max_time_years: f64,
    /// Stop particles in any cell with a sink, not only strong sinks.
    #[arg(long)]
    pub stop_at_weak_sinks: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CalibrateArgs {
    /// Scenario TOML; its wells must carry observed heads unless --wells is given.
    #[arg(long)]
    pub scenario: PathBuf,
    /// Observation CSV (well_id,layer,row,col,observed_head_m).
    #[arg(long)]
    pub wells: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ScanSize::Full)]
    pub scan: ScanSize,
    /// Noise levels swept (m); 12 log-spaced values in [0.1, 8] by default.
    #[arg(long, value_delimiter = ',')]
    pub sigma_grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 3)]
    pub n_starts: usize,
    #[arg(long, default_value_t = 500)]
    pub max_evals: usize,
    /// Forward-difference step relative to each parameter.
    #[arg(long, default_value_t = 2e-4)]
    pub step_fraction: f64,
    /// Ridge added to the Hessian diagonal (relative); off by default.
    #[arg(long)]
    pub ridge: Option<f64>,
    /// Write every evaluated candidate to trace.csv.
    #[arg(long)]
    pub trace: bool,
    #[arg(long, value_enum, default_value_t = Mode::Confined)]
    pub mode: Mode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IdentifyArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// True parameters; base case when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.25, 0.5, 1.0, 2.0, 3.0, 4.0])]
    pub levels: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    pub replicates: usize,
    #[arg(long, value_enum, default_value_t = ScanSize::Coarse)]
    pub scan: ScanSize,
    #[arg(long, default_value_t = 2e-4)]
    pub step_fraction: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct UqArgs {
    #[arg(long)]
    pub scenario: PathBuf,
    /// Posterior JSON (mu, row-major sigma, sigma_h_hat).
    #[arg(long)]
    pub posterior: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub spacing: usize,
    #[arg(long, default_value_t = 25.0)]
    pub threshold_years: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_rejects: usize,
    /// Bin width of the median-travel-time histogram, relative to its median.
    #[arg(long, default_value_t = 0.0005)]
    pub p50_bin: f64,
    /// Bin width of the young-fraction histogram (fraction units).
    #[arg(long, default_value_t = 0.001)]
    pub fraction_bin: f64,
    #[arg(long, value_enum, default_value_t = Mode::Confined)]
    pub mode: Mode,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MakeSyntheticArgs {
    #[arg(long, default_value_t = 30)]
    pub rows: usize,
    #[arg(long, default_value_t = 30)]
    pub cols: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 1000.0)]
    pub cell_size: f64,
    #[arg(long, default_value_t = 36)]
    pub wells: usize,
    /// Seed of the valley geometry (zones, drains, wells).
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub valley_seed: u64,
    /// True parameters; base case when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Option<Vec<f64>>,
    /// Head noise standard deviation (m).
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[command(flatten)]
    pub common: Common,
}
