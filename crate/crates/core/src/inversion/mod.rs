//! Expert-augmented likelihood and the composite calibration optimizer.

mod calibrate;
mod forward;
mod likelihood;
mod nelder_mead;
mod scan;
mod synthetic;

pub use calibrate::{
    calibrate, default_sigma_grid, CalibrateOptions, CalibrationResult, Phase, TraceEntry,
};
pub use forward::{ForwardModel, Response};
pub use likelihood::{nll_constant, nll_from_response, nll_joint, ssr, ObservationSet};
pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};
pub use scan::{log_space, scan_grid, ScanGrid, ScanSpec};
pub use synthetic::generate_synthetic_heads;
