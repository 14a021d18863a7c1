mod file;
mod grid;
mod params;
mod scenario;

pub use file::*;
pub use grid::{Cell, Grid};
pub use params::{validate_ordering, ParameterVector, PriorBox, N_PARAMS, PARAM_NAMES};
pub use scenario::*;
mod valley;
pub use valley::{generate_synthetic_valley, ValleySpec};
