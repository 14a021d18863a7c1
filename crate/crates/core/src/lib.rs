//! Steady groundwater flow, particle tracking and Bayesian calibration.

pub mod error;
pub mod flow;
pub mod inversion;
pub mod laplace;
pub mod model;
pub mod rng;
pub mod uq;
pub mod tracking;

pub use error::{Error, Result};
