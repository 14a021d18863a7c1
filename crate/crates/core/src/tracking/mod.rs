//! Advective particle tracking (Pollock's semi-analytic scheme).

mod pollock;
mod velocity;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use pollock::{
    displacement, track_particle, transit_time, ExitReason, Position, TrackOptions, TrackResult,
    WeakSinkRule, SECONDS_PER_YEAR,
};
pub use velocity::{
    build_velocity_field, VelocityField, X_MINUS, X_PLUS, Y_MINUS, Y_PLUS, Z_MINUS, Z_PLUS,
};

use crate::error::{Error, Result};
use crate::model::{Cell, Grid};

/// Centres of top-layer active cells with `row % spacing == 0` and
/// `col % spacing == 0`, row-major.
pub fn release_grid(grid: &Grid, spacing: usize) -> Result<Vec<Position>> {
    if spacing == 0 {
        return Err(Error::InvalidInput("release spacing must be >= 1".into()));
    }
    let mut starts = Vec::new();
    for row in (0..grid.n_rows).step_by(spacing) {
        for col in (0..grid.n_cols).step_by(spacing) {
            let c = Cell::new(0, row, col);
            if grid.active[grid.index(c)] {
                starts.push(Position::center(c));
            }
        }
    }
    Ok(starts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub particle_id: usize,
    pub start: Cell,
    pub time_years: f64,
    pub reason: ExitReason,
}

/// Travel times of one release, zero-time particles excluded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelTimeSample {
    /// Positive travel times (years), ascending.
    pub times: Vec<f64>,
    pub n_released: usize,
    pub n_zero_excluded: usize,
    pub n_unterminated: usize,
    /// Per-particle outcome in release order.
    pub particles: Vec<ParticleRecord>,
}

pub fn travel_time_distribution(
    vf: &VelocityField,
    starts: &[Position],
    opts: &TrackOptions,
) -> Result<TravelTimeSample> {
    let results: Vec<TrackResult> = starts
        .par_iter()
        .map(|s| track_particle(vf, s, opts))
        .collect::<Result<_>>()?;
    let mut times = Vec::with_capacity(results.len());
    let mut n_zero_excluded = 0;
    let mut n_unterminated = 0;
    let mut particles = Vec::with_capacity(results.len());
    for (id, (s, r)) in starts.iter().zip(&results).enumerate() {
        particles.push(ParticleRecord {
            particle_id: id,
            start: s.cell,
            time_years: r.time_years,
            reason: r.reason,
        });
        if !r.reason.terminated() {
            n_unterminated += 1;
        } else if r.time_years == 0.0 {
            n_zero_excluded += 1;
        } else {
            times.push(r.time_years);
        }
    }
    times.sort_by(f64::total_cmp);
    Ok(TravelTimeSample {
        times,
        n_released: starts.len(),
        n_zero_excluded,
        n_unterminated,
        particles,
    })
}
