use serde::{Deserialize, Serialize};

use super::velocity::*;
use crate::error::{Error, Result};
use crate::model::Cell;

pub const SECONDS_PER_YEAR: f64 = 365.25 * 86_400.0;

/// Uniform-velocity branch threshold on `|A| * dt`.
const UNIFORM_EPS: f64 = 1e-12;

/// A point inside a cell; `local` holds fractions in [0, 1] of the cell's
/// x (column), y (row) and z (flow thickness, from the bottom) extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub cell: Cell,
    pub local: [f64; 3],
}

impl Position {
    pub fn center(cell: Cell) -> Self {
        Self {
            cell,
            local: [0.5; 3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    Sink,
    Boundary,
    MaxTime,
    StartInSink,
    /// Trapped in a cell with no outflow and no sink.
    Stagnant,
}

impl ExitReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExitReason::Sink => "sink",
            ExitReason::Boundary => "boundary",
            ExitReason::MaxTime => "max_time",
            ExitReason::StartInSink => "start_in_sink",
            ExitReason::Stagnant => "stagnant",
        }
    }

    /// Whether the particle reached a discharge point.
    pub fn terminated(self) -> bool {
        matches!(
            self,
            ExitReason::Sink | ExitReason::Boundary | ExitReason::StartInSink
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeakSinkRule {
    PassThrough,
    Stop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackOptions {
    pub max_time_years: f64,
    pub max_steps: usize,
    pub weak_sinks: WeakSinkRule,
    /// Record every face crossing in [`TrackResult::path`].
    pub record_path: bool,
}

impl Default for TrackOptions {
    fn default() -> Self {
        Self {
            max_time_years: 10_000.0,
            max_steps: 1_000_000,
            weak_sinks: WeakSinkRule::PassThrough,
            record_path: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackResult {
    pub time_years: f64,
    pub reason: ExitReason,
    pub end: Position,
    pub steps: usize,
    /// Entry positions of each visited cell (start first) when recorded.
    pub path: Vec<Position>,
}

fn is_terminal(vf: &VelocityField, i: usize, rule: WeakSinkRule) -> bool {
    vf.fixed_head[i] || vf.strong_sink[i] || (rule == WeakSinkRule::Stop && vf.sink_out[i] > 0.0)
}

/// Time to reach the face at signed distance `d` moving with entry
/// velocity `vp` under gradient `a`.
#[inline]
pub fn transit_time(a: f64, vp: f64, d: f64) -> f64 {
    let u = a * d / vp;
    if u.abs() < UNIFORM_EPS {
        d / vp
    } else {
        u.ln_1p() / a
    }
}

/// Displacement after time `t` from velocity `vp` under gradient `a`.
#[inline]
pub fn displacement(a: f64, vp: f64, t: f64) -> f64 {
    let at = a * t;
    if at.abs() < UNIFORM_EPS {
        vp * t
    } else {
        vp * at.exp_m1() / a
    }
}

/// Linear-velocity segment of one axis of one cell.
#[derive(Debug, Clone, Copy)]
struct Axis {
    v1: f64,
    v2: f64,
    len: f64,
}

impl Axis {
    fn gradient(&self) -> f64 {
        (self.v2 - self.v1) / self.len
    }

    /// (time, exits through the plus face) or None if this axis never exits.
    fn exit(&self, x: f64) -> Option<(f64, bool)> {
        let a = self.gradient();
        let vp = self.v1 + a * x;
        if vp > 0.0 && self.v2 > 0.0 {
            Some((transit_time(a, vp, self.len - x), true))
        } else if vp < 0.0 && self.v1 < 0.0 {
            Some((transit_time(a, vp, -x), false))
        } else {
            None
        }
    }

    fn advance(&self, x: f64, t: f64) -> f64 {
        let a = self.gradient();
        let vp = self.v1 + a * x;
        (x + displacement(a, vp, t)).clamp(0.0, self.len)
    }
}

fn axes(vf: &VelocityField, i: usize) -> [Axis; 3] {
    let b = vf.thickness[i];
    let n = vf.porosity;
    let f = &vf.faces[i];
    let ax = vf.dy * b * n;
    let ay = vf.dx * b * n;
    let az = vf.dx * vf.dy * n;
    [
        Axis {
            v1: f[X_MINUS] / ax,
            v2: f[X_PLUS] / ax,
            len: vf.dx,
        },
        Axis {
            v1: f[Y_MINUS] / ay,
            v2: f[Y_PLUS] / ay,
            len: vf.dy,
        },
        Axis {
            v1: f[Z_MINUS] / az,
            v2: f[Z_PLUS] / az,
            len: b,
        },
    ]
}

/// Pollock semi-analytic tracking from `start` until discharge, trapping,
/// or the time limit.
pub fn track_particle(
    vf: &VelocityField,
    start: &Position,
    opts: &TrackOptions,
) -> Result<TrackResult> {
    let c = start.cell;
    if c.layer >= vf.n_layers || c.row >= vf.n_rows || c.col >= vf.n_cols {
        return Err(Error::Tracking(format!("start cell {c} outside the grid")));
    }
    let mut i = vf.index(c.layer, c.row, c.col);
    if !vf.active[i] {
        return Err(Error::Tracking(format!("start cell {c} is inactive")));
    }
    if start.local.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(Error::Tracking(format!(
            "local coordinates {:?} outside [0, 1]",
            start.local
        )));
    }
    let mut path = Vec::new();
    if opts.record_path {
        path.push(*start);
    }
    if is_terminal(vf, i, opts.weak_sinks) {
        return Ok(TrackResult {
            time_years: 0.0,
            reason: ExitReason::StartInSink,
            end: *start,
            steps: 0,
            path,
        });
    }

    let max_time = opts.max_time_years * SECONDS_PER_YEAR;
    let mut cell = c;
    let mut ax = axes(vf, i);
    let mut pos = [
        start.local[0] * ax[0].len,
        start.local[1] * ax[1].len,
        start.local[2] * ax[2].len,
    ];
    let mut t = 0.0;
    let mut steps = 0;
    let frac = |pos: &[f64; 3], ax: &[Axis; 3]| {
        [pos[0] / ax[0].len, pos[1] / ax[1].len, pos[2] / ax[2].len]
    };

    loop {
        let mut best: Option<(f64, usize, bool)> = None;
        for (k, axis) in ax.iter().enumerate() {
            if let Some((dt, plus)) = axis.exit(pos[k]) {
                if best.is_none_or(|(b, _, _)| dt < b) {
                    best = Some((dt, k, plus));
                }
            }
        }
        let Some((dt, k, plus)) = best else {
            let reason = if vf.sink_out[i] > 0.0 {
                ExitReason::Sink
            } else {
                ExitReason::Stagnant
            };
            return Ok(TrackResult {
                time_years: t / SECONDS_PER_YEAR,
                reason,
                end: Position {
                    cell,
                    local: frac(&pos, &ax),
                },
                steps,
                path,
            });
        };
        if t + dt > max_time {
            let rest = max_time - t;
            for (kk, axis) in ax.iter().enumerate() {
                pos[kk] = axis.advance(pos[kk], rest);
            }
            return Ok(TrackResult {
                time_years: opts.max_time_years,
                reason: ExitReason::MaxTime,
                end: Position {
                    cell,
                    local: frac(&pos, &ax),
                },
                steps,
                path,
            });
        }
        for (kk, axis) in ax.iter().enumerate() {
            pos[kk] = if kk == k {
                if plus {
                    axis.len
                } else {
                    0.0
                }
            } else {
                axis.advance(pos[kk], dt)
            };
        }
        t += dt;
        steps += 1;

        let next = match (k, plus) {
            (0, true) if cell.col + 1 < vf.n_cols => {
                Some(Cell::new(cell.layer, cell.row, cell.col + 1))
            }
            (0, false) if cell.col > 0 => Some(Cell::new(cell.layer, cell.row, cell.col - 1)),
            (1, true) if cell.row + 1 < vf.n_rows => {
                Some(Cell::new(cell.layer, cell.row + 1, cell.col))
            }
            (1, false) if cell.row > 0 => Some(Cell::new(cell.layer, cell.row - 1, cell.col)),
            (2, true) if cell.layer > 0 => Some(Cell::new(cell.layer - 1, cell.row, cell.col)),
            (2, false) if cell.layer + 1 < vf.n_layers => {
                Some(Cell::new(cell.layer + 1, cell.row, cell.col))
            }
            _ => None,
        };
        let next = next.filter(|n| vf.active[vf.index(n.layer, n.row, n.col)]);
        let Some(next) = next else {
            return Ok(TrackResult {
                time_years: t / SECONDS_PER_YEAR,
                reason: ExitReason::Boundary,
                end: Position {
                    cell,
                    local: frac(&pos, &ax),
                },
                steps,
                path,
            });
        };

        let mut local = frac(&pos, &ax);
        // Enter through the opposite face; for z, an upward exit lands on
        // the bottom of the cell above.
        local[k] = if plus { 0.0 } else { 1.0 };
        cell = next;
        i = vf.index(cell.layer, cell.row, cell.col);
        ax = axes(vf, i);
        pos = [
            local[0] * ax[0].len,
            local[1] * ax[1].len,
            local[2] * ax[2].len,
        ];
        if opts.record_path {
            path.push(Position { cell, local });
        }
        if is_terminal(vf, i, opts.weak_sinks) {
            return Ok(TrackResult {
                time_years: t / SECONDS_PER_YEAR,
                reason: ExitReason::Sink,
                end: Position { cell, local },
                steps,
                path,
            });
        }
        if steps >= opts.max_steps {
            return Ok(TrackResult {
                time_years: t / SECONDS_PER_YEAR,
                reason: ExitReason::Stagnant,
                end: Position { cell, local },
                steps,
                path,
            });
        }
    }
}
