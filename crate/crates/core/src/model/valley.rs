//! Stylized river-valley scenarios.
//!
//! Layout per row, west to east: zone-1 margin, zone-3 valley band centred on
//! a meandering river (fixed heads), zone-2 terrace, zone-1 margin. The
//! lowermost layer is zone 1 everywhere. General-head boundaries sit on the
//! west and east edge columns, springs (drains at land surface) along the
//! valley scarp, and a few rice-field ponding drains inside irrigated cells.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{Cell, Grid};
use super::params::{ParameterVector, PriorBox};
use super::scenario::{
    BoundaryConditionSet, ConstantHead, Drain, ExpertTarget, GeneralHead, Scenario, Well, ZoneMap,
    DEFAULT_DRAIN_CONDUCTANCE,
};
use crate::error::{Error, Result};
use crate::flow::{solve_steady_heads, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValleySpec {
    pub n_rows: usize,
    pub n_cols: usize,
    pub n_layers: usize,
    /// Square cell edge (m).
    pub cell_size: f64,
    /// Top-layer width fractions of zones 1, 2 and 3; must sum to 1.
    pub zone_fractions: [f64; 3],
    pub seed: u64,
    pub n_wells: usize,
    /// Total aquifer thickness below the river bed (m).
    pub aquifer_thickness: f64,
    /// River stage at the upstream (row 0) end (m).
    pub river_stage_top: f64,
    /// River stage drop per row (m).
    pub river_gradient: f64,
    /// Land-surface rise across the zone-2 terrace (m).
    pub terrace_height: f64,
    /// Additional land-surface rise per margin cell away from the valley (m).
    pub margin_slope: f64,
    /// Depth of the edge general-head stage below land surface (m).
    pub ghb_depth: f64,
    /// Edge general-head conductance (m^2/s).
    pub ghb_conductance: f64,
    /// Precipitation recharge applied to every column (m/s).
    pub rch_base: f64,
    /// Fraction of zone-2/zone-3 columns that are irrigated.
    pub irrigated_fraction: f64,
    /// Row band (fractions of n_rows) hosting the irrigation district.
    pub irrigated_rows: [f64; 2],
    /// Fraction of rows, counted from row 0, upstream of the river head.
    pub river_start: f64,
    pub n_ponds: usize,
    /// Ponding depth of rice-field drains above land surface (m).
    pub ponding_depth: f64,
    /// Vertical anisotropy Kv/Kh.
    pub anisotropy: f64,
    pub porosity: f64,
    /// Range of land-surface freeboard above the reference water table (m).
    pub freeboard: [f64; 2],
    /// Passes conforming the land surface to the base-case water table.
    pub conform_passes: usize,
}

impl Default for ValleySpec {
    fn default() -> Self {
        Self {
            n_rows: 20,
            n_cols: 20,
            n_layers: 3,
            cell_size: 250.0,
            zone_fractions: [0.4, 0.3, 0.3],
            seed: 7,
            n_wells: 22,
            aquifer_thickness: 40.0,
            river_stage_top: 120.0,
            river_gradient: 0.5,
            terrace_height: 20.0,
            margin_slope: 5.0,
            ghb_depth: 4.0,
            ghb_conductance: 0.05,
            rch_base: 3e-9,
            irrigated_fraction: 0.6,
            irrigated_rows: [0.5, 1.0],
            river_start: 0.5,
            n_ponds: 3,
            ponding_depth: 0.1,
            anisotropy: 1.0,
            porosity: 0.2,
            freeboard: [0.3, 4.0],
            conform_passes: 3,
        }
    }
}

impl ValleySpec {
    /// The shipped desk-scale fixture (30 x 30 x 2).
    pub fn valley_small() -> Self {
        Self {
            n_rows: 30,
            n_cols: 30,
            n_layers: 2,
            cell_size: 1000.0,
            seed: 20240607,
            n_wells: 36,
            ..Self::default()
        }
    }

    /// Per-row zone widths (zone 1 total, zone 2, zone 3).
    pub fn zone_widths(&self) -> (usize, usize, usize) {
        let w3 = (self.zone_fractions[2] * self.n_cols as f64).round() as usize;
        let w2 = (self.zone_fractions[1] * self.n_cols as f64).round() as usize;
        (self.n_cols.saturating_sub(w2 + w3), w2, w3)
    }

    fn validate(&self) -> Result<()> {
        if self.n_rows < 8 || self.n_cols < 8 {
            return Err(Error::InvalidInput(format!(
                "valley needs at least 8 rows and 8 columns, got {}x{}",
                self.n_rows, self.n_cols
            )));
        }
        if !(1..=3).contains(&self.n_layers) {
            return Err(Error::InvalidInput("n_layers must be 1, 2 or 3".into()));
        }
        let sum: f64 = self.zone_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.zone_fractions.iter().any(|f| *f <= 0.0) {
            return Err(Error::InvalidInput(
                "zone fractions must be positive and sum to 1".into(),
            ));
        }
        let (w1, w2, w3) = self.zone_widths();
        // Two edge columns plus a meander allowance must stay in zone 1.
        if w3 < 1 || w2 < 1 || w1 < 2 + 2 * MEANDER {
            return Err(Error::InvalidInput(format!(
                "{} columns cannot host the three zones (widths {w1}/{w2}/{w3})",
                self.n_cols
            )));
        }
        let positive = [
            self.cell_size,
            self.aquifer_thickness,
            self.ghb_conductance,
            self.anisotropy,
            self.porosity,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.porosity > 1.0 || self.rch_base < 0.0 {
            return Err(Error::InvalidInput(
                "valley spec has a non-positive physical constant".into(),
            ));
        }
        if !(self.freeboard[0] <= self.freeboard[1]) {
            return Err(Error::InvalidInput(
                "freeboard range must be ordered".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.irrigated_fraction) {
            return Err(Error::InvalidInput("irrigated_fraction in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Maximum lateral river excursion from the centre line (cells).
const MEANDER: usize = 1;

/// Fractional layer thicknesses, top to bottom.
fn layer_fractions(n_layers: usize) -> &'static [f64] {
    match n_layers {
        1 => &[1.0],
        2 => &[0.5, 0.5],
        _ => &[0.25, 0.25, 0.5],
    }
}

pub fn generate_synthetic_valley(spec: &ValleySpec) -> Result<Scenario> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (nr, nc, nl) = (spec.n_rows, spec.n_cols, spec.n_layers);
    let (w1, w2, w3) = spec.zone_widths();
    let plane = nr * nc;

    // Zone-3 band start per row, following a bounded random walk.
    let west = (w1 - 2 * MEANDER) / 2 + MEANDER;
    let mut offset: i64 = 0;
    let mut band_start = Vec::with_capacity(nr);
    for _ in 0..nr {
        let step: i64 = rng.random_range(-1..=1);
        offset = (offset + step).clamp(-(MEANDER as i64), MEANDER as i64);
        band_start.push((west as i64 + offset) as usize);
    }

    let mut zone_top = vec![1u8; plane];
    let mut river_col = vec![0usize; nr];
    for r in 0..nr {
        let s = band_start[r];
        for c in s..s + w3 {
            zone_top[r * nc + c] = 3;
        }
        for c in s + w3..s + w3 + w2 {
            zone_top[r * nc + c] = 2;
        }
        river_col[r] = s + w3 / 2;
    }

    // Land surface: river bed, terraced valley, rising margins.
    let mut surface = vec![0.0; plane];
    for r in 0..nr {
        let stage = spec.river_stage_top - spec.river_gradient * r as f64;
        let s = band_start[r];
        for c in 0..nc {
            let z = zone_top[r * nc + c];
            let rise = match z {
                3 => 1.0 + 0.25 * c.abs_diff(river_col[r]) as f64,
                2 => 1.0 + spec.terrace_height * (1.0 + (c - (s + w3)) as f64) / w2 as f64,
                _ => {
                    let dist = if c < s { s - c } else { c + 1 - (s + w3 + w2) };
                    let base = if c < s {
                        1.0 + 0.25 * (w3 / 2) as f64
                    } else {
                        1.0 + spec.terrace_height
                    };
                    base + spec.margin_slope * dist as f64
                }
            };
            surface[r * nc + c] = stage + rise;
        }
    }

    let grid = shape_grid(spec, &surface)?;

    let mut zone_id = vec![1u8; nl * plane];
    for l in 0..nl {
        if nl == 1 || l + 1 < nl {
            zone_id[l * plane..(l + 1) * plane].copy_from_slice(&zone_top);
        }
    }

    let first_river_row = (spec.river_start * nr as f64).round() as usize;
    let mut chd = Vec::with_capacity(nr);
    for (r, &c) in river_col.iter().enumerate().skip(first_river_row) {
        let stage = spec.river_stage_top - spec.river_gradient * r as f64;
        chd.push(ConstantHead {
            cell: Cell::new(0, r, c),
            head: stage,
        });
    }

    let mut ghb = Vec::new();
    for r in 0..nr {
        for c in [0, nc - 1] {
            for l in 0..nl {
                ghb.push(GeneralHead {
                    cell: Cell::new(l, r, c),
                    head: surface[r * nc + c] - spec.ghb_depth,
                    conductance: spec.ghb_conductance,
                });
            }
        }
    }

    // Springs on the scarp: first zone-2 cell east of the valley band, every other row.
    let mut drn = Vec::new();
    let mut is_drain = vec![false; plane];
    for r in (0..nr).step_by(2) {
        let c = band_start[r] + w3;
        drn.push(Drain {
            cell: Cell::new(0, r, c),
            elevation: surface[r * nc + c],
            conductance: DEFAULT_DRAIN_CONDUCTANCE,
        });
        is_drain[r * nc + c] = true;
    }

    let is_chd: Vec<bool> = {
        let mut v = vec![false; plane];
        for b in &chd {
            v[b.cell.row * nc + b.cell.col] = true;
        }
        v
    };

    let mut irrigated = vec![false; plane];
    let row_lo = (spec.irrigated_rows[0] * nr as f64).round() as usize;
    let row_hi = (spec.irrigated_rows[1] * nr as f64).round() as usize;
    for i in 0..plane {
        let in_district = (row_lo..row_hi).contains(&(i / nc));
        if in_district
            && zone_top[i] >= 2
            && !is_chd[i]
            && rng.random::<f64>() < spec.irrigated_fraction
        {
            irrigated[i] = true;
        }
    }
    let mut paddies: Vec<usize> = (0..plane)
        .filter(|&i| irrigated[i] && !is_drain[i])
        .collect();
    paddies.shuffle(&mut rng);
    for &i in paddies.iter().take(spec.n_ponds) {
        drn.push(Drain {
            cell: Cell::new(0, i / nc, i % nc),
            elevation: surface[i] + spec.ponding_depth,
            conductance: DEFAULT_DRAIN_CONDUCTANCE,
        });
        is_drain[i] = true;
    }

    // Wells: half in zone 1, the rest split 3:2 between zones 2 and 3.
    let n1 = spec.n_wells.div_ceil(2);
    let n2 = (spec.n_wells - n1) * 3 / 5;
    let n3 = spec.n_wells - n1 - n2;
    let mut wells = Vec::with_capacity(spec.n_wells);
    for (zone, want) in [(1u8, n1), (2, n2), (3, n3)] {
        let mut pool: Vec<usize> = (0..plane)
            .filter(|&i| {
                let c = i % nc;
                zone_top[i] == zone && !is_chd[i] && !is_drain[i] && c != 0 && c != nc - 1
            })
            .collect();
        if pool.len() < want {
            return Err(Error::InvalidInput(format!(
                "zone {zone} has room for {} wells, {want} requested",
                pool.len()
            )));
        }
        pool.shuffle(&mut rng);
        let mut chosen: Vec<usize> = pool[..want].to_vec();
        chosen.sort_unstable();
        for i in chosen {
            wells.push(Well {
                id: String::new(),
                cell: Cell::new(0, i / nc, i % nc),
                observed_head: None,
            });
        }
    }
    wells.sort_by_key(|w| (w.cell.row, w.cell.col));
    for (k, w) in wells.iter_mut().enumerate() {
        w.id = format!("W{:02}", k + 1);
    }

    let mut freeboard = vec![0.0; plane];
    for f in freeboard.iter_mut() {
        *f = rng.random_range(spec.freeboard[0]..=spec.freeboard[1]);
    }
    let drain_offsets: Vec<f64> = drn
        .iter()
        .map(|d| d.elevation - surface[d.cell.row * nc + d.cell.col])
        .collect();

    let mut scenario = Scenario::new(
        grid,
        ZoneMap { zone_id },
        BoundaryConditionSet {
            chd,
            ghb,
            drn,
            rch_base: vec![spec.rch_base; plane],
            irrigated,
        },
        wells,
        spec.porosity,
        ExpertTarget::default(),
        spec.anisotropy,
        PriorBox::default(),
    )?;

    // Let the land surface follow the reference water table plus freeboard.
    let reference = ParameterVector::base_case();
    let opts = SolverOptions::default();
    let surface0 = surface.clone();
    for _ in 0..spec.conform_passes {
        let hf = solve_steady_heads(&scenario, &reference, &opts)?;
        for i in 0..plane {
            if !is_chd[i] {
                surface[i] = surface0[i].max(hf.head[i] + freeboard[i]);
            }
        }
        scenario.grid = shape_grid(spec, &surface)?;
        for (d, off) in scenario.bcs.drn.iter_mut().zip(&drain_offsets) {
            d.elevation = surface[d.cell.row * nc + d.cell.col] + off;
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

/// Layer bottoms hang from the land surface down to a flat-bottomed base
/// following the river profile.
fn shape_grid(spec: &ValleySpec, surface: &[f64]) -> Result<Grid> {
    let (nr, nc, nl) = (spec.n_rows, spec.n_cols, spec.n_layers);
    let plane = nr * nc;
    let fractions = layer_fractions(nl);
    let mut bottoms = vec![0.0; nl * plane];
    for r in 0..nr {
        let stage = spec.river_stage_top - spec.river_gradient * r as f64;
        let base = stage - spec.aquifer_thickness;
        for c in 0..nc {
            let top = surface[r * nc + c];
            let total = top - base;
            let mut z = top;
            for (l, f) in fractions.iter().enumerate() {
                z -= f * total;
                bottoms[l * plane + r * nc + c] = z;
            }
            bottoms[(nl - 1) * plane + r * nc + c] = base;
        }
    }
    Grid::new(
        nl,
        nr,
        nc,
        spec.cell_size,
        spec.cell_size,
        surface.to_vec(),
        bottoms,
        vec![true; nl * plane],
    )
}
