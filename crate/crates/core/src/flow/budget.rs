use serde::{Deserialize, Serialize};

use super::{Conductances, HeadField};
use crate::error::{Error, Result};
use crate::model::{ParameterVector, Scenario, Well};

/// Volumetric exchange of every cell with its boundary features (m^3/s),
/// evaluated with exactly the conductances and drain states of the solve.
#[derive(Debug, Clone)]
pub struct CellExchange {
    pub conductances: Conductances,
    /// Recharge entering through the top face (>= 0 for non-negative rates).
    pub recharge: Vec<f64>,
    /// General-head inflow `C (h_b - h)`.
    pub ghb: Vec<f64>,
    /// Drain outflow (>= 0).
    pub drain: Vec<f64>,
    /// Inflow supplied by a fixed-head cell to keep its own balance closed.
    pub chd: Vec<f64>,
}

pub fn cell_exchange(hf: &HeadField, scenario: &Scenario, p: &ParameterVector) -> CellExchange {
    let g = &scenario.grid;
    let n = g.n_cells();
    let roles = scenario.roles();
    let conductances = Conductances::new(scenario, p, &hf.thickness);
    let area = g.cell_area();
    let h = &hf.head;

    let mut recharge = vec![0.0; n];
    let mut ghb = vec![0.0; n];
    let mut drain = vec![0.0; n];
    for i in 0..n {
        if !g.active[i] {
            continue;
        }
        recharge[i] = (roles.rch_base[i] + if roles.irrigated[i] { p.r_irrig } else { 0.0 }) * area;
        if let Some((hb, c)) = roles.ghb[i] {
            ghb[i] = c * (hb - h[i]);
        }
    }
    for (d, on) in scenario.bcs.drn.iter().zip(&hf.drain_active) {
        let i = g.index(d.cell);
        if *on && g.active[i] {
            drain[i] += d.conductance * (h[i] - d.elevation);
        }
    }

    // Net lateral/vertical outflow per cell.
    let mut outflow = vec![0.0; n];
    for (i, j, c) in conductances.pairs(g) {
        let q = c * (h[i] - h[j]);
        outflow[i] += q;
        outflow[j] -= q;
    }
    let mut chd = vec![0.0; n];
    for i in 0..n {
        if g.active[i] && roles.chd_head[i].is_some() {
            chd[i] = outflow[i] - recharge[i] - ghb[i] + drain[i];
        }
    }
    CellExchange {
        conductances,
        recharge,
        ghb,
        drain,
        chd,
    }
}

/// Boundary-class totals (m^3/s). Positive `chd_net`/`ghb_net` mean inflow.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxBudget {
    pub chd_net: f64,
    pub ghb_net: f64,
    pub drn_out: f64,
    pub rch_in: f64,
    pub imbalance: f64,
}

impl FluxBudget {
    /// `|imbalance|` relative to the largest component.
    pub fn relative_imbalance(&self) -> f64 {
        let scale = self
            .rch_in
            .max(self.chd_net.abs())
            .max(self.drn_out)
            .max(self.ghb_net.abs());
        if scale == 0.0 {
            0.0
        } else {
            self.imbalance.abs() / scale
        }
    }
}

pub fn flux_budget(hf: &HeadField, scenario: &Scenario, p: &ParameterVector) -> FluxBudget {
    let ex = cell_exchange(hf, scenario, p);
    let chd_net: f64 = ex.chd.iter().sum();
    let ghb_net: f64 = ex.ghb.iter().sum();
    let drn_out: f64 = ex.drain.iter().sum();
    let rch_in: f64 = ex.recharge.iter().sum();
    FluxBudget {
        chd_net,
        ghb_net,
        drn_out,
        rch_in,
        imbalance: chd_net + ghb_net + rch_in - drn_out,
    }
}

/// Percentage of eligible top-layer cells whose head exceeds land surface.
///
/// Eligible cells are active, non-fixed-head cells of layer 0.
pub fn compute_hpas(hf: &HeadField, scenario: &Scenario) -> f64 {
    let g = &scenario.grid;
    let roles = scenario.roles();
    let mut eligible = 0usize;
    let mut flooded = 0usize;
    for row in 0..g.n_rows {
        for col in 0..g.n_cols {
            let i = row * g.n_cols + col;
            if !g.active[i] || roles.chd_head[i].is_some() {
                continue;
            }
            eligible += 1;
            if hf.head[i] > g.surface_elev[i] {
                flooded += 1;
            }
        }
    }
    if eligible == 0 {
        0.0
    } else {
        100.0 * flooded as f64 / eligible as f64
    }
}

/// Head of each well's cell, in well order.
pub fn sample_wells(hf: &HeadField, scenario: &Scenario, wells: &[Well]) -> Result<Vec<f64>> {
    let g = &scenario.grid;
    wells
        .iter()
        .map(|w| {
            if !g.contains(w.cell) || !g.active[g.index(w.cell)] {
                return Err(Error::InvalidInput(format!(
                    "well {} lies in inactive cell {}",
                    w.id, w.cell
                )));
            }
            Ok(hf.head[g.index(w.cell)])
        })
        .collect()
}
