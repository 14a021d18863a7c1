use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::grid::{Cell, Grid};
use super::params::{ParameterVector, PriorBox};
use crate::error::{Error, Result};

/// Default drain conductance (m^2/s).
pub const DEFAULT_DRAIN_CONDUCTANCE: f64 = 100.0;

/// Per-cell zone label in {1, 2, 3}; 0 marks an inactive cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneMap {
    pub zone_id: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantHead {
    pub cell: Cell,
    pub head: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralHead {
    pub cell: Cell,
    pub head: f64,
    pub conductance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drain {
    pub cell: Cell,
    pub elevation: f64,
    pub conductance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditionSet {
    pub chd: Vec<ConstantHead>,
    pub ghb: Vec<GeneralHead>,
    pub drn: Vec<Drain>,
    /// Recharge from precipitation per column (m/s), row-major.
    pub rch_base: Vec<f64>,
    /// Columns that additionally receive the irrigation recharge rate.
    pub irrigated: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Well {
    pub id: String,
    pub cell: Cell,
    pub observed_head: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertTarget {
    /// Expected share of flooded top-layer cells, in percent.
    pub h_pas_star: f64,
    /// Standard deviation of that share, in percent.
    pub sigma_hpas: f64,
}

impl Default for ExpertTarget {
    fn default() -> Self {
        Self {
            h_pas_star: 1.0,
            sigma_hpas: 0.33,
        }
    }
}

/// Full forward-model definition. Immutable once validated.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: Grid,
    pub zones: ZoneMap,
    pub bcs: BoundaryConditionSet,
    pub wells: Vec<Well>,
    pub porosity: f64,
    pub expert: ExpertTarget,
    pub anisotropy: f64,
    pub prior: PriorBox,
}

/// Role of each cell in the flow system, derived from the boundary conditions.
#[derive(Debug, Clone)]
pub struct CellRoles {
    pub chd_head: Vec<Option<f64>>,
    /// (boundary head, conductance) per cell.
    pub ghb: Vec<Option<(f64, f64)>>,
    /// Drains attached to each cell as (elevation, conductance).
    pub drains: Vec<Vec<(f64, f64)>>,
    /// Recharge rate (m/s) applied to each cell, without the irrigation term.
    pub rch_base: Vec<f64>,
    /// Cells receiving the irrigation rate.
    pub irrigated: Vec<bool>,
}

impl Scenario {
    pub fn new(
        grid: Grid,
        zones: ZoneMap,
        bcs: BoundaryConditionSet,
        wells: Vec<Well>,
        porosity: f64,
        expert: ExpertTarget,
        anisotropy: f64,
        prior: PriorBox,
    ) -> Result<Self> {
        let s = Self {
            grid,
            zones,
            bcs,
            wells,
            porosity,
            expert,
            anisotropy,
            prior,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.grid;
        g.validate()?;
        if !(self.porosity > 0.0 && self.porosity <= 1.0) {
            return Err(Error::Validation(format!(
                "porosity in (0, 1] (got {})",
                self.porosity
            )));
        }
        if !(self.expert.sigma_hpas > 0.0) {
            return Err(Error::Validation("sigma_hpas > 0".into()));
        }
        if !(self.anisotropy > 0.0 && self.anisotropy.is_finite()) {
            return Err(Error::Validation("vertical anisotropy ratio > 0".into()));
        }
        self.prior.validate()?;

        if self.zones.zone_id.len() != g.n_cells() {
            return Err(Error::Validation("zone map size differs from grid".into()));
        }
        for i in 0..g.n_cells() {
            if g.active[i] && !(1..=3).contains(&self.zones.zone_id[i]) {
                return Err(Error::Validation(format!(
                    "every active cell has a zone in {{1,2,3}} (cell {})",
                    g.cell(i)
                )));
            }
        }
        if g.n_layers >= 2 {
            let bottom = g.n_layers - 1;
            for row in 0..g.n_rows {
                for col in 0..g.n_cols {
                    let i = g.index(Cell::new(bottom, row, col));
                    if g.active[i] && self.zones.zone_id[i] != 1 {
                        return Err(Error::Validation(format!(
                            "zone 1 covers the lowermost layer (cell {})",
                            g.cell(i)
                        )));
                    }
                }
            }
        }

        let check_cell = |c: Cell, what: &str| -> Result<usize> {
            if !g.contains(c) {
                return Err(Error::Validation(format!("{what} cell {c} outside grid")));
            }
            let i = g.index(c);
            if !g.active[i] {
                return Err(Error::Validation(format!("{what} cell {c} is inactive")));
            }
            Ok(i)
        };

        let mut chd_cells = HashSet::new();
        for b in &self.bcs.chd {
            let i = check_cell(b.cell, "chd")?;
            if !b.head.is_finite() {
                return Err(Error::Validation(format!(
                    "chd head at {} not finite",
                    b.cell
                )));
            }
            if !chd_cells.insert(i) {
                return Err(Error::Validation(format!("duplicate chd at {}", b.cell)));
            }
        }
        let mut ghb_cells = HashSet::new();
        for b in &self.bcs.ghb {
            let i = check_cell(b.cell, "ghb")?;
            if !(b.conductance > 0.0 && b.conductance.is_finite()) {
                return Err(Error::Validation(format!(
                    "conductance > 0 (ghb at {})",
                    b.cell
                )));
            }
            if chd_cells.contains(&i) {
                return Err(Error::Validation(format!(
                    "a cell carries at most one of chd/ghb ({})",
                    b.cell
                )));
            }
            if !ghb_cells.insert(i) {
                return Err(Error::Validation(format!("duplicate ghb at {}", b.cell)));
            }
        }
        for d in &self.bcs.drn {
            check_cell(d.cell, "drn")?;
            if !(d.conductance > 0.0 && d.conductance.is_finite()) {
                return Err(Error::Validation(format!(
                    "conductance > 0 (drn at {})",
                    d.cell
                )));
            }
            if !d.elevation.is_finite() {
                return Err(Error::Validation(format!(
                    "drain elevation at {} not finite",
                    d.cell
                )));
            }
        }
        let n_col = g.n_rows * g.n_cols;
        if self.bcs.rch_base.len() != n_col || self.bcs.irrigated.len() != n_col {
            return Err(Error::Validation(format!(
                "recharge arrays must have {n_col} column values"
            )));
        }
        if self.bcs.rch_base.iter().any(|r| !r.is_finite()) {
            return Err(Error::Validation("recharge must be finite".into()));
        }
        for w in &self.wells {
            let i = check_cell(w.cell, "well")?;
            if chd_cells.contains(&i) {
                return Err(Error::Validation(format!(
                    "well {} sits in a chd cell {}",
                    w.id, w.cell
                )));
            }
        }
        Ok(())
    }

    pub fn roles(&self) -> CellRoles {
        let g = &self.grid;
        let n = g.n_cells();
        let mut roles = CellRoles {
            chd_head: vec![None; n],
            ghb: vec![None; n],
            drains: vec![Vec::new(); n],
            rch_base: vec![0.0; n],
            irrigated: vec![false; n],
        };
        for b in &self.bcs.chd {
            roles.chd_head[g.index(b.cell)] = Some(b.head);
        }
        for b in &self.bcs.ghb {
            roles.ghb[g.index(b.cell)] = Some((b.head, b.conductance));
        }
        for d in &self.bcs.drn {
            roles.drains[g.index(d.cell)].push((d.elevation, d.conductance));
        }
        for row in 0..g.n_rows {
            for col in 0..g.n_cols {
                if let Some(i) = g.top_active(row, col) {
                    let c = row * g.n_cols + col;
                    roles.rch_base[i] = self.bcs.rch_base[c];
                    roles.irrigated[i] = self.bcs.irrigated[c];
                }
            }
        }
        roles
    }

    pub fn observed_heads(&self) -> Vec<(usize, f64)> {
        self.wells
            .iter()
            .enumerate()
            .filter_map(|(i, w)| w.observed_head.map(|h| (i, h)))
            .collect()
    }

    /// Scenario with every conductance-like quantity and recharge multiplied by `c`.
    ///
    /// Heads of the scaled problem equal those of the original when the
    /// parameter vector is scaled by the same factor.
    pub fn scaled_conductances(&self, c: f64) -> Self {
        let mut s = self.clone();
        for b in &mut s.bcs.ghb {
            b.conductance *= c;
        }
        for d in &mut s.bcs.drn {
            d.conductance *= c;
        }
        for r in &mut s.bcs.rch_base {
            *r *= c;
        }
        s
    }
}

/// Horizontal and vertical conductivity per cell (m/s); zero for inactive cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ConductivityField {
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
}

pub fn conductivity_field(scenario: &Scenario, p: &ParameterVector) -> ConductivityField {
    let g = &scenario.grid;
    let mut horizontal = vec![0.0; g.n_cells()];
    let mut vertical = vec![0.0; g.n_cells()];
    for i in 0..g.n_cells() {
        if g.active[i] {
            let k = p.zone_k(scenario.zones.zone_id[i]);
            horizontal[i] = k;
            vertical[i] = k * scenario.anisotropy;
        }
    }
    ConductivityField {
        horizontal,
        vertical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_layer() -> Scenario {
        let grid = Grid::uniform(2, 2, 3, 10.0, 10.0, 50.0, 10.0).unwrap();
        let zone_id = vec![3, 3, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1];
        Scenario::new(
            grid,
            ZoneMap { zone_id },
            BoundaryConditionSet {
                chd: vec![ConstantHead {
                    cell: Cell::new(0, 0, 0),
                    head: 45.0,
                }],
                ghb: vec![],
                drn: vec![],
                rch_base: vec![0.0; 6],
                irrigated: vec![false; 6],
            },
            vec![],
            0.2,
            ExpertTarget::default(),
            0.1,
            PriorBox::default(),
        )
        .unwrap()
    }

    #[test]
    fn conductivity_degenerate_zones() {
        let s = two_layer();
        let f = conductivity_field(&s, &ParameterVector::new(2e-4, 2e-4, 2e-4, 1e-8));
        assert!(f.horizontal.iter().all(|k| *k == 2e-4));
    }

    #[test]
    fn conductivity_base_case_zone3() {
        let s = two_layer();
        let f = conductivity_field(&s, &ParameterVector::base_case());
        assert_eq!(f.horizontal[0], 5.0e-3);
        assert_eq!(f.horizontal[2], 4.5e-4);
        assert_eq!(f.horizontal[6], 6.5e-5);
    }

    #[test]
    fn conductivity_anisotropy() {
        let s = two_layer();
        let f = conductivity_field(&s, &ParameterVector::base_case());
        for (h, v) in f.horizontal.iter().zip(&f.vertical) {
            assert!((v - 0.1 * h).abs() <= 1e-18);
        }
    }

    #[test]
    fn rejects_zone2_in_bottom_layer() {
        let mut s = two_layer();
        s.zones.zone_id[7] = 2;
        assert!(matches!(s.validate(), Err(Error::Validation(m)) if m.contains("lowermost")));
    }

    #[test]
    fn rejects_ghb_on_chd() {
        let mut s = two_layer();
        s.bcs.ghb.push(GeneralHead {
            cell: Cell::new(0, 0, 0),
            head: 1.0,
            conductance: 1.0,
        });
        assert!(matches!(s.validate(), Err(Error::Validation(m)) if m.contains("at most one")));
    }

    #[test]
    fn rejects_negative_drain_conductance() {
        let mut s = two_layer();
        s.bcs.drn.push(Drain {
            cell: Cell::new(0, 1, 1),
            elevation: 1.0,
            conductance: -1.0,
        });
        assert!(matches!(s.validate(), Err(Error::Validation(m)) if m.contains("conductance > 0")));
    }

    #[test]
    fn rejects_well_in_chd() {
        let mut s = two_layer();
        s.wells.push(Well {
            id: "w".into(),
            cell: Cell::new(0, 0, 0),
            observed_head: None,
        });
        assert!(s.validate().is_err());
    }

    #[test]
    fn recharge_lands_on_top_active_cell() {
        let mut s = two_layer();
        s.grid.active[1] = false;
        s.zones.zone_id[1] = 0;
        s.bcs.rch_base = vec![1.0; 6];
        let roles = s.roles();
        assert_eq!(roles.rch_base[1], 0.0);
        assert_eq!(roles.rch_base[7], 1.0);
        assert_eq!(roles.rch_base[6], 0.0);
    }
}
