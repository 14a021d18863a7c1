//! Scenario documents (TOML) and well-observation CSV files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{Cell, Grid};
use super::params::PriorBox;
use super::scenario::{
    BoundaryConditionSet, ConstantHead, Drain, ExpertTarget, GeneralHead, Scenario, Well, ZoneMap,
    DEFAULT_DRAIN_CONDUCTANCE,
};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    grid: GridDoc,
    zones: ZonesDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aquifer: Option<AquiferDoc>,
    #[serde(default)]
    chd: Vec<ConstantHead>,
    #[serde(default)]
    ghb: Vec<GeneralHead>,
    #[serde(default)]
    drn: Vec<DrainDoc>,
    recharge: RechargeDoc,
    #[serde(default)]
    wells: Vec<WellDoc>,
    #[serde(default)]
    expert: ExpertTarget,
    #[serde(default)]
    prior: PriorBox,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridDoc {
    n_layers: usize,
    n_rows: usize,
    n_cols: usize,
    cell_dx: f64,
    cell_dy: f64,
    /// [row][col]
    surface_elev: Vec<Vec<f64>>,
    /// [layer][row][col]
    layer_bottoms: Vec<Vec<Vec<f64>>>,
    /// [layer][row][col]; all active when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    active: Option<Vec<Vec<Vec<bool>>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ZonesDoc {
    /// [layer][row][col]; 0 for inactive cells.
    ids: Vec<Vec<Vec<u8>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AquiferDoc {
    #[serde(default = "default_porosity")]
    porosity: f64,
    #[serde(default = "default_anisotropy")]
    vertical_anisotropy: f64,
}

fn default_porosity() -> f64 {
    0.2
}

fn default_anisotropy() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DrainDoc {
    cell: Cell,
    elevation: f64,
    #[serde(default = "default_drain_conductance")]
    conductance: f64,
}

fn default_drain_conductance() -> f64 {
    DEFAULT_DRAIN_CONDUCTANCE
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RechargeDoc {
    /// [row][col] precipitation recharge (m/s).
    base: Vec<Vec<f64>>,
    /// (row, col) pairs receiving irrigation recharge.
    #[serde(default)]
    irrigated: Vec<[usize; 2]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WellDoc {
    id: String,
    cell: Cell,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    observed_head: Option<f64>,
}

fn flatten2(name: &str, v: &[Vec<f64>], rows: usize, cols: usize) -> Result<Vec<f64>> {
    if v.len() != rows || v.iter().any(|r| r.len() != cols) {
        return Err(Error::Validation(format!("{name} must be {rows}x{cols}")));
    }
    Ok(v.iter().flatten().copied().collect())
}

fn flatten3<T: Copy>(
    name: &str,
    v: &[Vec<Vec<T>>],
    l: usize,
    r: usize,
    c: usize,
) -> Result<Vec<T>> {
    if v.len() != l
        || v.iter()
            .any(|m| m.len() != r || m.iter().any(|row| row.len() != c))
    {
        return Err(Error::Validation(format!("{name} must be {l}x{r}x{c}")));
    }
    Ok(v.iter().flatten().flatten().copied().collect())
}

fn nest2<T: Copy>(v: &[T], cols: usize) -> Vec<Vec<T>> {
    v.chunks(cols).map(<[T]>::to_vec).collect()
}

fn nest3<T: Copy>(v: &[T], rows: usize, cols: usize) -> Vec<Vec<Vec<T>>> {
    v.chunks(rows * cols)
        .map(|layer| nest2(layer, cols))
        .collect()
}

impl ScenarioDoc {
    fn into_scenario(self) -> Result<Scenario> {
        let g = &self.grid;
        let (l, r, c) = (g.n_layers, g.n_rows, g.n_cols);
        let surface = flatten2("grid.surface_elev", &g.surface_elev, r, c)?;
        let bottoms = flatten3("grid.layer_bottoms", &g.layer_bottoms, l, r, c)?;
        let active = match &g.active {
            Some(a) => flatten3("grid.active", a, l, r, c)?,
            None => vec![true; l * r * c],
        };
        let grid = Grid::new(l, r, c, g.cell_dx, g.cell_dy, surface, bottoms, active)?;
        let zone_id = flatten3("zones.ids", &self.zones.ids, l, r, c)?;

        let rch_base = flatten2("recharge.base", &self.recharge.base, r, c)?;
        let mut irrigated = vec![false; r * c];
        for [row, col] in &self.recharge.irrigated {
            if *row >= r || *col >= c {
                return Err(Error::Validation(format!(
                    "irrigated column ({row}, {col}) outside grid"
                )));
            }
            irrigated[row * c + col] = true;
        }
        let aquifer = self.aquifer.unwrap_or(AquiferDoc {
            porosity: default_porosity(),
            vertical_anisotropy: default_anisotropy(),
        });
        Scenario::new(
            grid,
            ZoneMap { zone_id },
            BoundaryConditionSet {
                chd: self.chd,
                ghb: self.ghb,
                drn: self
                    .drn
                    .into_iter()
                    .map(|d| Drain {
                        cell: d.cell,
                        elevation: d.elevation,
                        conductance: d.conductance,
                    })
                    .collect(),
                rch_base,
                irrigated,
            },
            self.wells
                .into_iter()
                .map(|w| Well {
                    id: w.id,
                    cell: w.cell,
                    observed_head: w.observed_head,
                })
                .collect(),
            aquifer.porosity,
            self.expert,
            aquifer.vertical_anisotropy,
            self.prior,
        )
    }

    fn from_scenario(s: &Scenario) -> Self {
        let g = &s.grid;
        let (r, c) = (g.n_rows, g.n_cols);
        let irrigated = (0..r * c)
            .filter(|i| s.bcs.irrigated[*i])
            .map(|i| [i / c, i % c])
            .collect();
        Self {
            grid: GridDoc {
                n_layers: g.n_layers,
                n_rows: r,
                n_cols: c,
                cell_dx: g.cell_dx,
                cell_dy: g.cell_dy,
                surface_elev: nest2(&g.surface_elev, c),
                layer_bottoms: nest3(&g.layer_bottoms, r, c),
                active: if g.active.iter().all(|a| *a) {
                    None
                } else {
                    Some(nest3(&g.active, r, c))
                },
            },
            zones: ZonesDoc {
                ids: nest3(&s.zones.zone_id, r, c),
            },
            aquifer: Some(AquiferDoc {
                porosity: s.porosity,
                vertical_anisotropy: s.anisotropy,
            }),
            chd: s.bcs.chd.clone(),
            ghb: s.bcs.ghb.clone(),
            drn: s
                .bcs
                .drn
                .iter()
                .map(|d| DrainDoc {
                    cell: d.cell,
                    elevation: d.elevation,
                    conductance: d.conductance,
                })
                .collect(),
            recharge: RechargeDoc {
                base: nest2(&s.bcs.rch_base, c),
                irrigated,
            },
            wells: s
                .wells
                .iter()
                .map(|w| WellDoc {
                    id: w.id.clone(),
                    cell: w.cell,
                    observed_head: w.observed_head,
                })
                .collect(),
            expert: s.expert,
            prior: s.prior,
        }
    }
}

pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario> {
    let doc: ScenarioDoc = toml::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        message: e.to_string(),
    })?;
    doc.into_scenario()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path)
}

pub fn scenario_to_string(s: &Scenario) -> String {
    toml::to_string(&ScenarioDoc::from_scenario(s)).expect("scenario documents always serialize")
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scenario_to_string(s)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct WellRecord {
    well_id: String,
    layer: usize,
    row: usize,
    col: usize,
    observed_head_m: Option<f64>,
}

/// Reads `well_id,layer,row,col,observed_head_m` rows.
pub fn read_wells_csv(path: impl AsRef<Path>) -> Result<Vec<Well>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut wells = Vec::new();
    for rec in rdr.deserialize::<WellRecord>() {
        let rec = rec?;
        wells.push(Well {
            id: rec.well_id,
            cell: Cell::new(rec.layer, rec.row, rec.col),
            observed_head: rec.observed_head_m,
        });
    }
    Ok(wells)
}

pub fn write_wells_csv(wells: &[Well], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    for well in wells {
        w.serialize(WellRecord {
            well_id: well.id.clone(),
            layer: well.cell.layer,
            row: well.cell.row,
            col: well.cell.col,
            observed_head_m: well.observed_head,
        })?;
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}

/// Replaces the scenario's wells with the given list and revalidates.
pub fn with_wells(scenario: &Scenario, wells: Vec<Well>) -> Result<Scenario> {
    let mut s = scenario.clone();
    s.wells = wells;
    s.validate()?;
    Ok(s)
}
