use crate::model::{conductivity_field, Grid, ParameterVector, Scenario};

/// Inter-cell conductances (m^2/s). Entry `i` couples cell `i` with its
/// +col (`x`), +row (`y`) and next-layer-down (`z`) neighbour; zero when that
/// neighbour is missing or inactive.
#[derive(Debug, Clone)]
pub struct Conductances {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

#[inline]
fn harmonic(a: f64, b: f64) -> f64 {
    if a <= 0.0 || b <= 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

impl Conductances {
    /// Horizontal terms use the harmonic mean of the two cell
    /// transmissivities `K * thickness`; vertical terms sum the two half-cell
    /// resistances using geometric thicknesses.
    pub fn new(scenario: &Scenario, p: &ParameterVector, thickness: &[f64]) -> Self {
        let g: &Grid = &scenario.grid;
        let k = conductivity_field(scenario, p);
        let n = g.n_cells();
        let plane = g.n_rows * g.n_cols;
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut z = vec![0.0; n];
        let area = g.cell_area();
        for i in 0..n {
            if !g.active[i] {
                continue;
            }
            let c = g.cell(i);
            let ti = k.horizontal[i] * thickness[i];
            if c.col + 1 < g.n_cols && g.active[i + 1] {
                let tj = k.horizontal[i + 1] * thickness[i + 1];
                x[i] = harmonic(ti, tj) * g.cell_dy / g.cell_dx;
            }
            if c.row + 1 < g.n_rows && g.active[i + g.n_cols] {
                let j = i + g.n_cols;
                let tj = k.horizontal[j] * thickness[j];
                y[i] = harmonic(ti, tj) * g.cell_dx / g.cell_dy;
            }
            if c.layer + 1 < g.n_layers && g.active[i + plane] {
                let j = i + plane;
                let r = 0.5 * g.thickness(i) / k.vertical[i] + 0.5 * g.thickness(j) / k.vertical[j];
                z[i] = area / r;
            }
        }
        Self { x, y, z }
    }

    /// Iterates over `(i, j, conductance)` for every coupled pair.
    pub fn pairs<'a>(&'a self, g: &'a Grid) -> impl Iterator<Item = (usize, usize, f64)> + 'a {
        let plane = g.n_rows * g.n_cols;
        (0..g.n_cells()).flat_map(move |i| {
            [
                (i + 1, self.x[i]),
                (i + g.n_cols, self.y[i]),
                (i + plane, self.z[i]),
            ]
            .into_iter()
            .filter(|(_, c)| *c > 0.0)
            .map(move |(j, c)| (i, j, c))
        })
    }
}

/// Transmissive thickness used for horizontal conductances.
///
/// Confined: geometric thickness everywhere. Unconfined: layer-0 cells use
/// the saturated thickness `min(h, top) - bottom`, clamped below at
/// `min_fraction * (top - bottom)`.
pub fn transmissive_thickness(g: &Grid, head: Option<&[f64]>, min_fraction: f64) -> Vec<f64> {
    let plane = g.n_rows * g.n_cols;
    (0..g.n_cells())
        .map(|i| {
            let full = g.thickness(i);
            match head {
                Some(h) if i < plane && g.active[i] => {
                    let sat = h[i].min(g.top(i)) - g.bottom(i);
                    sat.max(min_fraction * full)
                }
                _ => full,
            }
        })
        .collect()
}
