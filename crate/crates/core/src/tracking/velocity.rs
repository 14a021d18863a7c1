use crate::error::{Error, Result};
use crate::flow::{cell_exchange, HeadField};
use crate::model::{ParameterVector, Scenario};

/// Face order within [`VelocityField::faces`].
pub const X_MINUS: usize = 0;
pub const X_PLUS: usize = 1;
pub const Y_MINUS: usize = 2;
pub const Y_PLUS: usize = 3;
pub const Z_MINUS: usize = 4;
pub const Z_PLUS: usize = 5;

/// Cell-face volumetric flows of a solved head field.
///
/// `x` runs along increasing column, `y` along increasing row and `z`
/// upwards (layer 0 is the top). Flows are signed along the positive axis,
/// so the shared face of two neighbours carries the same value in both
/// cells. Recharge enters through the top face; general-head, drain and
/// fixed-head exchanges are internal (distributed) sources and sinks.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub n_layers: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub dx: f64,
    pub dy: f64,
    pub porosity: f64,
    /// Flow thickness of each cell (m).
    pub thickness: Vec<f64>,
    pub active: Vec<bool>,
    /// Face flows (m^3/s) in the order `[x-, x+, y-, y+, z-, z+]`.
    pub faces: Vec<[f64; 6]>,
    /// Internal inflow from boundary features (m^3/s, >= 0).
    pub source_in: Vec<f64>,
    /// Internal outflow to boundary features (m^3/s, >= 0).
    pub sink_out: Vec<f64>,
    pub fixed_head: Vec<bool>,
    /// Cells whose internal sinks remove at least all of their inflow.
    pub strong_sink: Vec<bool>,
}

/// Relative slack when comparing a cell's sink outflow to its inflow.
const STRONG_SINK_TOL: f64 = 1e-9;

impl VelocityField {
    pub fn n_cells(&self) -> usize {
        self.active.len()
    }

    pub fn index(&self, layer: usize, row: usize, col: usize) -> usize {
        (layer * self.n_rows + row) * self.n_cols + col
    }

    /// Sum of face inflows and internal sources of cell `i` (m^3/s).
    pub fn inflow(&self, i: usize) -> f64 {
        let f = &self.faces[i];
        let mut q = self.source_in[i];
        for axis in 0..3 {
            q += f[2 * axis].max(0.0) + (-f[2 * axis + 1]).max(0.0);
        }
        q
    }

    /// Net face outflow minus net internal source, per cell (m^3/s).
    /// Zero for an exactly conservative field.
    pub fn divergence_residuals(&self) -> Vec<f64> {
        (0..self.n_cells())
            .map(|i| {
                if !self.active[i] {
                    return 0.0;
                }
                let f = &self.faces[i];
                let out =
                    (f[X_PLUS] - f[X_MINUS]) + (f[Y_PLUS] - f[Y_MINUS]) + (f[Z_PLUS] - f[Z_MINUS]);
                out - (self.source_in[i] - self.sink_out[i])
            })
            .collect()
    }

    /// Largest divergence residual relative to the largest face flow.
    pub fn max_relative_divergence(&self) -> f64 {
        let scale = self
            .faces
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0_f64, |m, q| m.max(q.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        self.divergence_residuals()
            .iter()
            .fold(0.0_f64, |m, r| m.max(r.abs()))
            / scale
    }

    /// The same field with every flow reversed (sources become sinks).
    pub fn reversed(&self) -> Self {
        let mut v = self.clone();
        for f in &mut v.faces {
            for q in f.iter_mut() {
                *q = -*q;
            }
        }
        std::mem::swap(&mut v.source_in, &mut v.sink_out);
        v.classify_sinks();
        v
    }

    /// Scales every flow by `c` (times scale by `1/c`).
    pub fn scaled(&self, c: f64) -> Self {
        let mut v = self.clone();
        for f in &mut v.faces {
            for q in f.iter_mut() {
                *q *= c;
            }
        }
        v.source_in.iter_mut().for_each(|q| *q *= c);
        v.sink_out.iter_mut().for_each(|q| *q *= c);
        v
    }

    fn classify_sinks(&mut self) {
        self.strong_sink = (0..self.n_cells())
            .map(|i| {
                self.active[i]
                    && self.sink_out[i] > 0.0
                    && self.sink_out[i] >= (1.0 - STRONG_SINK_TOL) * self.inflow(i)
            })
            .collect();
    }
}

/// Face flows from Darcy's law with the solver's own conductances.
pub fn build_velocity_field(
    hf: &HeadField,
    scenario: &Scenario,
    p: &ParameterVector,
) -> Result<VelocityField> {
    let porosity = scenario.porosity;
    if !(porosity > 0.0 && porosity <= 1.0) {
        return Err(Error::InvalidInput(format!(
            "porosity {porosity} outside (0, 1]"
        )));
    }
    let g = &scenario.grid;
    let n = g.n_cells();
    if let Some(i) = (0..n).find(|&i| g.active[i] && !hf.head[i].is_finite()) {
        return Err(Error::Tracking(format!(
            "head at cell {} is not finite",
            g.cell(i)
        )));
    }
    let ex = cell_exchange(hf, scenario, p);
    let c = &ex.conductances;
    let plane = g.n_rows * g.n_cols;
    let h = &hf.head;
    let mut faces = vec![[0.0; 6]; n];
    for i in 0..n {
        if !g.active[i] {
            continue;
        }
        if c.x[i] > 0.0 {
            let q = c.x[i] * (h[i] - h[i + 1]);
            faces[i][X_PLUS] = q;
            faces[i + 1][X_MINUS] = q;
        }
        if c.y[i] > 0.0 {
            let j = i + g.n_cols;
            let q = c.y[i] * (h[i] - h[j]);
            faces[i][Y_PLUS] = q;
            faces[j][Y_MINUS] = q;
        }
        if c.z[i] > 0.0 {
            // `i` lies above `j`; downward flow is negative along +z.
            let j = i + plane;
            let q = c.z[i] * (h[j] - h[i]);
            faces[i][Z_MINUS] = q;
            faces[j][Z_PLUS] = q;
        }
        if ex.recharge[i] != 0.0 {
            faces[i][Z_PLUS] -= ex.recharge[i];
        }
    }
    let roles_chd: Vec<bool> = {
        let mut v = vec![false; n];
        for b in &scenario.bcs.chd {
            v[g.index(b.cell)] = true;
        }
        v
    };
    let source_in: Vec<f64> = (0..n)
        .map(|i| ex.ghb[i].max(0.0) + ex.chd[i].max(0.0))
        .collect();
    let sink_out: Vec<f64> = (0..n)
        .map(|i| ex.drain[i] + (-ex.ghb[i]).max(0.0) + (-ex.chd[i]).max(0.0))
        .collect();
    let mut vf = VelocityField {
        n_layers: g.n_layers,
        n_rows: g.n_rows,
        n_cols: g.n_cols,
        dx: g.cell_dx,
        dy: g.cell_dy,
        porosity,
        thickness: hf.thickness.clone(),
        active: g.active.clone(),
        faces,
        source_in,
        sink_out,
        fixed_head: roles_chd,
        strong_sink: Vec::new(),
    };
    vf.classify_sinks();
    Ok(vf)
}
