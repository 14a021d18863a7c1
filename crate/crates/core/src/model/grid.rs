use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Zero-based (layer, row, col) address of a grid cell. Layer 0 is the top.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 3]", into = "[usize; 3]")]
pub struct Cell {
    pub layer: usize,
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub const fn new(layer: usize, row: usize, col: usize) -> Self {
        Self { layer, row, col }
    }
}

impl From<[usize; 3]> for Cell {
    fn from(v: [usize; 3]) -> Self {
        Cell::new(v[0], v[1], v[2])
    }
}

impl From<Cell> for [usize; 3] {
    fn from(c: Cell) -> Self {
        [c.layer, c.row, c.col]
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.layer, self.row, self.col)
    }
}

/// Structured block-centred grid.
///
/// Flat cell indices are layer-major: `(layer * n_rows + row) * n_cols + col`.
/// Column-wise quantities (surface elevation, recharge) are indexed
/// `row * n_cols + col`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub n_layers: usize,
    pub n_rows: usize,
    pub n_cols: usize,
    pub cell_dx: f64,
    pub cell_dy: f64,
    pub surface_elev: Vec<f64>,
    pub layer_bottoms: Vec<f64>,
    pub active: Vec<bool>,
}

impl Grid {
    pub fn new(
        n_layers: usize,
        n_rows: usize,
        n_cols: usize,
        cell_dx: f64,
        cell_dy: f64,
        surface_elev: Vec<f64>,
        layer_bottoms: Vec<f64>,
        active: Vec<bool>,
    ) -> Result<Self> {
        let grid = Self {
            n_layers,
            n_rows,
            n_cols,
            cell_dx,
            cell_dy,
            surface_elev,
            layer_bottoms,
            active,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Flat grid with uniform layer thicknesses below a flat surface, all cells active.
    pub fn uniform(
        n_layers: usize,
        n_rows: usize,
        n_cols: usize,
        cell_dx: f64,
        cell_dy: f64,
        surface: f64,
        layer_thickness: f64,
    ) -> Result<Self> {
        let n_cols_rows = n_rows * n_cols;
        let mut bottoms = Vec::with_capacity(n_layers * n_cols_rows);
        for k in 0..n_layers {
            let b = surface - layer_thickness * (k + 1) as f64;
            bottoms.extend(std::iter::repeat_n(b, n_cols_rows));
        }
        Self::new(
            n_layers,
            n_rows,
            n_cols,
            cell_dx,
            cell_dy,
            vec![surface; n_cols_rows],
            bottoms,
            vec![true; n_layers * n_cols_rows],
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_rows == 0 || self.n_cols == 0 {
            return Err(Error::Validation("grid dimensions must be >= 1".into()));
        }
        if !(self.cell_dx > 0.0 && self.cell_dy > 0.0) {
            return Err(Error::Validation("cell_dx, cell_dy > 0".into()));
        }
        let n_col = self.n_rows * self.n_cols;
        if self.surface_elev.len() != n_col {
            return Err(Error::Validation(format!(
                "surface_elev has {} values, expected {n_col}",
                self.surface_elev.len()
            )));
        }
        if self.layer_bottoms.len() != self.n_cells() || self.active.len() != self.n_cells() {
            return Err(Error::Validation(format!(
                "layer_bottoms/active must have {} values",
                self.n_cells()
            )));
        }
        if self
            .surface_elev
            .iter()
            .chain(&self.layer_bottoms)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Validation("elevations must be finite".into()));
        }
        for row in 0..self.n_rows {
            for col in 0..self.n_cols {
                for k in 1..self.n_layers {
                    let upper = self.layer_bottoms[self.index(Cell::new(k - 1, row, col))];
                    let lower = self.layer_bottoms[self.index(Cell::new(k, row, col))];
                    if lower >= upper {
                        return Err(Error::Validation(format!(
                            "layer_bottoms strictly decrease with layer (column {row},{col}, layer {k})"
                        )));
                    }
                }
                let col_active =
                    (0..self.n_layers).any(|k| self.active[self.index(Cell::new(k, row, col))]);
                if col_active
                    && self.surface_elev[row * self.n_cols + col]
                        <= self.layer_bottoms[self.index(Cell::new(0, row, col))]
                {
                    return Err(Error::Validation(format!(
                        "surface_elev > layer_bottoms[0] (column {row},{col})"
                    )));
                }
            }
        }
        Ok(())
    }

    #[inline]
    pub fn n_cells(&self) -> usize {
        self.n_layers * self.n_rows * self.n_cols
    }

    #[inline]
    pub fn index(&self, c: Cell) -> usize {
        (c.layer * self.n_rows + c.row) * self.n_cols + c.col
    }

    #[inline]
    pub fn cell(&self, index: usize) -> Cell {
        let col = index % self.n_cols;
        let rest = index / self.n_cols;
        Cell::new(rest / self.n_rows, rest % self.n_rows, col)
    }

    #[inline]
    pub fn contains(&self, c: Cell) -> bool {
        c.layer < self.n_layers && c.row < self.n_rows && c.col < self.n_cols
    }

    #[inline]
    pub fn column(&self, index: usize) -> usize {
        index % (self.n_rows * self.n_cols)
    }

    #[inline]
    pub fn is_active(&self, index: usize) -> bool {
        self.active[index]
    }

    pub fn top(&self, index: usize) -> f64 {
        let c = self.cell(index);
        if c.layer == 0 {
            self.surface_elev[self.column(index)]
        } else {
            self.layer_bottoms[index - self.n_rows * self.n_cols]
        }
    }

    #[inline]
    pub fn bottom(&self, index: usize) -> f64 {
        self.layer_bottoms[index]
    }

    #[inline]
    pub fn thickness(&self, index: usize) -> f64 {
        self.top(index) - self.bottom(index)
    }

    #[inline]
    pub fn cell_area(&self) -> f64 {
        self.cell_dx * self.cell_dy
    }

    /// Index of the uppermost active cell in the column, if any.
    pub fn top_active(&self, row: usize, col: usize) -> Option<usize> {
        (0..self.n_layers)
            .map(|k| self.index(Cell::new(k, row, col)))
            .find(|&i| self.active[i])
    }

    pub fn n_active(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }
}
