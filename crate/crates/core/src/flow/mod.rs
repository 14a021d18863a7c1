//! Steady-state finite-difference groundwater flow.
//!
//! Each active, non-fixed-head cell carries the balance
//! `sum_j C_ij (h_j - h_i) + Q_i = 0` over its six neighbours, where `Q_i`
//! collects recharge, general-head exchange `C (h_b - h)` and drain outflow
//! `C max(0, h - z_d)`. Drain activity is resolved by an active-set
//! iteration, which is a finite Newton method for this piecewise-linear
//! problem. Unconfined top layers are handled by damped Picard iteration on
//! the saturated thickness followed by the same active-set polish, so the
//! returned heads solve one linear system exactly.

mod banded;
mod budget;
mod conductance;

use serde::{Deserialize, Serialize};

pub use banded::{pcg, BandCholesky, BandMatrix};
pub use budget::{
    cell_exchange, compute_hpas, flux_budget, sample_wells, CellExchange, FluxBudget,
};
pub use conductance::{transmissive_thickness, Conductances};

use crate::error::{Error, Result};
use crate::model::{CellRoles, ParameterVector, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowMode {
    ConfinedLinear,
    UnconfinedPicard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Band Cholesky with one step of iterative refinement when needed.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub mode: FlowMode,
    pub head_change_tol: f64,
    pub max_picard_iters: usize,
    pub linear_residual_tol: f64,
    pub picard_damping: f64,
    pub min_saturated_fraction: f64,
    pub linear_solver: LinearSolver,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            mode: FlowMode::ConfinedLinear,
            head_change_tol: 1e-6,
            max_picard_iters: 200,
            linear_residual_tol: 1e-10,
            picard_damping: 0.5,
            min_saturated_fraction: 0.01,
            linear_solver: LinearSolver::Direct,
        }
    }
}

impl SolverOptions {
    pub fn unconfined() -> Self {
        Self {
            mode: FlowMode::UnconfinedPicard,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.head_change_tol > 0.0 && self.linear_residual_tol > 0.0) {
            return Err(Error::InvalidInput("solver tolerances must be > 0".into()));
        }
        if !(self.picard_damping > 0.0 && self.picard_damping <= 1.0) {
            return Err(Error::InvalidInput("picard_damping in (0, 1]".into()));
        }
        if !(self.min_saturated_fraction > 0.0 && self.min_saturated_fraction < 1.0) {
            return Err(Error::InvalidInput(
                "min_saturated_fraction in (0, 1)".into(),
            ));
        }
        if self.max_picard_iters == 0 {
            return Err(Error::InvalidInput("max_picard_iters >= 1".into()));
        }
        Ok(())
    }
}

/// Converged (or best-effort) heads with solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadField {
    /// Head per cell (m); NaN for inactive cells.
    pub head: Vec<f64>,
    pub converged: bool,
    /// Number of linear solves performed.
    pub iterations: usize,
    /// Relative residual `|A h - b| / |b|` of the final linear solve.
    pub residual_norm: f64,
    pub max_head_change: f64,
    /// Transmissive thickness used in the final assembly (m).
    pub thickness: Vec<f64>,
    /// Activity of each scenario drain in the final assembly.
    pub drain_active: Vec<bool>,
    pub mode: FlowMode,
}

struct Numbering {
    eq_of_cell: Vec<Option<usize>>,
    cell_of_eq: Vec<usize>,
    bandwidth: usize,
}

/// Orders unknowns by (row, col, layer) so the bandwidth is `n_cols * n_layers`.
fn number_unknowns(scenario: &Scenario, roles: &CellRoles) -> Numbering {
    let g = &scenario.grid;
    let mut eq_of_cell = vec![None; g.n_cells()];
    let mut cell_of_eq = Vec::new();
    for row in 0..g.n_rows {
        for col in 0..g.n_cols {
            for layer in 0..g.n_layers {
                let i = g.index(crate::model::Cell::new(layer, row, col));
                if g.active[i] && roles.chd_head[i].is_none() {
                    eq_of_cell[i] = Some(cell_of_eq.len());
                    cell_of_eq.push(i);
                }
            }
        }
    }
    let plane = g.n_rows * g.n_cols;
    let mut bandwidth = 0;
    for &i in &cell_of_eq {
        let c = g.cell(i);
        let ei = eq_of_cell[i].unwrap();
        let mut nbrs = Vec::with_capacity(3);
        if c.col + 1 < g.n_cols {
            nbrs.push(i + 1);
        }
        if c.row + 1 < g.n_rows {
            nbrs.push(i + g.n_cols);
        }
        if c.layer + 1 < g.n_layers {
            nbrs.push(i + plane);
        }
        for j in nbrs {
            if let Some(ej) = eq_of_cell[j] {
                bandwidth = bandwidth.max(ei.abs_diff(ej));
            }
        }
    }
    Numbering {
        eq_of_cell,
        cell_of_eq,
        bandwidth,
    }
}

struct FlowSystem<'a> {
    scenario: &'a Scenario,
    p: &'a ParameterVector,
    roles: CellRoles,
    num: Numbering,
    opts: &'a SolverOptions,
}

impl FlowSystem<'_> {
    fn assemble(&self, thickness: &[f64], drain_active: &[bool]) -> (BandMatrix, Vec<f64>) {
        let g = &self.scenario.grid;
        let n = self.num.cell_of_eq.len();
        let mut a = BandMatrix::zeros(n, self.num.bandwidth);
        let mut b = vec![0.0; n];
        let cond = Conductances::new(self.scenario, self.p, thickness);
        for (i, j, c) in cond.pairs(g) {
            match (self.num.eq_of_cell[i], self.num.eq_of_cell[j]) {
                (Some(ei), Some(ej)) => {
                    a.add(ei, ei, c);
                    a.add(ej, ej, c);
                    a.add(ei, ej, -c);
                }
                (Some(ei), None) => {
                    a.add(ei, ei, c);
                    b[ei] += c * self.roles.chd_head[j].unwrap();
                }
                (None, Some(ej)) => {
                    a.add(ej, ej, c);
                    b[ej] += c * self.roles.chd_head[i].unwrap();
                }
                (None, None) => {}
            }
        }
        let area = g.cell_area();
        for (e, &i) in self.num.cell_of_eq.iter().enumerate() {
            let rate = self.roles.rch_base[i]
                + if self.roles.irrigated[i] {
                    self.p.r_irrig
                } else {
                    0.0
                };
            b[e] += rate * area;
            if let Some((hb, c)) = self.roles.ghb[i] {
                a.add(e, e, c);
                b[e] += c * hb;
            }
        }
        for (d, on) in self.scenario.bcs.drn.iter().zip(drain_active) {
            if !*on {
                continue;
            }
            if let Some(e) = self.num.eq_of_cell[g.index(d.cell)] {
                a.add(e, e, d.conductance);
                b[e] += d.conductance * d.elevation;
            }
        }
        (a, b)
    }

    /// Solves the assembled system; returns the solution and relative residual.
    fn linear_solve(&self, a: BandMatrix, b: &[f64], warm: &[f64]) -> Result<(Vec<f64>, f64)> {
        let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        let residual = |x: &[f64]| -> f64 {
            if b_norm == 0.0 {
                return 0.0;
            }
            let mut ax = vec![0.0; x.len()];
            a.mul_vec(x, &mut ax);
            ax.iter()
                .zip(b)
                .map(|(u, v)| (u - v).powi(2))
                .sum::<f64>()
                .sqrt()
                / b_norm
        };
        match self.opts.linear_solver {
            LinearSolver::Direct => {
                let chol = a.clone().factorize().map_err(|row| {
                    let cell = self.scenario.grid.cell(self.num.cell_of_eq[row]);
                    Error::SingularSystem(format!(
                        "zero pivot at cell {cell}: a connected region has no fixed-head or general-head anchor"
                    ))
                })?;
                let mut x = b.to_vec();
                chol.solve_in_place(&mut x);
                let mut res = residual(&x);
                if res > self.opts.linear_residual_tol {
                    let mut r = vec![0.0; x.len()];
                    a.mul_vec(&x, &mut r);
                    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
                    chol.solve_in_place(&mut r);
                    x.iter_mut().zip(&r).for_each(|(xi, di)| *xi += di);
                    res = residual(&x);
                }
                Ok((x, res))
            }
            LinearSolver::Iterative => {
                let mut x = warm.to_vec();
                let max_iter = 20 * x.len().max(10);
                let (_, rel) = pcg(&a, b, &mut x, self.opts.linear_residual_tol, max_iter);
                if !rel.is_finite() {
                    return Err(Error::SingularSystem(
                        "conjugate gradients broke down".into(),
                    ));
                }
                Ok((x, rel))
            }
        }
    }

    fn drain_state(&self, head: &[f64]) -> Vec<bool> {
        let g = &self.scenario.grid;
        self.scenario
            .bcs
            .drn
            .iter()
            .map(|d| head[g.index(d.cell)] > d.elevation)
            .collect()
    }

    fn gather(&self, head: &[f64]) -> Vec<f64> {
        self.num.cell_of_eq.iter().map(|&i| head[i]).collect()
    }

    fn scatter(&self, x: &[f64], head: &mut [f64]) {
        for (e, &i) in self.num.cell_of_eq.iter().enumerate() {
            head[i] = x[e];
        }
    }
}

/// Solves steady heads for parameter vector `p`.
///
/// Non-convergence is not an error: the returned field carries
/// `converged == false` with its diagnostics. Structural problems (bad
/// parameters, no anchoring boundary anywhere, singular matrix) are errors.
pub fn solve_steady_heads(
    scenario: &Scenario,
    p: &ParameterVector,
    opts: &SolverOptions,
) -> Result<HeadField> {
    solve_inner(scenario, p, opts, None)
}

/// Like [`solve_steady_heads`], starting the drain active-set iteration
/// from `drain_hint` (e.g. the state of a nearby solve).
///
/// The active set is a fixed point, so with the direct solver the result
/// is bit-identical to a cold start; only the iteration count changes.
/// The hint is ignored for unconfined or iterative solves, and a hinted
/// run that fails to settle is repeated cold.
pub fn solve_steady_heads_hinted(
    scenario: &Scenario,
    p: &ParameterVector,
    opts: &SolverOptions,
    drain_hint: Option<&[bool]>,
) -> Result<HeadField> {
    let usable = opts.mode == FlowMode::ConfinedLinear
        && opts.linear_solver == LinearSolver::Direct
        && drain_hint.is_some_and(|h| h.len() == scenario.bcs.drn.len());
    if !usable {
        return solve_inner(scenario, p, opts, None);
    }
    let hf = solve_inner(scenario, p, opts, drain_hint)?;
    if hf.converged {
        Ok(hf)
    } else {
        solve_inner(scenario, p, opts, None)
    }
}

fn solve_inner(
    scenario: &Scenario,
    p: &ParameterVector,
    opts: &SolverOptions,
    drain_hint: Option<&[bool]>,
) -> Result<HeadField> {
    opts.validate()?;
    if !p.all_positive() {
        return Err(Error::InvalidInput(format!(
            "parameters must be positive: {p:?}"
        )));
    }
    let g = &scenario.grid;
    let roles = scenario.roles();
    let num = number_unknowns(scenario, &roles);
    let sys = FlowSystem {
        scenario,
        p,
        roles,
        num,
        opts,
    };

    let mut head = vec![f64::NAN; g.n_cells()];
    for i in 0..g.n_cells() {
        if g.active[i] {
            head[i] = sys.roles.chd_head[i].unwrap_or_else(|| g.top(i));
        }
    }
    let geometric = transmissive_thickness(g, None, opts.min_saturated_fraction);

    if sys.num.cell_of_eq.is_empty() {
        let drain_active = sys.drain_state(&head);
        return Ok(HeadField {
            head,
            converged: true,
            iterations: 0,
            residual_norm: 0.0,
            max_head_change: 0.0,
            thickness: geometric,
            drain_active,
            mode: opts.mode,
        });
    }
    if scenario.bcs.chd.is_empty() && scenario.bcs.ghb.is_empty() {
        return Err(Error::SingularSystem(
            "no constant-head or general-head boundary anywhere in the model".into(),
        ));
    }

    let mut iterations = 0;
    let mut residual_norm;
    let mut max_change = f64::INFINITY;

    if opts.mode == FlowMode::UnconfinedPicard {
        let mut settled = false;
        while iterations < opts.max_picard_iters {
            let thickness = transmissive_thickness(g, Some(&head), opts.min_saturated_fraction);
            let drains = sys.drain_state(&head);
            let (a, b) = sys.assemble(&thickness, &drains);
            let current = sys.gather(&head);
            let (x, _) = sys.linear_solve(a, &b, &current)?;
            iterations += 1;
            max_change = 0.0;
            let relaxed: Vec<f64> = x
                .iter()
                .zip(&current)
                .map(|(new, old)| {
                    let step = opts.picard_damping * (new - old);
                    max_change = max_change.max(step.abs());
                    old + step
                })
                .collect();
            sys.scatter(&relaxed, &mut head);
            if max_change < opts.head_change_tol {
                settled = true;
                break;
            }
        }
        if !settled {
            return Ok(HeadField {
                drain_active: sys.drain_state(&head),
                thickness: transmissive_thickness(g, Some(&head), opts.min_saturated_fraction),
                head,
                converged: false,
                iterations,
                residual_norm: f64::NAN,
                max_head_change: max_change,
                mode: opts.mode,
            });
        }
    }

    // Active-set polish with frozen thickness.
    let thickness = match opts.mode {
        FlowMode::ConfinedLinear => geometric,
        FlowMode::UnconfinedPicard => {
            transmissive_thickness(g, Some(&head), opts.min_saturated_fraction)
        }
    };
    let mut drains = match opts.mode {
        FlowMode::ConfinedLinear => match drain_hint {
            Some(h) => h.to_vec(),
            None => vec![false; scenario.bcs.drn.len()],
        },
        FlowMode::UnconfinedPicard => sys.drain_state(&head),
    };
    let budget = opts.max_picard_iters.max(iterations + 1);
    loop {
        let (a, b) = sys.assemble(&thickness, &drains);
        let current = sys.gather(&head);
        let (x, res) = sys.linear_solve(a, &b, &current)?;
        iterations += 1;
        residual_norm = res;
        max_change = x
            .iter()
            .zip(&current)
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        sys.scatter(&x, &mut head);
        let next = sys.drain_state(&head);
        if next == drains {
            break;
        }
        drains = next;
        if iterations >= budget {
            return Ok(HeadField {
                head,
                converged: false,
                iterations,
                residual_norm,
                max_head_change: max_change,
                thickness,
                drain_active: drains,
                mode: opts.mode,
            });
        }
    }
    let converged = residual_norm <= opts.linear_residual_tol
        && head.iter().zip(&g.active).all(|(h, a)| !a || h.is_finite());
    Ok(HeadField {
        head,
        converged,
        iterations,
        residual_norm,
        max_head_change: max_change,
        thickness,
        drain_active: drains,
        mode: opts.mode,
    })
}
