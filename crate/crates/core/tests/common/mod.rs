//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

use gwuq_core::flow::HeadField;
use gwuq_core::model::{
    BoundaryConditionSet, Cell, ConstantHead, Drain, ExpertTarget, GeneralHead, Grid, ParameterVector, PriorBox,
    Scenario, ZoneMap,
};
use gwuq_core::tracking::{
    ExitReason, Position, TrackOptions, VelocityField, WeakSinkRule, SECONDS_PER_YEAR, X_MINUS, X_PLUS, Y_MINUS,
    Y_PLUS, Z_MINUS, Z_PLUS,
};

pub fn params() -> ParameterVector {
    ParameterVector::new(1e-4, 3e-4, 2e-3, 4e-8)
}

fn bcs(n_cols_rows: usize) -> BoundaryConditionSet {
    BoundaryConditionSet {
        chd: vec![],
        ghb: vec![],
        drn: vec![],
        rch_base: vec![0.0; n_cols_rows],
        irrigated: vec![false; n_cols_rows],
    }
}

fn scenario(grid: Grid, zones: Vec<u8>, bcs: BoundaryConditionSet, anisotropy: f64) -> Scenario {
    Scenario::new(
        grid,
        ZoneMap { zone_id: zones },
        bcs,
        vec![],
        0.25,
        ExpertTarget::default(),
        anisotropy,
        PriorBox::default(),
    )
    .unwrap()
}

/// One-row strip with fixed heads at both ends and uniform recharge `rate`.
pub fn strip(n: usize, length: f64, h0: f64, rate: f64) -> Scenario {
    let dx = length / (n - 1) as f64;
    let grid = Grid::uniform(1, 1, n, dx, 100.0, 50.0, 50.0).unwrap();
    let mut b = bcs(n);
    b.chd.push(ConstantHead {
        cell: Cell::new(0, 0, 0),
        head: h0,
    });
    b.chd.push(ConstantHead {
        cell: Cell::new(0, 0, n - 1),
        head: h0,
    });
    b.rch_base = vec![rate; n];
    scenario(grid, vec![1; n], b, 1.0)
}

/// Five small confined problems covering zones, layers, anisotropy,
/// inactive cells, general heads, drains and irrigation.
pub fn manufactured() -> Vec<(&'static str, Scenario, ParameterVector)> {
    let mut out = Vec::new();

    // 1. Heterogeneous strip.
    {
        let n = 10;
        let grid = Grid::uniform(1, 1, n, 50.0, 80.0, 30.0, 30.0).unwrap();
        let mut b = bcs(n);
        b.chd.push(ConstantHead {
            cell: Cell::new(0, 0, 0),
            head: 12.0,
        });
        b.chd.push(ConstantHead {
            cell: Cell::new(0, 0, n - 1),
            head: 3.0,
        });
        b.rch_base = (0..n).map(|i| 1e-8 * (1 + i % 3) as f64).collect();
        let zones = (0..n).map(|i| [1, 2, 3][i % 3]).collect();
        out.push(("strip", scenario(grid, zones, b, 1.0), params()));
    }
    // 2. Plan view with a fixed-head west edge, general heads east, irrigation.
    {
        let (nr, nc) = (6, 7);
        let grid = Grid::uniform(1, nr, nc, 100.0, 120.0, 40.0, 40.0).unwrap();
        let mut b = bcs(nr * nc);
        for r in 0..nr {
            b.chd.push(ConstantHead {
                cell: Cell::new(0, r, 0),
                head: 20.0 - r as f64,
            });
            b.ghb.push(GeneralHead {
                cell: Cell::new(0, r, nc - 1),
                head: 25.0,
                conductance: 0.01 * (1 + r) as f64,
            });
        }
        b.rch_base = vec![5e-9; nr * nc];
        b.irrigated = (0..nr * nc).map(|i| i % 4 == 1).collect();
        let zones = (0..nr * nc).map(|i| if i % nc < 3 { 3 } else if i % nc < 5 { 2 } else { 1 }).collect();
        out.push(("plan", scenario(grid, zones, b, 1.0), params()));
    }
    // 3. Two layers, uneven bottoms, anisotropy.
    {
        let (nl, nr, nc) = (2, 5, 6);
        let plane = nr * nc;
        let surface: Vec<f64> = (0..plane).map(|i| 60.0 + (i % nc) as f64 * 2.0).collect();
        let mut bottoms = Vec::new();
        for k in 0..nl {
            bottoms.extend((0..plane).map(|i| 30.0 - 15.0 * k as f64 - (i / nc) as f64));
        }
        let grid = Grid::new(nl, nr, nc, 200.0, 150.0, surface, bottoms, vec![true; nl * plane]).unwrap();
        let mut b = bcs(plane);
        for c in 0..nc {
            b.chd.push(ConstantHead {
                cell: Cell::new(0, nr - 1, c),
                head: 35.0,
            });
        }
        for r in 0..nr - 1 {
            for k in 0..nl {
                b.ghb.push(GeneralHead {
                    cell: Cell::new(k, r, 0),
                    head: 45.0,
                    conductance: 0.02,
                });
            }
        }
        b.rch_base = vec![2e-8; plane];
        let zones = (0..nl * plane).map(|i| if i < plane { [2, 3][i % 2] } else { 1 }).collect();
        out.push(("layered", scenario(grid, zones, b, 0.1), params()));
    }
    // 4. Three layers, inactive cells, drains.
    {
        let (nl, nr, nc) = (3, 4, 5);
        let plane = nr * nc;
        let grid0 = Grid::uniform(nl, nr, nc, 100.0, 100.0, 30.0, 10.0).unwrap();
        let mut active = vec![true; nl * plane];
        active[0] = false; // corner of layer 0
        active[plane + 2 * nc + 2] = false; // hole in layer 1
        let grid = Grid::new(nl, nr, nc, 100.0, 100.0, grid0.surface_elev.clone(), grid0.layer_bottoms.clone(), active.clone())
            .unwrap();
        let mut b = bcs(plane);
        b.chd.push(ConstantHead {
            cell: Cell::new(2, 0, 4),
            head: 10.0,
        });
        b.chd.push(ConstantHead {
            cell: Cell::new(2, 3, 0),
            head: 14.0,
        });
        for (r, c, z) in [(1, 1, 11.5), (2, 3, 40.0), (3, 4, 11.0)] {
            b.drn.push(Drain {
                cell: Cell::new(0, r, c),
                elevation: z,
                conductance: 0.05,
            });
        }
        b.rch_base = vec![3e-8; plane];
        b.irrigated = vec![true; plane];
        let zones = (0..nl * plane)
            .map(|i| if !active[i] { 0 } else if i >= 2 * plane { 1 } else { [1, 2, 3][(i / plane + i % 2) % 3] })
            .collect();
        out.push(("drains", scenario(grid, zones, b, 0.5), params()));
    }
    // 5. No fixed heads at all, rectangular cells, inactive wedge.
    {
        let (nl, nr, nc) = (2, 7, 3);
        let plane = nr * nc;
        let grid0 = Grid::uniform(nl, nr, nc, 300.0, 75.0, 20.0, 10.0).unwrap();
        let mut active = vec![true; nl * plane];
        for r in 0..3 {
            for c in 0..(3 - r).min(nc) {
                if c < 2 {
                    active[r * nc + c] = false;
                }
            }
        }
        let grid = Grid::new(nl, nr, nc, 300.0, 75.0, grid0.surface_elev.clone(), grid0.layer_bottoms.clone(), active.clone())
            .unwrap();
        let mut b = bcs(plane);
        for k in 0..nl {
            b.ghb.push(GeneralHead {
                cell: Cell::new(k, nr - 1, 1),
                head: 8.0 + k as f64,
                conductance: 0.003,
            });
        }
        b.rch_base = (0..plane).map(|i| 1e-9 * (i % 5) as f64).collect();
        b.irrigated = (0..plane).map(|i| i % 2 == 0).collect();
        let zones = (0..nl * plane)
            .map(|i| if !active[i] { 0 } else if i >= plane { 1 } else { 1 + (i % 3) as u8 })
            .collect();
        out.push(("wedge", scenario(grid, zones, b, 2.0), params()));
    }
    out
}

/// Dense assembly and LU solve of the steady flow equations, written
/// independently from the solver, with drains on as given.
pub fn dense_heads(s: &Scenario, p: &ParameterVector, thickness: &[f64], drain_on: &[bool]) -> Vec<f64> {
    let g = &s.grid;
    let n = g.n_cells();
    let mut fixed = vec![None; n];
    for c in &s.bcs.chd {
        fixed[g.index(c.cell)] = Some(c.head);
    }
    let unknowns: Vec<usize> = (0..n).filter(|&i| g.active[i] && fixed[i].is_none()).collect();
    let mut eq = vec![usize::MAX; n];
    for (e, &i) in unknowns.iter().enumerate() {
        eq[i] = e;
    }
    let k = |i: usize| p.zone_k(s.zones.zone_id[i]);
    let m = unknowns.len();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for (e, &i) in unknowns.iter().enumerate() {
        let c = g.cell(i);
        let mut neighbours: Vec<(usize, f64)> = Vec::new();
        let on = |j: usize| g.active[j];
        let horiz = |j: usize, width: f64, dist: f64| {
            let (ti, tj) = (k(i) * thickness[i], k(j) * thickness[j]);
            2.0 * ti * tj / (ti + tj) * width / dist
        };
        if c.col > 0 && on(i - 1) {
            neighbours.push((i - 1, horiz(i - 1, g.cell_dy, g.cell_dx)));
        }
        if c.col + 1 < g.n_cols && on(i + 1) {
            neighbours.push((i + 1, horiz(i + 1, g.cell_dy, g.cell_dx)));
        }
        if c.row > 0 && on(i - g.n_cols) {
            neighbours.push((i - g.n_cols, horiz(i - g.n_cols, g.cell_dx, g.cell_dy)));
        }
        if c.row + 1 < g.n_rows && on(i + g.n_cols) {
            neighbours.push((i + g.n_cols, horiz(i + g.n_cols, g.cell_dx, g.cell_dy)));
        }
        let plane = g.n_rows * g.n_cols;
        let vert = |j: usize| {
            let kv = |q: usize| k(q) * s.anisotropy;
            g.cell_dx * g.cell_dy / (0.5 * g.thickness(i) / kv(i) + 0.5 * g.thickness(j) / kv(j))
        };
        if c.layer > 0 && on(i - plane) {
            neighbours.push((i - plane, vert(i - plane)));
        }
        if c.layer + 1 < g.n_layers && on(i + plane) {
            neighbours.push((i + plane, vert(i + plane)));
        }
        for (j, cond) in neighbours {
            a[(e, e)] += cond;
            match fixed[j] {
                Some(h) => b[e] += cond * h,
                None => a[(e, eq[j])] -= cond,
            }
        }
        // Recharge on the uppermost active cell of each column.
        let col = c.row * g.n_cols + c.col;
        if (0..c.layer).all(|l| !g.active[l * plane + col]) {
            let rate = s.bcs.rch_base[col] + if s.bcs.irrigated[col] { p.r_irrig } else { 0.0 };
            b[e] += rate * g.cell_dx * g.cell_dy;
        }
    }
    for gh in &s.bcs.ghb {
        let i = g.index(gh.cell);
        if eq[i] != usize::MAX {
            a[(eq[i], eq[i])] += gh.conductance;
            b[eq[i]] += gh.conductance * gh.head;
        }
    }
    for (d, on) in s.bcs.drn.iter().zip(drain_on) {
        let i = g.index(d.cell);
        if *on && eq[i] != usize::MAX {
            a[(eq[i], eq[i])] += d.conductance;
            b[eq[i]] += d.conductance * d.elevation;
        }
    }
    let x = a.lu().solve(&b).expect("oracle system is regular");
    let mut h = vec![f64::NAN; n];
    for i in 0..n {
        if let Some(v) = fixed[i] {
            if g.active[i] {
                h[i] = v;
            }
        }
    }
    for (e, &i) in unknowns.iter().enumerate() {
        h[i] = x[e];
    }
    h
}

/// Largest head difference over active cells, relative to the largest head.
pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().filter(|v| v.is_finite()).fold(0.0_f64, |m, v| m.max(v.abs()));
    a.iter()
        .zip(b)
        .filter(|(x, _)| x.is_finite())
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

pub fn check_drain_consistency(s: &Scenario, hf: &HeadField) {
    for (d, on) in s.bcs.drn.iter().zip(&hf.drain_active) {
        let h = hf.head[s.grid.index(d.cell)];
        assert_eq!(*on, h > d.elevation, "drain at {} inconsistent with head {h}", d.cell);
    }
}

// ---------------------------------------------------------------------
// Adaptive ODE particle tracking oracle.

/// Piecewise-linear velocity inside cell `i`, per axis, as (v at minus face, gradient, length).
fn cell_axes(vf: &VelocityField, i: usize) -> [(f64, f64, f64); 3] {
    let b = vf.thickness[i];
    let n = vf.porosity;
    let f = vf.faces[i];
    let areas = [vf.dy * b * n, vf.dx * b * n, vf.dx * vf.dy * n];
    let lens = [vf.dx, vf.dy, b];
    let pairs = [(X_MINUS, X_PLUS), (Y_MINUS, Y_PLUS), (Z_MINUS, Z_PLUS)];
    std::array::from_fn(|k| {
        let v1 = f[pairs[k].0] / areas[k];
        let v2 = f[pairs[k].1] / areas[k];
        (v1, (v2 - v1) / lens[k], lens[k])
    })
}

fn velocity(ax: &[(f64, f64, f64); 3], x: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|k| ax[k].0 + ax[k].1 * x[k])
}

/// One Dormand-Prince 5(4) step; returns (5th-order state, error estimate).
fn dopri_step(ax: &[(f64, f64, f64); 3], x: &[f64; 3], h: f64) -> ([f64; 3], f64) {
    const C: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] = [
        5179.0 / 57600.0,
        0.0,
        7571.0 / 16695.0,
        393.0 / 640.0,
        -92097.0 / 339200.0,
        187.0 / 2100.0,
        1.0 / 40.0,
    ];
    let mut k = [[0.0; 3]; 7];
    k[0] = velocity(ax, x);
    for s in 1..7 {
        let mut y = *x;
        for (j, kj) in k.iter().enumerate().take(s) {
            for d in 0..3 {
                y[d] += h * C[s - 1][j] * kj[d];
            }
        }
        k[s] = velocity(ax, &y);
    }
    let mut y5 = *x;
    let mut err = 0.0_f64;
    for d in 0..3 {
        let mut e = 0.0;
        for s in 0..7 {
            y5[d] += h * B5[s] * k[s][d];
            e += h * (B5[s] - B4[s]) * k[s][d];
        }
        err = err.max((e / ax[d].2).abs());
    }
    (y5, err)
}

pub struct OdeResult {
    pub time_years: f64,
    pub reason: ExitReason,
    pub cells: usize,
}

fn terminal(vf: &VelocityField, i: usize, rule: WeakSinkRule) -> bool {
    vf.fixed_head[i] || vf.strong_sink[i] || (rule == WeakSinkRule::Stop && vf.sink_out[i] > 0.0)
}

/// Tracks a particle by adaptive Runge-Kutta integration of the
/// interpolated velocity, locating face crossings by bisection.
pub fn track_ode(vf: &VelocityField, start: &Position, opts: &TrackOptions) -> OdeResult {
    let mut cell = start.cell;
    let mut i = vf.index(cell.layer, cell.row, cell.col);
    if terminal(vf, i, opts.weak_sinks) {
        return OdeResult {
            time_years: 0.0,
            reason: ExitReason::StartInSink,
            cells: 0,
        };
    }
    let max_t = opts.max_time_years * SECONDS_PER_YEAR;
    let mut ax = cell_axes(vf, i);
    let mut x: [f64; 3] = std::array::from_fn(|k| start.local[k] * ax[k].2);
    let mut t = 0.0;
    let mut cells = 0;
    let tol = 1e-11;
    loop {
        // Characteristic time scale of the cell.
        let speed = velocity(&ax, &x).iter().zip(&ax).map(|(v, a)| v.abs() / a.2).fold(0.0_f64, f64::max);
        let mut h = if speed > 0.0 { 1e-3 / speed } else { 1.0 };
        let mut t_cell = 0.0;
        let crossed = loop {
            if t + h > max_t {
                h = max_t - t;
            }
            let (y, err) = dopri_step(&ax, &x, h);
            if err > tol {
                h *= (0.9 * (tol / err).powf(0.2)).max(0.1);
                continue;
            }
            let outside = (0..3).find(|&k| y[k] < 0.0 || y[k] > ax[k].2);
            if let Some(_) = outside {
                // Bisect the step length to land on the first face.
                let (mut lo, mut hi) = (0.0, h);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    let (ym, _) = dopri_step(&ax, &x, mid);
                    if (0..3).any(|k| ym[k] < 0.0 || ym[k] > ax[k].2) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-15 * (t + hi) {
                        break;
                    }
                }
                let (ye, _) = dopri_step(&ax, &x, hi);
                let k = (0..3)
                    .max_by(|&a, &b| {
                        let over = |q: usize| (-ye[q]).max(ye[q] - ax[q].2);
                        over(a).total_cmp(&over(b))
                    })
                    .unwrap();
                let plus = ye[k] > ax[k].2;
                t += hi;
                x = ye;
                break Some((k, plus));
            }
            x = y;
            t += h;
            t_cell += h;
            if t >= max_t {
                return OdeResult {
                    time_years: opts.max_time_years,
                    reason: ExitReason::MaxTime,
                    cells,
                };
            }
            // No exit: the trajectory settles on a stagnation point.
            let v = velocity(&ax, &x);
            let still = v.iter().zip(&ax).all(|(vk, a)| vk.abs() * t_cell < 1e-9 * a.2);
            if still && t_cell > 0.0 {
                break None;
            }
            h = (h * (0.9 * (tol / err.max(1e-300)).powf(0.2)).min(5.0)).min(max_t);
        };
        let Some((k, plus)) = crossed else {
            let reason = if vf.sink_out[i] > 0.0 { ExitReason::Sink } else { ExitReason::Stagnant };
            return OdeResult {
                time_years: t / SECONDS_PER_YEAR,
                reason,
                cells,
            };
        };
        cells += 1;
        let next = match (k, plus) {
            (0, true) if cell.col + 1 < vf.n_cols => Some(Cell::new(cell.layer, cell.row, cell.col + 1)),
            (0, false) if cell.col > 0 => Some(Cell::new(cell.layer, cell.row, cell.col - 1)),
            (1, true) if cell.row + 1 < vf.n_rows => Some(Cell::new(cell.layer, cell.row + 1, cell.col)),
            (1, false) if cell.row > 0 => Some(Cell::new(cell.layer, cell.row - 1, cell.col)),
            (2, true) if cell.layer > 0 => Some(Cell::new(cell.layer - 1, cell.row, cell.col)),
            (2, false) if cell.layer + 1 < vf.n_layers => Some(Cell::new(cell.layer + 1, cell.row, cell.col)),
            _ => None,
        }
        .filter(|c| vf.active[vf.index(c.layer, c.row, c.col)]);
        let Some(next) = next else {
            return OdeResult {
                time_years: t / SECONDS_PER_YEAR,
                reason: ExitReason::Boundary,
                cells,
            };
        };
        let mut local: [f64; 3] = std::array::from_fn(|q| (x[q] / ax[q].2).clamp(0.0, 1.0));
        local[k] = if plus { 0.0 } else { 1.0 };
        cell = next;
        i = vf.index(cell.layer, cell.row, cell.col);
        ax = cell_axes(vf, i);
        x = std::array::from_fn(|q| local[q] * ax[q].2);
        if terminal(vf, i, opts.weak_sinks) {
            return OdeResult {
                time_years: t / SECONDS_PER_YEAR,
                reason: ExitReason::Sink,
                cells,
            };
        }
    }
}

// ---------------------------------------------------------------------
// Affine response model with a closed-form Gaussian posterior.

pub struct Affine {
    /// Head sensitivities, `nb x 4`.
    pub a: DMatrix<f64>,
    pub c: DVector<f64>,
    pub g: [f64; 4],
    pub d: f64,
    pub observed: Vec<f64>,
    pub target: f64,
    pub sigma_h: f64,
    pub sigma_hpas: f64,
    pub truth: ParameterVector,
}

impl Affine {
    /// `nb` wells; sensitivities of order one metre per parameter scale.
    pub fn new(nb: usize, seed: u64) -> Self {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let mut rng = gwuq_core::rng::stream_rng(seed, 0);
        let truth = params();
        let scale = truth.to_array();
        let a = DMatrix::from_fn(nb, 4, |_, j| rng.random_range(-2.0..2.0) / scale[j]);
        let c = DVector::from_fn(nb, |_, _| rng.random_range(20.0..60.0));
        let g: [f64; 4] = std::array::from_fn(|j| rng.random_range(-1.0..1.0) / scale[j]);
        let (sigma_h, sigma_hpas) = (0.5, 0.33);
        let mut s = Self {
            a,
            c,
            g,
            d: 2.0,
            observed: vec![],
            target: 0.0,
            sigma_h,
            sigma_hpas,
            truth,
        };
        let (h, t) = s.response(&truth);
        s.observed = h.iter().map(|v| v + sigma_h * rng.sample::<f64, _>(StandardNormal)).collect();
        s.target = t + sigma_hpas * rng.sample::<f64, _>(StandardNormal);
        s
    }

    pub fn response(&self, p: &ParameterVector) -> (Vec<f64>, f64) {
        let x = DVector::from_column_slice(&p.to_array());
        let h = &self.a * &x + &self.c;
        let t = (0..4).map(|j| self.g[j] * x[j]).sum::<f64>() + self.d;
        (h.iter().copied().collect(), t)
    }

    pub fn nll(&self, p: &[f64; 4]) -> f64 {
        let (h, t) = self.response(&ParameterVector::from_array(*p));
        let ss: f64 = h.iter().zip(&self.observed).map(|(m, o)| (m - o).powi(2)).sum();
        ss / (2.0 * self.sigma_h * self.sigma_h) + (t - self.target).powi(2) / (2.0 * self.sigma_hpas * self.sigma_hpas)
    }

    /// Weighted least squares via SVD in parameter-scaled units:
    /// returns (mean, covariance).
    pub fn closed_form(&self) -> ([f64; 4], nalgebra::Matrix4<f64>) {
        let scale = self.truth.to_array();
        let nb = self.a.nrows();
        let m = DMatrix::from_fn(nb + 1, 4, |i, j| {
            let v = if i < nb { self.a[(i, j)] / self.sigma_h } else { self.g[j] / self.sigma_hpas };
            v * scale[j]
        });
        let r = DVector::from_fn(nb + 1, |i, _| {
            if i < nb {
                (self.observed[i] - self.c[i]) / self.sigma_h
            } else {
                (self.target - self.d) / self.sigma_hpas
            }
        });
        let svd = m.clone().svd(true, true);
        let z = svd.solve(&r, 0.0).unwrap();
        let mean = std::array::from_fn(|j| z[j] * scale[j]);
        let v = svd.v_t.unwrap().transpose();
        let cov = nalgebra::Matrix4::from_fn(|r, c| {
            (0..4).map(|k| v[(r, k)] * v[(c, k)] / svd.singular_values[k].powi(2)).sum::<f64>() * scale[r] * scale[c]
        });
        (mean, cov)
    }
}

/// Largest entry difference relative to the largest entry of `reference`,
/// after scaling entry (r, c) by `1 / (s_r s_c)`.
pub fn scaled_matrix_diff(reference: &nalgebra::Matrix4<f64>, other: &nalgebra::Matrix4<f64>, s: &[f64; 4]) -> f64 {
    let f = |m: &nalgebra::Matrix4<f64>| nalgebra::Matrix4::from_fn(|r, c| m[(r, c)] / (s[r] * s[c]));
    let (a, b) = (f(reference), f(other));
    (a - b).amax() / a.amax()
}
