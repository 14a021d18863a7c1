mod common;

use std::f64::consts::PI;

use gwuq_core::flow::{
    compute_hpas, flux_budget, solve_steady_heads, solve_steady_heads_hinted, FlowMode, LinearSolver, SolverOptions,
};
use gwuq_core::model::{generate_synthetic_valley, Cell, GeneralHead, ParameterVector, ValleySpec};
use gwuq_core::Error;

use common::*;

#[test]
fn manufactured_problems_match_dense_oracle() {
    for (name, s, p) in manufactured() {
        for solver in [LinearSolver::Direct, LinearSolver::Iterative] {
            let opts = SolverOptions {
                linear_solver: solver,
                linear_residual_tol: if solver == LinearSolver::Direct { 1e-10 } else { 1e-13 },
                ..SolverOptions::default()
            };
            let hf = solve_steady_heads(&s, &p, &opts).unwrap();
            assert!(hf.converged, "{name} {solver:?}");
            check_drain_consistency(&s, &hf);
            let oracle = dense_heads(&s, &p, &hf.thickness, &hf.drain_active);
            let err = max_rel_diff(&oracle, &hf.head);
            let tol = if solver == LinearSolver::Direct { 1e-10 } else { 1e-9 };
            assert!(err < tol, "{name} {solver:?}: {err:e}");
            for (i, h) in hf.head.iter().enumerate() {
                assert_eq!(s.grid.active[i], h.is_finite(), "{name}: cell {i}");
            }
            let bud = flux_budget(&hf, &s, &p);
            assert!(bud.relative_imbalance() < 1e-6, "{name}: {bud:?}");
        }
    }
}

#[test]
fn drains_switch_on_only_above_elevation() {
    let (_, s, p) = manufactured().into_iter().find(|(n, ..)| *n == "drains").unwrap();
    let hf = solve_steady_heads(&s, &p, &SolverOptions::default()).unwrap();
    // The 40 m drain sits above the water table, the other two below it.
    assert_eq!(hf.drain_active, vec![true, false, true]);
    let bud = flux_budget(&hf, &s, &p);
    assert!(bud.drn_out > 0.0);
}

#[test]
fn parabola_is_reproduced_at_nodes() {
    let (n, length, h0, rate) = (21, 10_000.0, 10.0, 1e-8);
    let s = strip(n, length, h0, rate);
    let p = ParameterVector::base_case();
    let hf = solve_steady_heads(&s, &p, &SolverOptions::default()).unwrap();
    let t = p.k_zone1 * 50.0;
    let dx = length / (n - 1) as f64;
    let exact: Vec<f64> = (0..n)
        .map(|i| {
            let x = i as f64 * dx;
            h0 + rate / (2.0 * t) * x * (length - x)
        })
        .collect();
    assert!(max_rel_diff(&exact, &hf.head) < 1e-10);
    // Symmetric about the divide.
    for i in 0..n {
        assert!((hf.head[i] - hf.head[n - 1 - i]).abs() < 1e-9 * hf.head[n / 2]);
    }
}

/// Max nodal error for recharge `r0 sin(pi x / L)` on `n` nodes.
fn sine_error(n: usize) -> f64 {
    let (length, h0, r0) = (10_000.0, 10.0, 1e-8);
    let mut s = strip(n, length, h0, 0.0);
    let dx = length / (n - 1) as f64;
    s.bcs.rch_base = (0..n).map(|i| r0 * (PI * i as f64 * dx / length).sin()).collect();
    let p = ParameterVector::base_case();
    let hf = solve_steady_heads(&s, &p, &SolverOptions::default()).unwrap();
    let t = p.k_zone1 * 50.0;
    (0..n)
        .map(|i| {
            let x = i as f64 * dx;
            let exact = h0 + r0 * length * length / (PI * PI * t) * (PI * x / length).sin();
            (hf.head[i] - exact).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn sine_recharge_converges_at_second_order() {
    let errs: Vec<f64> = [11, 21, 41, 81].into_iter().map(sine_error).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() < 0.1, "observed order {order} from {errs:?}");
    }
}

#[test]
fn heads_rise_with_recharge() {
    let s = generate_synthetic_valley(&ValleySpec::valley_small()).unwrap();
    let opts = SolverOptions::default();
    let base = ParameterVector::base_case();
    let h0 = solve_steady_heads(&s, &base, &opts).unwrap();
    let mut wetter = base;
    wetter.r_irrig *= 2.0;
    let h1 = solve_steady_heads(&s, &wetter, &opts).unwrap();
    for i in 0..h0.head.len() {
        if h0.head[i].is_finite() {
            assert!(h1.head[i] >= h0.head[i] - 1e-9);
        }
    }
    assert!(compute_hpas(&h1, &s) >= compute_hpas(&h0, &s));
    assert!(flux_budget(&h0, &s, &base).relative_imbalance() < 1e-6);
    assert!(flux_budget(&h1, &s, &wetter).relative_imbalance() < 1e-6);
}

#[test]
fn heads_invariant_under_common_scaling() {
    let s = generate_synthetic_valley(&ValleySpec::valley_small()).unwrap();
    let opts = SolverOptions::default();
    let p = ParameterVector::base_case();
    let h0 = solve_steady_heads(&s, &p, &opts).unwrap();
    let c = 3.7;
    let pc = ParameterVector::from_array(p.to_array().map(|v| v * c));
    let h1 = solve_steady_heads(&s.scaled_conductances(c), &pc, &opts).unwrap();
    assert_eq!(h0.drain_active, h1.drain_active);
    assert!(max_rel_diff(&h0.head, &h1.head) < 1e-10);
}

#[test]
fn drain_hint_gives_identical_heads() {
    let s = generate_synthetic_valley(&ValleySpec::valley_small()).unwrap();
    let opts = SolverOptions::default();
    let p = ParameterVector::base_case();
    let cold = solve_steady_heads(&s, &p, &opts).unwrap();
    let all_on = vec![true; s.bcs.drn.len()];
    let all_off = vec![false; s.bcs.drn.len()];
    for hint in [&cold.drain_active, &all_on, &all_off] {
        let warm = solve_steady_heads_hinted(&s, &p, &opts, Some(hint)).unwrap();
        assert_eq!(warm.drain_active, cold.drain_active);
        let a: Vec<u64> = warm.head.iter().map(|h| h.to_bits()).collect();
        let b: Vec<u64> = cold.head.iter().map(|h| h.to_bits()).collect();
        assert_eq!(a, b);
    }
}

#[test]
fn unconfined_mode_converges_and_conserves_mass() {
    let s = generate_synthetic_valley(&ValleySpec::valley_small()).unwrap();
    let p = ParameterVector::base_case();
    let hf = solve_steady_heads(&s, &p, &SolverOptions::unconfined()).unwrap();
    assert!(hf.converged);
    assert_eq!(hf.mode, FlowMode::UnconfinedPicard);
    assert!(flux_budget(&hf, &s, &p).relative_imbalance() < 1e-6);
    // Saturated thickness never exceeds the cell thickness.
    for i in 0..hf.thickness.len() {
        if s.grid.active[i] {
            assert!(hf.thickness[i] <= s.grid.thickness(i) * (1.0 + 1e-12));
            assert!(hf.thickness[i] > 0.0);
        }
    }
    // The linear system at the final thickness reproduces the heads.
    let oracle = dense_heads(&s, &p, &hf.thickness, &hf.drain_active);
    assert!(max_rel_diff(&oracle, &hf.head) < 1e-5);
}

#[test]
fn floating_model_is_singular() {
    let mut s = strip(5, 400.0, 1.0, 1e-8);
    s.bcs.chd.clear();
    let err = solve_steady_heads(&s, &ParameterVector::base_case(), &SolverOptions::default()).unwrap_err();
    assert!(matches!(err, Error::SingularSystem(_)), "{err}");
}

#[test]
fn invalid_parameters_are_rejected() {
    let s = strip(5, 400.0, 1.0, 1e-8);
    let bad = ParameterVector::new(-1e-4, 3e-4, 2e-3, 4e-8);
    assert!(solve_steady_heads(&s, &bad, &SolverOptions::default()).is_err());
}

#[test]
fn general_head_acts_like_fixed_head_when_stiff() {
    let mut s = strip(9, 800.0, 5.0, 1e-8);
    s.bcs.chd.pop();
    s.bcs.ghb.push(GeneralHead {
        cell: Cell::new(0, 0, 8),
        head: 5.0,
        conductance: 1e9,
    });
    let p = ParameterVector::base_case();
    let a = solve_steady_heads(&s, &p, &SolverOptions::default()).unwrap();
    let b = solve_steady_heads(&strip(9, 800.0, 5.0, 1e-8), &p, &SolverOptions::default()).unwrap();
    assert!(max_rel_diff(&b.head, &a.head) < 1e-9);
}
