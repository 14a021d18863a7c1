use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Initial simplex edge along each coordinate.
    pub initial_step: Vec<f64>,
    /// Stop when `f_worst - f_best < f_tol` ...
    pub f_tol: f64,
    /// ... or when every vertex is within `x_tol` (max norm) of the best.
    pub x_tol: f64,
    pub max_evals: usize,
    pub reflection: f64,
    pub expansion: f64,
    pub contraction: f64,
    pub shrink: f64,
}

impl NelderMeadOptions {
    pub fn new(initial_step: Vec<f64>) -> Self {
        Self {
            initial_step,
            f_tol: 1e-8,
            x_tol: 1e-6,
            max_evals: 500,
            reflection: 1.0,
            expansion: 2.0,
            contraction: 0.5,
            shrink: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    /// False when the evaluation budget ran out first.
    pub converged: bool,
}

/// Derivative-free simplex minimization.
///
/// Infinite objective values act as hard walls: such vertices are always
/// the worst and get replaced. The best point ever evaluated is returned.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if n == 0 || opts.initial_step.len() != n {
        return Err(Error::InvalidInput(
            "initial_step must match the dimension".into(),
        ));
    }
    if opts.max_evals < n + 1 {
        return Err(Error::InvalidInput(
            "max_evals must allow the initial simplex".into(),
        ));
    }
    let mut evals = 0;
    let mut best_x = x0.to_vec();
    let mut best_f = f64::INFINITY;
    let mut eval = |x: &[f64], evals: &mut usize, best_x: &mut Vec<f64>, best_f: &mut f64| {
        *evals += 1;
        let v = f(x);
        let v = if v.is_nan() { f64::INFINITY } else { v };
        if v < *best_f {
            *best_f = v;
            best_x.copy_from_slice(x);
        }
        v
    };

    let f0 = eval(x0, &mut evals, &mut best_x, &mut best_f);
    if !f0.is_finite() {
        return Err(Error::InvalidInput(
            "objective is not finite at the start point".into(),
        ));
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), f0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step[i];
        let mut v = eval(&x, &mut evals, &mut best_x, &mut best_f);
        if !v.is_finite() && evals < opts.max_evals {
            x[i] = x0[i] - opts.initial_step[i];
            v = eval(&x, &mut evals, &mut best_x, &mut best_f);
        }
        simplex.push((x, v));
    }

    let sort = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    let point = |c: &[f64], d: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(d).map(|(c, d)| c + t * (d - c)).collect()
    };

    let mut converged = false;
    loop {
        sort(&mut simplex);
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0_f64, f64::max);
        if spread < opts.f_tol || size < opts.x_tol {
            converged = true;
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, xi) in centroid.iter_mut().zip(x) {
                *c += xi / n as f64;
            }
        }
        let (worst, fw) = simplex[n].clone();
        let fb = simplex[0].1;
        let fs = simplex[n - 1].1;

        let xr = point(&centroid, &worst, -opts.reflection);
        let fr = eval(&xr, &mut evals, &mut best_x, &mut best_f);
        if fr < fb {
            let xe = point(&centroid, &xr, opts.expansion);
            let fe = eval(&xe, &mut evals, &mut best_x, &mut best_f);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < fs {
            simplex[n] = (xr, fr);
            continue;
        }
        let shrink_needed = if fr < fw {
            let xc = point(&centroid, &xr, opts.contraction);
            let fc = eval(&xc, &mut evals, &mut best_x, &mut best_f);
            if fc <= fr {
                simplex[n] = (xc, fc);
                false
            } else {
                true
            }
        } else {
            let xc = point(&centroid, &worst, opts.contraction);
            let fc = eval(&xc, &mut evals, &mut best_x, &mut best_f);
            if fc < fw {
                simplex[n] = (xc, fc);
                false
            } else {
                true
            }
        };
        if shrink_needed {
            let xb = simplex[0].0.clone();
            for v in simplex.iter_mut().skip(1) {
                let x = point(&xb, &v.0, opts.shrink);
                let fx = eval(&x, &mut evals, &mut best_x, &mut best_f);
                *v = (x, fx);
            }
        }
    }
    Ok(NelderMeadResult {
        x: best_x,
        f: best_f,
        evals,
        converged,
    })
}
