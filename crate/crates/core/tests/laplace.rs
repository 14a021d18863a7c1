mod common;

use std::sync::Arc;

use nalgebra::{DMatrix, Matrix4};

use gwuq_core::flow::SolverOptions;
use gwuq_core::inversion::ForwardModel;
use gwuq_core::laplace::{
    fd_hessian, gauss_newton_hessian, gauss_newton_step, jacobian_fd, jacobian_responses, posterior_covariance,
    CovarianceOptions, PosteriorGaussian, DEFAULT_STEP_FRACTION,
};
use gwuq_core::model::{generate_synthetic_valley, ParameterVector, ValleySpec};
use gwuq_core::Error;

use common::*;

fn affine_posterior(m: &Affine, at: &ParameterVector) -> (ParameterVector, Matrix4<f64>, Matrix4<f64>) {
    let jac = jacobian_fd(|p| Ok(m.response(p)), at, DEFAULT_STEP_FRACTION).unwrap();
    let (h, t) = m.response(at);
    let res_h: Vec<f64> = m.observed.iter().zip(&h).map(|(o, v)| o - v).collect();
    let mu = gauss_newton_step(at, &jac, &res_h, m.target - t, m.sigma_h, m.sigma_hpas).unwrap();
    let hess = gauss_newton_hessian(&jac, m.sigma_h, m.sigma_hpas).unwrap();
    let sigma = posterior_covariance(&hess, &CovarianceOptions::default()).unwrap();
    (mu, hess, sigma)
}

#[test]
fn affine_model_matches_closed_form() {
    for seed in [1, 2, 3] {
        let m = Affine::new(25, seed);
        let (mean, cov) = m.closed_form();
        // Linearizing anywhere gives the same answer for an affine map.
        for start in [m.truth, ParameterVector::new(3e-4, 1e-4, 5e-3, 1e-7)] {
            let (mu, _, sigma) = affine_posterior(&m, &start);
            let sd: [f64; 4] = std::array::from_fn(|j| cov[(j, j)].sqrt());
            for j in 0..4 {
                assert!((mu[j] - mean[j]).abs() < 1e-8 * sd[j].max(mean[j].abs()), "seed {seed} param {j}");
            }
            let diff = scaled_matrix_diff(&cov, &sigma, &sd);
            assert!(diff < 1e-8, "seed {seed}: {diff:e}");
        }
    }
}

#[test]
fn gauss_newton_matrix_equals_fd_hessian_for_affine_model() {
    let m = Affine::new(25, 9);
    let (mean, cov) = m.closed_form();
    let (_, hess, _) = affine_posterior(&m, &ParameterVector::from_array(mean));
    let steps: [f64; 4] = std::array::from_fn(|j| 0.05 * cov[(j, j)].sqrt());
    let fd = fd_hessian(|x| m.nll(x), &mean, &steps);
    let s: [f64; 4] = std::array::from_fn(|j| 1.0 / hess[(j, j)].sqrt());
    let diff = scaled_matrix_diff(&hess, &fd, &s);
    assert!(diff < 1e-6, "{diff:e}");
}

#[test]
fn duplicating_a_well_shrinks_the_posterior() {
    let m = Affine::new(12, 4);
    let jac = jacobian_fd(|p| Ok(m.response(p)), &m.truth, DEFAULT_STEP_FRACTION).unwrap();
    let h1 = gauss_newton_hessian(&jac, m.sigma_h, m.sigma_hpas).unwrap();
    let mut dup = jac.clone();
    let extra = dup.j_h.row(3).clone_owned();
    dup.j_h = DMatrix::from_fn(jac.j_h.nrows() + 1, 4, |i, j| {
        if i < jac.j_h.nrows() {
            jac.j_h[(i, j)]
        } else {
            extra[j]
        }
    });
    let h2 = gauss_newton_hessian(&dup, m.sigma_h, m.sigma_hpas).unwrap();
    let s1 = posterior_covariance(&h1, &CovarianceOptions::default()).unwrap();
    let s2 = posterior_covariance(&h2, &CovarianceOptions::default()).unwrap();
    // s1 - s2 is positive semi-definite (checked in scaled units).
    let sd: [f64; 4] = std::array::from_fn(|j| s1[(j, j)].sqrt());
    let d = Matrix4::from_fn(|r, c| (s1[(r, c)] - s2[(r, c)]) / (sd[r] * sd[c]));
    let ev = d.symmetric_eigenvalues();
    assert!(ev.min() > -1e-12, "{ev}");
    assert!(ev.max() > 0.0);
}

#[test]
fn rank_deficient_hessian_reports_direction() {
    let m = Affine::new(6, 5);
    let mut jac = jacobian_fd(|p| Ok(m.response(p)), &m.truth, DEFAULT_STEP_FRACTION).unwrap();
    // Make K3 invisible to every observation.
    for i in 0..jac.j_h.nrows() {
        jac.j_h[(i, 2)] = 0.0;
    }
    jac.j_hpas[2] = 0.0;
    let h = gauss_newton_hessian(&jac, m.sigma_h, m.sigma_hpas).unwrap();
    match posterior_covariance(&h, &CovarianceOptions::default()) {
        Err(Error::IndefiniteHessian { direction, .. }) => {
            assert_eq!(direction[2].abs(), 1.0);
        }
        other => panic!("expected an indefinite Hessian, got {other:?}"),
    }
    // A ridge does not rescue a zero diagonal.
    let ridged = CovarianceOptions {
        ridge: Some(1e-3),
        ..CovarianceOptions::default()
    };
    assert!(posterior_covariance(&h, &ridged).is_err());
}

#[test]
fn posterior_json_round_trip() {
    let m = Affine::new(10, 6);
    let (mu, _, sigma) = affine_posterior(&m, &m.truth);
    let pg = PosteriorGaussian::new(mu, sigma, 0.5).unwrap();
    let text = serde_json::to_string(&pg).unwrap();
    let back: PosteriorGaussian = serde_json::from_str(&text).unwrap();
    assert_eq!(back, pg);
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["sigma"].as_array().unwrap().len(), 16);
    assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 4);
    // Not positive definite.
    let mut bad = v.clone();
    bad["sigma"][0] = serde_json::json!(-sigma[(0, 0)]);
    assert!(serde_json::from_value::<PosteriorGaussian>(bad).is_err());
}

#[test]
fn valley_forward_differences_agree_with_central() {
    let s = Arc::new(generate_synthetic_valley(&ValleySpec::valley_small()).unwrap());
    let fm = ForwardModel::for_scenario(s, SolverOptions::default());
    let mu = ParameterVector::base_case();
    let jac = jacobian_responses(&fm, &mu, DEFAULT_STEP_FRACTION).unwrap();
    for j in 0..4 {
        let mut up = mu;
        let mut dn = mu;
        let h = jac.steps[j];
        up[j] += h;
        dn[j] -= h;
        let (a, b) = (fm.evaluate(&up), fm.evaluate(&dn));
        assert!(a.converged && b.converged);
        let num: f64 = (0..a.heads.len())
            .map(|i| ((a.heads[i] - b.heads[i]) / (2.0 * h) - jac.j_h[(i, j)]).powi(2))
            .sum::<f64>()
            .sqrt();
        let den = jac.j_h.column(j).norm();
        assert!(den > 0.0, "parameter {j} has no effect on heads");
        assert!(num / den < 1e-2, "parameter {j}: {}", num / den);
    }
}
