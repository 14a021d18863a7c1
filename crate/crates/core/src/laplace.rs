//! Gaussian (Laplace) approximation of the posterior around the calibrated
//! optimum, using forward-difference Jacobians and the Gauss-Newton Hessian.

use nalgebra::{DMatrix, Matrix4, SymmetricEigen, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inversion::{ForwardModel, ObservationSet, Response};
use crate::model::{validate_ordering, ParameterVector, N_PARAMS};

pub const DEFAULT_STEP_FRACTION: f64 = 2e-4;
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Sensitivities of the well heads and of the flooded-area percentage.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseJacobians {
    /// `n_wells x 4`, metres per parameter unit.
    pub j_h: DMatrix<f64>,
    /// Percentage points per parameter unit.
    pub j_hpas: [f64; N_PARAMS],
    pub step_fraction: f64,
    /// Absolute step per parameter.
    pub steps: [f64; N_PARAMS],
    /// Probe `j` left the ordered cone `k1 <= k2 <= k3`. Not penalized.
    pub cone_crossing: [bool; N_PARAMS],
    /// The flooded-area response did not move under any probe, so it adds
    /// no curvature.
    pub hpas_flat: bool,
}

/// Forward-difference Jacobian of an arbitrary response map
/// `p -> (heads, h_pas)`.
///
/// Column `j` is `(f(p + d_j e_j) - f(p)) / d_j` with `d_j = step_fraction * p_j`.
/// The five evaluations are independent and run concurrently.
pub fn jacobian_fd<F>(f: F, mu: &ParameterVector, step_fraction: f64) -> Result<ResponseJacobians>
where
    F: Fn(&ParameterVector) -> Result<(Vec<f64>, f64)> + Sync,
{
    if !mu.all_positive() {
        return Err(Error::InvalidInput(format!("jacobian point must be positive: {mu:?}")));
    }
    if !(step_fraction > 0.0 && step_fraction.is_finite()) {
        return Err(Error::InvalidInput("step_fraction must be > 0".into()));
    }
    let mut points = vec![*mu];
    let mut steps = [0.0; N_PARAMS];
    for (j, step) in steps.iter_mut().enumerate() {
        let mut q = *mu;
        q[j] = mu[j] + step_fraction * mu[j];
        // The realised step, so that the difference quotient is exact on affine maps.
        *step = q[j] - mu[j];
        points.push(q);
    }
    let values: Vec<Result<(Vec<f64>, f64)>> = points.par_iter().map(&f).collect();
    let mut values = values.into_iter();
    let (h0, a0) = values.next().expect("base point")?;
    let nb = h0.len();
    let mut j_h = DMatrix::zeros(nb, N_PARAMS);
    let mut j_hpas = [0.0; N_PARAMS];
    let mut cone_crossing = [false; N_PARAMS];
    for (j, v) in values.enumerate() {
        let (h, a) = v.map_err(|e| Error::InvalidInput(format!("perturbed solve for parameter {j} failed: {e}")))?;
        if h.len() != nb {
            return Err(Error::InvalidInput(format!("perturbed solve for parameter {j} returned {} heads", h.len())));
        }
        for i in 0..nb {
            j_h[(i, j)] = (h[i] - h0[i]) / steps[j];
        }
        j_hpas[j] = (a - a0) / steps[j];
        cone_crossing[j] = validate_ordering(mu) && !validate_ordering(&points[j + 1]);
    }
    if j_h.iter().chain(&j_hpas).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite Jacobian entry".into()));
    }
    Ok(ResponseJacobians {
        j_h,
        hpas_flat: j_hpas.iter().all(|v| *v == 0.0),
        j_hpas,
        step_fraction,
        steps,
        cone_crossing,
    })
}

fn response_values(r: &Response) -> Result<(Vec<f64>, f64)> {
    if r.converged {
        Ok((r.heads.clone(), r.h_pas))
    } else {
        Err(Error::InvalidInput(r.failure.clone().unwrap_or_else(|| "solve failed".into())))
    }
}

/// Jacobians of the forward model's well heads and flooded area at `mu`.
/// Solves go through the model's cache.
pub fn jacobian_responses(fm: &ForwardModel, mu: &ParameterVector, step_fraction: f64) -> Result<ResponseJacobians> {
    jacobian_fd(|p| response_values(&fm.evaluate(p)), mu, step_fraction)
}

/// `J_h^T J_h / sigma_h^2 + J_a^T J_a / sigma_hpas^2`.
pub fn gauss_newton_hessian(jac: &ResponseJacobians, sigma_h: f64, sigma_hpas: f64) -> Result<Matrix4<f64>> {
    if !(sigma_h > 0.0 && sigma_hpas > 0.0) {
        return Err(Error::InvalidInput("noise levels must be > 0".into()));
    }
    let jtj = jac.j_h.transpose() * &jac.j_h;
    let ja = Vector4::from(jac.j_hpas);
    let mut h = Matrix4::zeros();
    for r in 0..N_PARAMS {
        for c in 0..N_PARAMS {
            h[(r, c)] = jtj[(r, c)] / (sigma_h * sigma_h) + ja[r] * ja[c] / (sigma_hpas * sigma_hpas);
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceOptions {
    /// Smallest accepted eigenvalue relative to the largest, after
    /// diagonal equilibration.
    pub rank_tol: f64,
    /// Adds `ridge * diag(H)` before inverting. Off by default; when set, the
    /// covariance no longer reflects the data alone.
    pub ridge: Option<f64>,
}

impl Default for CovarianceOptions {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            ridge: None,
        }
    }
}

/// Inverse of a symmetric positive-definite Hessian.
///
/// The test for definiteness is done on `S H S` with `S = diag(H)^-1/2`,
/// because raw eigenvalues mix parameters whose units differ by orders of
/// magnitude.
pub fn posterior_covariance(hess: &Matrix4<f64>, opts: &CovarianceOptions) -> Result<Matrix4<f64>> {
    if hess.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("hessian has non-finite entries".into()));
    }
    let mut h = 0.5 * (hess + hess.transpose());
    if let Some(ridge) = opts.ridge {
        if !(ridge >= 0.0) {
            return Err(Error::InvalidInput("ridge must be >= 0".into()));
        }
        for i in 0..N_PARAMS {
            h[(i, i)] *= 1.0 + ridge;
        }
    }
    let largest_diag = (0..N_PARAMS).map(|i| h[(i, i)]).fold(0.0_f64, f64::max);
    if let Some(i) = (0..N_PARAMS).find(|&i| !(h[(i, i)] > 0.0)) {
        let mut direction = [0.0; N_PARAMS];
        direction[i] = 1.0;
        return Err(Error::IndefiniteHessian {
            eigenvalue: h[(i, i)],
            largest: largest_diag,
            direction,
        });
    }
    let s = Vector4::from_fn(|i, _| 1.0 / h[(i, i)].sqrt());
    let scaled = Matrix4::from_fn(|r, c| s[r] * h[(r, c)] * s[c]);
    let eig = SymmetricEigen::new(scaled);
    let (imin, &lmin) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("4 eigenvalues");
    let lmax = eig.eigenvalues.max();
    if !(lmin > opts.rank_tol * lmax) {
        let v = eig.eigenvectors.column(imin);
        // Back to parameter units, normalized.
        let mut d: Vector4<f64> = Vector4::from_fn(|i, _| s[i] * v[i]);
        d /= d.norm();
        return Err(Error::IndefiniteHessian {
            eigenvalue: lmin,
            largest: lmax,
            direction: [d[0], d[1], d[2], d[3]],
        });
    }
    let inv_scaled = scaled
        .cholesky()
        .ok_or(Error::IndefiniteHessian {
            eigenvalue: lmin,
            largest: lmax,
            direction: [0.0; N_PARAMS],
        })?
        .inverse();
    let sigma = Matrix4::from_fn(|r, c| s[r] * inv_scaled[(r, c)] * s[c]);
    Ok(0.5 * (sigma + sigma.transpose()))
}

/// Gaussian approximation of the posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PosteriorJson", into = "PosteriorJson")]
pub struct PosteriorGaussian {
    pub mu: ParameterVector,
    /// Covariance in squared parameter units.
    pub sigma: Matrix4<f64>,
    pub sigma_h_hat: f64,
}

impl PosteriorGaussian {
    pub fn new(mu: ParameterVector, sigma: Matrix4<f64>, sigma_h_hat: f64) -> Result<Self> {
        let pg = Self { mu, sigma, sigma_h_hat };
        pg.validate()?;
        Ok(pg)
    }

    /// A point mass: every draw equals `mu`.
    pub fn degenerate(mu: ParameterVector, sigma_h_hat: f64) -> Self {
        Self {
            mu,
            sigma: Matrix4::zeros(),
            sigma_h_hat,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma.iter().all(|v| *v == 0.0)
    }

    /// Symmetric and positive definite, or exactly zero.
    pub fn validate(&self) -> Result<()> {
        if !self.mu.all_positive() {
            return Err(Error::InvalidInput("posterior mean must be positive".into()));
        }
        if self.sigma.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("posterior covariance has non-finite entries".into()));
        }
        if self.is_degenerate() {
            return Ok(());
        }
        let scale = self.sigma.amax();
        if (self.sigma - self.sigma.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidInput("posterior covariance is not symmetric".into()));
        }
        if self.sigma.cholesky().is_none() {
            return Err(Error::InvalidInput("posterior covariance is not positive definite".into()));
        }
        Ok(())
    }

    pub fn std_devs(&self) -> [f64; N_PARAMS] {
        std::array::from_fn(|i| self.sigma[(i, i)].sqrt())
    }

    /// Eigenvalues of the covariance, ascending.
    pub fn eigenvalues(&self) -> [f64; N_PARAMS] {
        let mut ev: [f64; N_PARAMS] = SymmetricEigen::new(self.sigma).eigenvalues.into();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Largest over smallest covariance eigenvalue (infinite when degenerate).
    pub fn condition_number(&self) -> f64 {
        let ev = self.eigenvalues();
        if ev[0] > 0.0 {
            ev[N_PARAMS - 1] / ev[0]
        } else {
            f64::INFINITY
        }
    }
}

#[derive(Serialize, Deserialize)]
struct PosteriorJson {
    mu: [f64; N_PARAMS],
    /// Row-major.
    sigma: Vec<f64>,
    sigma_h_hat: f64,
    #[serde(default, skip_deserializing)]
    eigenvalues: Vec<f64>,
    #[serde(default, skip_deserializing)]
    condition_number: Option<f64>,
}

impl From<PosteriorGaussian> for PosteriorJson {
    fn from(pg: PosteriorGaussian) -> Self {
        let cond = pg.condition_number();
        Self {
            mu: pg.mu.to_array(),
            sigma: (0..N_PARAMS * N_PARAMS).map(|k| pg.sigma[(k / N_PARAMS, k % N_PARAMS)]).collect(),
            sigma_h_hat: pg.sigma_h_hat,
            eigenvalues: pg.eigenvalues().to_vec(),
            condition_number: cond.is_finite().then_some(cond),
        }
    }
}

impl TryFrom<PosteriorJson> for PosteriorGaussian {
    type Error = Error;

    fn try_from(j: PosteriorJson) -> Result<Self> {
        if j.sigma.len() != N_PARAMS * N_PARAMS {
            return Err(Error::InvalidInput(format!("sigma must have 16 entries, got {}", j.sigma.len())));
        }
        let sigma = Matrix4::from_row_slice(&j.sigma);
        Self::new(ParameterVector::from_array(j.mu), sigma, j.sigma_h_hat)
    }
}

/// Posterior with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceResult {
    pub posterior: PosteriorGaussian,
    pub hessian: Matrix4<f64>,
    pub jacobians: ResponseJacobians,
}

/// Laplace approximation at a calibrated optimum.
pub fn laplace(
    fm: &ForwardModel,
    obs: &ObservationSet,
    mu_post: &ParameterVector,
    sigma_h_hat: f64,
    step_fraction: f64,
    cov: &CovarianceOptions,
) -> Result<LaplaceResult> {
    let jacobians = jacobian_responses(fm, mu_post, step_fraction)?;
    let hessian = gauss_newton_hessian(&jacobians, sigma_h_hat, obs.sigma_hpas)?;
    let sigma = posterior_covariance(&hessian, cov)?;
    Ok(LaplaceResult {
        posterior: PosteriorGaussian::new(*mu_post, sigma, sigma_h_hat)?,
        hessian,
        jacobians,
    })
}

/// One Gauss-Newton step towards the NLL minimum at fixed noise levels.
///
/// `residual_h = observed - heads(p)` and `residual_hpas = target - h_pas(p)`.
/// For affine responses the step lands exactly on the minimum.
pub fn gauss_newton_step(
    p: &ParameterVector,
    jac: &ResponseJacobians,
    residual_h: &[f64],
    residual_hpas: f64,
    sigma_h: f64,
    sigma_hpas: f64,
) -> Result<ParameterVector> {
    if residual_h.len() != jac.j_h.nrows() {
        return Err(Error::InvalidInput("residual length does not match the Jacobian".into()));
    }
    let hess = gauss_newton_hessian(jac, sigma_h, sigma_hpas)?;
    let mut g = Vector4::zeros();
    for j in 0..N_PARAMS {
        let head: f64 = (0..residual_h.len()).map(|i| jac.j_h[(i, j)] * residual_h[i]).sum();
        g[j] = head / (sigma_h * sigma_h) + jac.j_hpas[j] * residual_hpas / (sigma_hpas * sigma_hpas);
    }
    let cov = posterior_covariance(&hess, &CovarianceOptions::default())?;
    let d = cov * g;
    Ok(ParameterVector::from_array(std::array::from_fn(|j| p[j] + d[j])))
}

/// Central-difference Hessian of a scalar function, for checking.
pub fn fd_hessian<F>(f: F, x: &[f64; N_PARAMS], steps: &[f64; N_PARAMS]) -> Matrix4<f64>
where
    F: Fn(&[f64; N_PARAMS]) -> f64,
{
    let at = |di: usize, si: f64, dj: usize, sj: f64| {
        let mut y = *x;
        y[di] += si * steps[di];
        y[dj] += sj * steps[dj];
        f(&y)
    };
    let f0 = f(x);
    let mut h = Matrix4::zeros();
    for i in 0..N_PARAMS {
        let mut y = *x;
        y[i] += steps[i];
        let fp = f(&y);
        y[i] = x[i] - steps[i];
        let fm = f(&y);
        h[(i, i)] = (fp - 2.0 * f0 + fm) / (steps[i] * steps[i]);
        for j in 0..i {
            let v = (at(i, 1.0, j, 1.0) - at(i, 1.0, j, -1.0) - at(i, -1.0, j, 1.0) + at(i, -1.0, j, -1.0))
                / (4.0 * steps[i] * steps[j]);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    h
}
