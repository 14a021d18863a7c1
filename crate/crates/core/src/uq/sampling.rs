use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::laplace::PosteriorGaussian;
use crate::model::{validate_ordering, ParameterVector};
use crate::rng::stream_rng;

pub const DEFAULT_MAX_REJECTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSample {
    pub draws: Vec<ParameterVector>,
    /// Proposals rejected for leaving the positive ordered cone.
    pub rejected: usize,
}

impl PosteriorSample {
    pub fn acceptance_rate(&self) -> f64 {
        let n = self.draws.len();
        if n == 0 {
            return 1.0;
        }
        n as f64 / (n + self.rejected) as f64
    }
}

/// `A` with `A A^T = sigma`, built as `D C^{1/2}` from the correlation
/// matrix `C` so that parameters of very different magnitude do not spoil
/// the eigen-decomposition.
pub fn covariance_factor(sigma: &Matrix4<f64>) -> Matrix4<f64> {
    let d = Vector4::from_fn(|i, _| sigma[(i, i)].max(0.0).sqrt());
    let corr = Matrix4::from_fn(|r, c| {
        if d[r] > 0.0 && d[c] > 0.0 {
            sigma[(r, c)] / (d[r] * d[c])
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(corr);
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = eig.eigenvectors;
    let half = v * Matrix4::from_diagonal(&root) * v.transpose();
    Matrix4::from_fn(|r, c| d[r] * half[(r, c)])
}

fn acceptable(p: &ParameterVector) -> bool {
    p.all_positive() && validate_ordering(p)
}

/// Multivariate-normal draws from the posterior restricted to positive,
/// ordered parameters by rejection.
///
/// Draw `i` consumes stream `i` of `seed` until it yields an acceptable
/// proposal, so the output does not depend on how draws are scheduled.
pub fn sample_posterior(pg: &PosteriorGaussian, n: usize, seed: u64, max_rejects: usize) -> Result<PosteriorSample> {
    pg.validate()?;
    if max_rejects == 0 {
        return Err(Error::InvalidInput("max_rejects must be >= 1".into()));
    }
    let a = covariance_factor(&pg.sigma);
    let mu = Vector4::from(pg.mu.to_array());
    let per_draw: Vec<Result<(ParameterVector, usize)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            for attempt in 0..=max_rejects {
                let z = Vector4::from_fn(|_, _| StandardNormal.sample(&mut rng));
                let x = mu + a * z;
                let p = ParameterVector::from_array(std::array::from_fn(|j| x[j]));
                if acceptable(&p) {
                    return Ok((p, attempt));
                }
            }
            Err(Error::LowAcceptance {
                max_rejects,
                rejected: max_rejects + 1,
            })
        })
        .collect();
    let mut draws = Vec::with_capacity(n);
    let mut rejected = 0;
    for r in per_draw {
        let (p, rej) = r?;
        draws.push(p);
        rejected += rej;
    }
    Ok(PosteriorSample { draws, rejected })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::N_PARAMS;

    #[test]
    fn factor_reproduces_covariance() {
        let d = Vector4::new(1e-5, 3e-5, 2e-4, 1e-9);
        let corr = Matrix4::new(
            1.0, 0.3, -0.2, 0.1, //
            0.3, 1.0, 0.5, 0.0, //
            -0.2, 0.5, 1.0, 0.2, //
            0.1, 0.0, 0.2, 1.0,
        );
        let sigma = Matrix4::from_fn(|r, c| d[r] * corr[(r, c)] * d[c]);
        let a = covariance_factor(&sigma);
        let back = a * a.transpose();
        for r in 0..N_PARAMS {
            for c in 0..N_PARAMS {
                assert!((back[(r, c)] - sigma[(r, c)]).abs() <= 1e-12 * d[r] * d[c]);
            }
        }
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let pg = PosteriorGaussian::degenerate(ParameterVector::base_case(), 0.5);
        let s = sample_posterior(&pg, 7, 3, 10).unwrap();
        assert_eq!(s.rejected, 0);
        assert!(s.draws.iter().all(|p| *p == ParameterVector::base_case()));
    }

    #[test]
    fn hopeless_posterior_errors() {
        // Mean violates the ordering by many standard deviations.
        let mu = ParameterVector::new(1e-3, 1e-4, 1e-2, 1e-8);
        let sigma = Matrix4::from_diagonal(&Vector4::new(1e-12, 1e-12, 1e-8, 1e-20));
        let pg = PosteriorGaussian::new(mu, sigma, 1.0).unwrap();
        assert!(matches!(
            sample_posterior(&pg, 3, 1, 50),
            Err(Error::LowAcceptance { max_rejects: 50, .. })
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let mu = ParameterVector::base_case();
        let sigma = Matrix4::from_diagonal(&Vector4::new(1e-11, 1e-9, 1e-7, 1e-18));
        let pg = PosteriorGaussian::new(mu, sigma, 1.0).unwrap();
        let a = sample_posterior(&pg, 20, 9, 1000).unwrap();
        let b = sample_posterior(&pg, 20, 9, 1000).unwrap();
        assert_eq!(a, b);
        let c = sample_posterior(&pg, 5, 9, 1000).unwrap();
        assert_eq!(&a.draws[..5], &c.draws[..]);
    }
}
