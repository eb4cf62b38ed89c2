//! Correlated multivariate Gaussian scenario generator.

use super::{check_symmetric, SamplerError};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Covariance (and optional mean) of a Gaussian loss vector, as configured.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub cov: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
}

impl GaussianSpec {
    /// Standard `d`-variate normal with correlation `rho` between every pair.
    pub fn equicorrelated(d: usize, rho: f64) -> Self {
        let cov = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { rho }).collect())
            .collect();
        GaussianSpec { cov, mean: None }
    }

    pub fn dim(&self) -> usize {
        self.cov.len()
    }
}

/// Validated sampler holding a factor `L` with `L L^T = cov`.
#[derive(Debug, Clone)]
pub struct GaussianSampler {
    mean: Vec<f64>,
    factor: DMatrix<f64>,
}

/// Factors a symmetric PSD matrix: Cholesky when positive definite,
/// otherwise an eigenvalue factor with small negative eigenvalues floored
/// at zero. Returns an error when the matrix is genuinely indefinite.
pub(crate) fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>, SamplerError> {
    if let Some(chol) = nalgebra::Cholesky::new(m.clone()) {
        return Ok(chol.unpack());
    }
    let eig = m.clone().symmetric_eigen();
    let scale = eig
        .eigenvalues
        .iter()
        .fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let min_eig = eig.eigenvalues.min();
    if min_eig < -1e-8 * scale {
        return Err(SamplerError::NotPositiveSemiDefinite {
            min_eigenvalue: min_eig,
        });
    }
    let sqrt = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&v| v.max(0.0).sqrt()),
    );
    let mut factor = eig.eigenvectors;
    for (j, s) in sqrt.iter().enumerate() {
        factor.column_mut(j).scale_mut(*s);
    }
    Ok(factor)
}

impl GaussianSampler {
    pub fn from_spec(spec: &GaussianSpec) -> Result<Self, SamplerError> {
        let d = spec.cov.len();
        if d == 0 {
            return Err(SamplerError::InvalidSpec("empty covariance".into()));
        }
        check_symmetric(&spec.cov, 1e-12)?;
        let cov = DMatrix::from_fn(d, d, |i, j| spec.cov[i][j]);
        let factor = psd_factor(&cov)?;
        let mean = match &spec.mean {
            Some(m) if m.len() != d => {
                return Err(SamplerError::DimensionMismatch {
                    expected: d,
                    got: m.len(),
                })
            }
            Some(m) => m.clone(),
            None => vec![0.0; d],
        };
        Ok(GaussianSampler { mean, factor })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draws `mean + L xi` with `xi` standard normal.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), d);
        // the normals must be drawn in a fixed order for reproducibility
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = self.mean[i];
            for (j, &x) in xi.iter().enumerate() {
                acc += self.factor[(i, j)] * x;
            }
            *o = acc;
        }
    }
}
