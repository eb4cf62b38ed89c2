//! Scenario generators for the simulation engine.
//!
//! Two families of i.i.d. loss vectors are supported: correlated
//! multivariate Gaussians, and compound Poisson vectors whose event counts
//! are coupled through a Gaussian copula. For the latter the copula
//! correlation is calibrated so that the *count* correlations hit a given
//! target matrix (see [`calibrate_pair`] / [`calibrate_matrix`]).
//!
//! Everything is deterministic given a seed; replications derive
//! independent sub-streams with [`derive_seed`].

mod bivnorm;
mod compound;
mod gaussian;
mod poisson;

pub use bivnorm::bivariate_normal_cdf;
pub use compound::{
    calibrate_matrix, calibrate_pair, CalibrationPair, CalibrationReport, CompoundPoissonSampler,
    CompoundPoissonSpec, JumpDistribution, JumpsSpec,
};
pub use gaussian::{GaussianSampler, GaussianSpec};
pub use poisson::{poisson_cdf, poisson_cdf_inverse, poisson_quantile};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("covariance/correlation matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix asymmetric at ({i},{j}): {a} vs {b}")]
    NotSymmetric { i: usize, j: usize, a: f64, b: f64 },
    #[error("matrix is not positive semi-definite (eigenvalue {min_eigenvalue:.3e})")]
    NotPositiveSemiDefinite { min_eigenvalue: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("correlation must lie in (-1, 1), got {0}")]
    InvalidCorrelation(f64),
    #[error("probability argument must lie in [0, 1), got {0}")]
    InvalidProbability(f64),
    #[error("intensity must be positive and finite, got {0}")]
    InvalidIntensity(f64),
    #[error(
        "target count correlation {target} for pair ({k},{l}) is outside the achievable \
         range [{achievable_min:.6}, {achievable_max:.6}]"
    )]
    InfeasibleCorrelation {
        k: usize,
        l: usize,
        target: f64,
        achievable_min: f64,
        achievable_max: f64,
    },
    #[error("calibrated copula correlation matrix is not positive semi-definite (eigenvalue {min_eigenvalue:.3e})")]
    CalibratedMatrixNotPsd { min_eigenvalue: f64 },
    #[error("compound Poisson spec is not calibrated; run calibration first")]
    Uncalibrated,
    #[error("invalid sampler specification: {0}")]
    InvalidSpec(String),
}

/// Serialized form of a scenario sampler, as it appears in run configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SamplerSpec {
    Gaussian(GaussianSpec),
    CompoundPoisson(CompoundPoissonSpec),
}

impl SamplerSpec {
    pub fn dim(&self) -> usize {
        match self {
            SamplerSpec::Gaussian(g) => g.dim(),
            SamplerSpec::CompoundPoisson(c) => c.dim(),
        }
    }
}

/// A validated, ready-to-draw scenario generator.
#[derive(Debug, Clone)]
pub enum ScenarioSampler {
    Gaussian(GaussianSampler),
    CompoundPoisson(CompoundPoissonSampler),
}

impl ScenarioSampler {
    /// Builds a sampler from its spec. Compound Poisson specs must already
    /// carry a calibrated copula correlation.
    pub fn from_spec(spec: &SamplerSpec) -> Result<Self, SamplerError> {
        match spec {
            SamplerSpec::Gaussian(g) => {
                Ok(ScenarioSampler::Gaussian(GaussianSampler::from_spec(g)?))
            }
            SamplerSpec::CompoundPoisson(c) => Ok(ScenarioSampler::CompoundPoisson(
                CompoundPoissonSampler::from_spec(c)?,
            )),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ScenarioSampler::Gaussian(g) => g.dim(),
            ScenarioSampler::CompoundPoisson(c) => c.dim(),
        }
    }

    /// Draws one loss vector into `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            ScenarioSampler::Gaussian(g) => g.sample_into(rng, out),
            ScenarioSampler::CompoundPoisson(c) => c.sample_into(rng, out),
        }
    }
}

/// Derives an independent sub-stream seed from a master seed and a
/// replication index (SplitMix64 finalizer over `master + (index+1) * phi`).
/// Used so that concurrent replications are reproducible regardless of
/// scheduling.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Checks squareness and symmetry (within `tol`) of a nested-vec matrix.
#[allow(clippy::needless_range_loop)] // compares mirrored entries
pub(crate) fn check_symmetric(m: &[Vec<f64>], tol: f64) -> Result<(), SamplerError> {
    let n = m.len();
    for (i, row) in m.iter().enumerate() {
        if row.len() != n {
            return Err(SamplerError::NotSquare {
                rows: n,
                cols: row.len(),
            });
        }
        for j in 0..i {
            if (m[i][j] - m[j][i]).abs() > tol {
                return Err(SamplerError::NotSymmetric {
                    i,
                    j,
                    a: m[i][j],
                    b: m[j][i],
                });
            }
        }
    }
    Ok(())
}
