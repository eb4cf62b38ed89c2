//! Ground-truth providers for validating the stochastic engine.
//!
//! For the exponential loss with a centered bivariate Gaussian the
//! first-order conditions collapse to a scalar quadratic and the optimal
//! allocations are available in closed form (`exact_allocation`). With
//! `Q = exp(-SRC)` and `g = rho beta^2 sigma1 sigma2`:
//!
//! ```text
//! m_i*    = beta sigma_i^2 / 2 + SRC / beta
//! SRC     = ln( alpha e^g / (-1 + sqrt(1 + alpha (alpha+2) e^g)) )
//! lambda* = (1 + alpha) / (beta (2 + alpha - Q))
//! ```
//!
//! The multiplier formula follows from the stationarity condition
//! `1 = lambda* E[grad l]` with the lognormal moments
//! `E exp(s X_i) = exp(s^2 sigma_i^2 / 2)`: the systemic exponential term
//! equals `e^g Q^2`, which the acceptability equation rewrites as
//! `(2 + alpha - 2Q) / alpha`, collapsing the expectation to
//! `beta (2 + alpha - Q) / (1 + alpha)`.
//!
//! For every other configuration, [`saa_root`] freezes one large i.i.d.
//! sample set and solves the deterministic averaged system by damped Newton
//! in `(m, ln lambda)`; it is an independent brute-force reference for the
//! Robbins-Monro path.

use crate::loss::{AllocationPoint, LossError, LossSpec};
use crate::samplers::{SamplerError, ScenarioSampler};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid oracle parameters: {0}")]
    InvalidParams(String),
    #[error("Newton iteration failed after {iterations} iterations (residual {residual:.3e})")]
    NewtonFailed { iterations: usize, residual: f64 },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Parameters of the exponential-loss/Gaussian benchmark (two components).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpGaussParams {
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl ExpGaussParams {
    pub fn validate(&self) -> Result<(), OracleError> {
        if !(self.sigma1 > 0.0 && self.sigma2 > 0.0) {
            return Err(OracleError::InvalidParams(format!(
                "volatilities must be positive, got ({}, {})",
                self.sigma1, self.sigma2
            )));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(OracleError::InvalidParams(format!(
                "correlation must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(OracleError::InvalidParams(format!(
                "systemic weight must be nonnegative, got {}",
                self.alpha
            )));
        }
        if !(self.beta > 0.0) {
            return Err(OracleError::InvalidParams(format!(
                "risk aversion must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Systemic risk contribution, with a flag marking the `alpha -> 0` limit
/// (where the formula degenerates and the contribution vanishes).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SrcValue {
    pub value: f64,
    pub alpha_zero_limit: bool,
}

/// Correlation-driven additive part of the optimal allocation; increasing
/// in `rho` and zero at `rho = 0`.
pub fn src(p: &ExpGaussParams) -> Result<SrcValue, OracleError> {
    p.validate()?;
    if p.alpha == 0.0 {
        return Ok(SrcValue {
            value: 0.0,
            alpha_zero_limit: true,
        });
    }
    let g = (p.rho * p.beta * p.beta * p.sigma1 * p.sigma2).exp();
    let value = (p.alpha * g / (-1.0 + (1.0 + p.alpha * (p.alpha + 2.0) * g).sqrt())).ln();
    Ok(SrcValue {
        value,
        alpha_zero_limit: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactAllocation {
    pub m1: f64,
    pub m2: f64,
    pub lambda: f64,
}

impl ExactAllocation {
    pub fn to_flat(self) -> Vec<f64> {
        vec![self.m1, self.m2, self.lambda]
    }
}

/// Closed-form optimal allocation and multiplier of the benchmark.
pub fn exact_allocation(p: &ExpGaussParams) -> Result<ExactAllocation, OracleError> {
    let s = src(p)?;
    let m1 = p.beta * p.sigma1 * p.sigma1 / 2.0 + s.value / p.beta;
    let m2 = p.beta * p.sigma2 * p.sigma2 / 2.0 + s.value / p.beta;
    let q = (-s.value).exp();
    let lambda = (1.0 + p.alpha) / (p.beta * (2.0 + p.alpha - q));
    Ok(ExactAllocation { m1, m2, lambda })
}

/// Analytic Jacobian of the mean field at the benchmark optimum, from the
/// same lognormal moment identities (`S2 = e^g Q^2` is the systemic term):
///
/// ```text
/// A = [ -l* a   -l* b   1/l* ]        a = beta^2 (Q + alpha S2) / (1+alpha)
///     [ -l* b   -l* a   1/l* ]        b = alpha beta^2 S2 / (1+alpha)
///     [ -1/l*   -1/l*   0    ]
/// ```
pub fn exp_gauss_jacobian(p: &ExpGaussParams) -> Result<DMatrix<f64>, OracleError> {
    let alloc = exact_allocation(p)?;
    let s = src(p)?;
    let q = (-s.value).exp();
    let g = (p.rho * p.beta * p.beta * p.sigma1 * p.sigma2).exp();
    let s2 = g * q * q;
    let b2 = p.beta * p.beta;
    let a = b2 * (q + p.alpha * s2) / (1.0 + p.alpha);
    let b = p.alpha * b2 * s2 / (1.0 + p.alpha);
    let l = alloc.lambda;
    Ok(DMatrix::from_row_slice(
        3,
        3,
        &[
            -l * a,
            -l * b,
            1.0 / l,
            -l * b,
            -l * a,
            1.0 / l,
            -1.0 / l,
            -1.0 / l,
            0.0,
        ],
    ))
}

const SAA_CHUNK: usize = 8192;
const SAA_MAX_ITER: usize = 200;
const SAA_MIN_STEP: f64 = 1e-6;

/// Sample-average-approximation root finder.
///
/// Freezes `n_samples` i.i.d. draws from the sampler (seeded, so the result
/// is deterministic) and drives the averaged field to zero with a damped
/// Newton iteration using a finite-difference Jacobian. The multiplier is
/// parameterized as `ln lambda`, which keeps it positive without an
/// explicit constraint.
pub fn saa_root(
    loss: &LossSpec,
    sampler: &ScenarioSampler,
    n_samples: usize,
    z_init: &[f64],
    tol: f64,
    seed: u64,
) -> Result<AllocationPoint, OracleError> {
    let d = loss.d;
    if sampler.dim() != d {
        return Err(OracleError::InvalidParams(format!(
            "sampler dimension {} does not match loss dimension {d}",
            sampler.dim()
        )));
    }
    if z_init.len() != d + 1 {
        return Err(OracleError::InvalidParams(format!(
            "initial point has {} coordinates, expected {}",
            z_init.len(),
            d + 1
        )));
    }
    if n_samples == 0 || !(tol > 0.0) {
        return Err(OracleError::InvalidParams(
            "need n_samples >= 1 and tol > 0".into(),
        ));
    }

    // frozen sample set
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut samples = vec![0.0f64; n_samples * d];
    for row in samples.chunks_mut(d) {
        sampler.sample_into(&mut rng, row);
    }

    // averaged field over the frozen set, in (m, ln lambda) coordinates;
    // fixed chunking and an ordered fold keep the sum deterministic under
    // any thread schedule
    let mean_field = |w: &[f64]| -> Result<Vec<f64>, LossError> {
        let mut z = w.to_vec();
        z[d] = w[d].exp();
        let partials: Result<Vec<Vec<f64>>, LossError> = samples
            .par_chunks(SAA_CHUNK * d)
            .map(|chunk| {
                let mut acc = vec![0.0; d + 1];
                let mut h = vec![0.0; d + 1];
                for row in chunk.chunks_exact(d) {
                    loss.field_into(row, &z, &mut h)?;
                    for (a, &v) in acc.iter_mut().zip(&h) {
                        *a += v;
                    }
                }
                Ok(acc)
            })
            .collect();
        let partials = partials?;
        let mut total = vec![0.0; d + 1];
        for part in partials {
            for (t, v) in total.iter_mut().zip(part) {
                *t += v;
            }
        }
        for t in total.iter_mut() {
            *t /= n_samples as f64;
        }
        Ok(total)
    };

    let mut w = z_init.to_vec();
    w[d] = z_init[d].max(1e-8).ln();
    let mut f0 = mean_field(&w)?;
    let mut residual = norm(&f0);
    for iter in 0..SAA_MAX_ITER {
        if residual <= tol {
            let mut z = w;
            z[d] = z[d].exp();
            return Ok(AllocationPoint::from_flat(z)?);
        }
        // forward-difference Jacobian of the averaged system
        let mut jac = DMatrix::<f64>::zeros(d + 1, d + 1);
        for j in 0..=d {
            let delta = 1e-6 * (1.0 + w[j].abs());
            let mut wp = w.clone();
            wp[j] += delta;
            let fp = mean_field(&wp)?;
            for i in 0..=d {
                jac[(i, j)] = (fp[i] - f0[i]) / delta;
            }
        }
        let rhs = DVector::from_iterator(d + 1, f0.iter().map(|&v| -v));
        let delta_w = jac.lu().solve(&rhs).ok_or(OracleError::NewtonFailed {
            iterations: iter,
            residual,
        })?;

        // backtracking halving on the residual norm
        let mut step = 1.0f64;
        loop {
            let wt: Vec<f64> = w
                .iter()
                .zip(delta_w.iter())
                .map(|(&wi, &di)| wi + step * di)
                .collect();
            // an Err here means the step overshot into overflow territory:
            // treat it like a residual increase and shrink
            if let Ok(ft) = mean_field(&wt) {
                let rt = norm(&ft);
                if rt < residual {
                    w = wt;
                    f0 = ft;
                    residual = rt;
                    break;
                }
            }
            step *= 0.5;
            if step < SAA_MIN_STEP {
                return Err(OracleError::NewtonFailed {
                    iterations: iter,
                    residual,
                });
            }
        }
    }
    Err(OracleError::NewtonFailed {
        iterations: SAA_MAX_ITER,
        residual,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}
