//! Stochastic root-finding engine for multivariate shortfall risk allocations.
//!
//! A system of `d` interdependent loss positions is charged a capital vector
//! `m` so that the expected aggregated loss `E[l(X - m)]` is driven to zero
//! while the total injection `sum(m)` is minimal. The optimal allocation
//! `(m*, lambda*)` is the unique root of the mean field
//!
//! ```text
//! h(z) = E[ ( lambda * grad l(X - m) - 1,  l(X - m) ) ],   z = (m, lambda)
//! ```
//!
//! which this crate estimates with a projected Robbins-Monro recursion
//! clamped to a rectangle, optionally followed by Polyak-Ruppert iterate
//! averaging. Alongside the iteration it runs online estimators of the noise
//! covariance and of the Jacobian of `h`, from which asymptotic covariances,
//! confidence intervals and step-gain diagnostics are derived.
//!
//! Modules:
//! - [`loss`]: the loss families, their gradients and the field `H(X, z)`.
//! - [`samplers`]: scenario generators (correlated Gaussian, compound
//!   Poisson with copula-correlated counts and correlation calibration).
//! - [`sa`]: projection, the Robbins-Monro driver, Polyak-Ruppert averaging
//!   and replication batches.
//! - [`estimators`]: online covariance/Jacobian estimation, confidence
//!   intervals, gain diagnostics.
//! - [`oracle`]: closed-form benchmark allocations and an independent
//!   sample-average-approximation root finder.
//! - [`stats`]: small statistical helpers shared by the engine and its
//!   output analysis.
//!
//! ```
//! use riskalloc_core::sa::{run_rm, InitialPoint, Rectangle, RunConfig, StepSchedule};
//! use riskalloc_core::samplers::{GaussianSpec, SamplerSpec, ScenarioSampler};
//! use riskalloc_core::LossSpec;
//!
//! let loss = LossSpec::exponential(2, 1.0, 1.0)?;
//! let sampler = ScenarioSampler::from_spec(&SamplerSpec::Gaussian(
//!     GaussianSpec::equicorrelated(2, 0.0),
//! ))?;
//! let config = RunConfig {
//!     n_steps: 20_000,
//!     schedule: StepSchedule::scalar(2.0, 0.7),
//!     rect: Rectangle::new(vec![0.0; 3], vec![2.0; 3])?,
//!     averaging_t: Some(10.0),
//!     seed: 7,
//!     z0: InitialPoint::UniformInRect,
//!     thin: None,
//!     track_estimators: true,
//!     jac_epsilon: None,
//!     estimator_window: None,
//! };
//! let trajectory = run_rm(&config, &loss, &sampler)?;
//! let averaged = trajectory.pr_average.as_ref().unwrap();
//! // the optimal allocation for this benchmark is (0.5, 0.5)
//! assert!((averaged.m()[0] - 0.5).abs() < 0.05);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

// validation guards are written `!(x > 0.0)` on purpose: the negation also
// rejects NaN, which `x <= 0.0` would let through
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimators;
pub mod loss;
pub mod oracle;
pub mod sa;
pub mod samplers;
pub mod stats;

pub use estimators::{
    asymptotic_cov, confidence_interval, diagnose_gain, CiScaling, ConfidenceInterval,
    CovEstimatorState, EstimatorError, GainDiagnostic, JacEstimatorState,
};
pub use loss::{AllocationPoint, FieldValue, LossError, LossKind, LossSpec};
pub use oracle::{exact_allocation, saa_root, src, ExactAllocation, ExpGaussParams, OracleError};
pub use sa::{
    pr_average, project, run_replications, run_rm, Rectangle, ReplicationBatch, ReplicationMode,
    RunConfig, SaError, StepSchedule, Trajectory,
};
pub use samplers::{
    bivariate_normal_cdf, calibrate_matrix, calibrate_pair, derive_seed, poisson_cdf_inverse,
    CompoundPoissonSpec, GaussianSpec, JumpDistribution, SamplerError, SamplerSpec,
    ScenarioSampler,
};
