//! Benchmark-only crate; see `benches/hot_paths.rs`.
//!
//! Shared fixtures for the benchmarks live here so the bench target stays
//! a thin criterion harness.

use riskalloc_core::sa::{Rectangle, RunConfig, StepSchedule};
use riskalloc_core::samplers::{GaussianSpec, SamplerSpec, ScenarioSampler};
use riskalloc_core::LossSpec;

/// The two-component exponential benchmark with independent scenarios.
pub fn exponential_fixture() -> (LossSpec, ScenarioSampler) {
    let loss = LossSpec::exponential(2, 1.0, 1.0).unwrap();
    let sampler =
        ScenarioSampler::from_spec(&SamplerSpec::Gaussian(GaussianSpec::equicorrelated(2, 0.0)))
            .unwrap();
    (loss, sampler)
}

/// Ten-component quadratic loss over correlated Gaussians.
pub fn wide_fixture() -> (LossSpec, ScenarioSampler) {
    let loss = LossSpec::pospart_quadratic(10, 1.0).unwrap();
    let sampler = ScenarioSampler::from_spec(&SamplerSpec::Gaussian(GaussianSpec::equicorrelated(
        10, 0.3,
    )))
    .unwrap();
    (loss, sampler)
}

pub fn run_config(n_steps: u64, d: usize, track_estimators: bool) -> RunConfig {
    RunConfig {
        n_steps,
        schedule: StepSchedule::scalar(2.0, 0.7),
        rect: Rectangle::new(vec![0.0; d + 1], vec![2.0; d + 1]).unwrap(),
        averaging_t: None,
        seed: 12345,
        z0: riskalloc_core::sa::InitialPoint::UniformInRect,
        thin: None,
        track_estimators,
        jac_epsilon: None,
        estimator_window: None,
    }
}
