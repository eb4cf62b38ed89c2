//! Plot-ready artifact writers: CSV schemas are fixed and documented in the
//! README; JSON uses shortest-round-trip floats so re-reading a results
//! file reproduces the emitted values exactly.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use riskalloc_core::estimators::{ConfidenceInterval, GainDiagnostic};
use riskalloc_core::sa::{ReplicationBatch, Trajectory};
use riskalloc_core::stats::Histogram;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::CliError;

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// `step,m_1,...,m_d,lambda,clamped` — `clamped` is a bitmask of the
/// coordinates clamped by the projection at that step.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory, d: usize) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "step")?;
    for i in 1..=d {
        write!(w, ",m_{i}")?;
    }
    writeln!(w, ",lambda,clamped")?;
    for ((step, point), clamped) in traj.steps.iter().zip(&traj.points).zip(&traj.clamped) {
        write!(w, "{step}")?;
        for v in point {
            write!(w, ",{v}")?;
        }
        writeln!(w, ",{clamped}")?;
    }
    Ok(())
}

/// `rep,m_1,...,m_d,lambda,D_1,...,D_{d+1}` — one row per replication, in
/// replication-index order.
pub fn write_replications_csv(
    path: &Path,
    batch: &ReplicationBatch,
    d: usize,
) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "rep")?;
    for i in 1..=d {
        write!(w, ",m_{i}")?;
    }
    write!(w, ",lambda")?;
    for i in 1..=d + 1 {
        write!(w, ",D_{i}")?;
    }
    writeln!(w)?;
    for (rep, (estimate, err)) in batch.estimates.iter().zip(&batch.norm_errors).enumerate() {
        write!(w, "{rep}")?;
        for v in estimate {
            write!(w, ",{v}")?;
        }
        for v in err {
            write!(w, ",{v}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorArtifacts {
    pub observations: u64,
    pub jac_epsilon: f64,
    pub sigma_n: Vec<Vec<f64>>,
    pub a_n: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_n: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_condition_number: Option<f64>,
    /// Set when the asymptotic covariance could not be formed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntervalArtifacts {
    pub alpha_level: f64,
    /// Half-width `q sqrt(V_jj / (t n^gamma))`.
    pub as_printed: Vec<ConfidenceInterval>,
    /// Alternative scaling `q sqrt(V_jj gamma_n / t)`.
    pub gain_scaled: Vec<ConfidenceInterval>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timings {
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResults {
    /// The configuration with every default materialized.
    pub config: ExperimentConfig,
    #[serde(rename = "final")]
    pub final_point: FlatPoint,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pr_average: Option<FlatPoint>,
    pub total_steps: u64,
    pub thin: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimators: Option<EstimatorArtifacts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence_intervals: Option<IntervalArtifacts>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_diagnostic: Option<GainDiagnostic>,
    pub boundary_contacts: Vec<u64>,
    /// Clamp counts in the second half of the run.
    pub late_boundary_contacts: Vec<u64>,
    /// Late clamping means the rectangle was chosen too small; early
    /// contacts are the normal transient of a uniform start.
    pub boundary_warning: bool,
    pub timings: Timings,
    pub metadata: Metadata,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatPoint {
    pub m: Vec<f64>,
    pub lambda: f64,
}

impl FlatPoint {
    pub fn from_flat(z: &[f64]) -> Self {
        FlatPoint {
            m: z[..z.len() - 1].to_vec(),
            lambda: z[z.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metadata {
    /// The covariance estimator is the uncentered second moment along the
    /// trajectory; the centering term vanishes asymptotically.
    pub sigma_estimator: String,
    /// The two interval scalings differ by the step gain constant.
    pub ci_scalings: String,
}

impl Default for Metadata {
    fn default() -> Self {
        Metadata {
            sigma_estimator: "uncentered second moment of the field along the trajectory; \
                              the mean-field centering term vanishes asymptotically and is \
                              not subtracted at finite n"
                .into(),
            ci_scalings: "as_printed divides the variance by t*n^gamma; gain_scaled \
                          multiplies that by the step constant c (the two coincide at c = 1)"
                .into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageArtifacts {
    pub alpha_level: f64,
    /// Fraction of replications whose interval covered the reference, per
    /// coordinate, for both interval scalings.
    pub as_printed: Vec<f64>,
    pub gain_scaled: Vec<f64>,
    /// Replications whose asymptotic covariance could not be formed.
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub config: ExperimentConfig,
    pub mode: riskalloc_core::sa::ReplicationMode,
    pub replications: usize,
    pub z_star: FlatPoint,
    /// Kolmogorov-Smirnov distance of the standardized normalized errors
    /// from the standard normal, per coordinate.
    pub ks_standardized: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageArtifacts>,
    /// Per-coordinate ECDF grids of the estimation errors, plot-ready.
    pub ecdf_error: Vec<Vec<(f64, f64)>>,
    /// Per-coordinate histograms of the normalized errors.
    pub epdf_normalized: Vec<Histogram>,
    pub timings: Timings,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationArtifacts {
    pub gauss_corr: Vec<Vec<f64>>,
    pub pairs: Vec<CalibrationPairRow>,
    pub tolerance: f64,
    pub audit_draws: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationPairRow {
    pub k: usize,
    pub l: usize,
    pub target: f64,
    pub gauss_rho: f64,
    /// Count correlation implied by the truncated series at the solution.
    pub achieved: f64,
    /// Count correlation of a simulated audit batch.
    pub simulated: f64,
}
