//! Experiment configuration: one JSON document describing the loss, the
//! scenario sampler, the run, and optional replication/oracle/output
//! sections. All defaults are materialized back into the results for audit.

use riskalloc_core::oracle::ExpGaussParams;
use riskalloc_core::sa::{ReplicationMode, RunConfig};
use riskalloc_core::samplers::SamplerSpec;
use riskalloc_core::LossSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub loss: LossSpec,
    pub sampler: SamplerSpec,
    pub run: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replicate: Option<ReplicateSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ReplicateSection {
    #[serde(rename = "N")]
    pub n: usize,
    pub mode: ReplicationMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OracleSection {
    /// Closed-form benchmark allocation (exponential loss, two components).
    ClosedForm { params: ExpGaussParams },
    /// Sample-average-approximation root with a frozen sample set.
    Saa {
        #[serde(default = "default_saa_samples")]
        n_samples: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        z_init: Option<Vec<f64>>,
        #[serde(default = "default_saa_tol")]
        tol: f64,
        /// Defaults to a stream derived from the run seed, decoupled from
        /// replication sub-streams.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

fn default_saa_samples() -> usize {
    1_000_000
}

fn default_saa_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
    #[serde(default = "default_ci_alpha")]
    pub ci_alpha: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: None,
            formats: default_formats(),
            ci_alpha: default_ci_alpha(),
        }
    }
}

fn default_formats() -> Vec<String> {
    vec!["csv".into(), "json".into()]
}

fn default_ci_alpha() -> f64 {
    0.05
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Cross-section consistency checks, with field paths in the messages.
    pub fn validate(&mut self) -> Result<(), CliError> {
        self.loss
            .validate()
            .map_err(|e| CliError::Config(format!("loss: {e}")))?;
        if self.sampler.dim() != self.loss.d {
            return Err(CliError::Config(format!(
                "sampler: dimension {} does not match loss.d = {}",
                self.sampler.dim(),
                self.loss.d
            )));
        }
        if let SamplerSpec::CompoundPoisson(spec) = &self.sampler {
            spec.validate()
                .map_err(|e| CliError::Config(format!("sampler: {e}")))?;
        }
        self.run
            .validate(self.loss.d)
            .map_err(|e| CliError::Config(format!("run: {e}")))?;
        if let Some(rep) = &self.replicate {
            if rep.n == 0 {
                return Err(CliError::Config("replicate.N: must be at least 1".into()));
            }
            if rep.mode == ReplicationMode::Pr && self.run.averaging_t.is_none() {
                return Err(CliError::Config(
                    "replicate.mode = pr requires run.averaging_t".into(),
                ));
            }
        }
        if let Some(oracle) = &self.oracle {
            match oracle {
                OracleSection::ClosedForm { params } => {
                    params
                        .validate()
                        .map_err(|e| CliError::Config(format!("oracle.params: {e}")))?;
                    if self.loss.kind != riskalloc_core::LossKind::Exponential || self.loss.d != 2 {
                        return Err(CliError::Config(
                            "oracle.kind = closed_form is only available for the \
                             two-component exponential loss; supply a saa oracle"
                                .into(),
                        ));
                    }
                }
                OracleSection::Saa {
                    n_samples,
                    z_init,
                    tol,
                    ..
                } => {
                    if *n_samples == 0 {
                        return Err(CliError::Config("oracle.n_samples: must be >= 1".into()));
                    }
                    if !(*tol > 0.0) {
                        return Err(CliError::Config("oracle.tol: must be positive".into()));
                    }
                    if let Some(z) = z_init {
                        if z.len() != self.loss.d + 1 {
                            return Err(CliError::Config(format!(
                                "oracle.z_init: has {} coordinates, expected {}",
                                z.len(),
                                self.loss.d + 1
                            )));
                        }
                    }
                }
            }
        }
        if let Some(out) = &self.output {
            for f in &out.formats {
                if f != "csv" && f != "json" {
                    return Err(CliError::Config(format!(
                        "output.formats: unknown format {f:?} (expected \"csv\" or \"json\")"
                    )));
                }
            }
            if !(out.ci_alpha > 0.0 && out.ci_alpha < 1.0) {
                return Err(CliError::Config(format!(
                    "output.ci_alpha: must lie in (0, 1), got {}",
                    out.ci_alpha
                )));
            }
        }
        Ok(())
    }

    pub fn output_or_default(&self) -> OutputSection {
        self.output.clone().unwrap_or_default()
    }

    /// Default initial point for the SAA solver: the rectangle center.
    pub fn rect_center(&self) -> Vec<f64> {
        self.run
            .rect
            .lower
            .iter()
            .zip(&self.run.rect.upper)
            .map(|(&lo, &hi)| 0.5 * (lo + hi))
            .collect()
    }
}
