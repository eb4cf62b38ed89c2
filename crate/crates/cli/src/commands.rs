//! The four subcommands: calibration, single runs, replication batches,
//! and oracle evaluation.

use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use riskalloc_core::estimators::{self, CiScaling};
use riskalloc_core::oracle::{exact_allocation, saa_root};
use riskalloc_core::sa::{run_replications, run_rm, Trajectory};
use riskalloc_core::samplers::{calibrate_matrix, derive_seed, SamplerSpec, ScenarioSampler};
use riskalloc_core::stats;
use serde::Serialize;
use serde_json::json;

use crate::artifacts::{self, FlatPoint};
use crate::config::{ExperimentConfig, OracleSection, OutputSection};
use crate::CliError;

const CALIBRATION_TOL: f64 = 1e-6;
const CALIBRATION_AUDIT_DRAWS: usize = 100_000;

fn wants(output: &OutputSection, format: &str) -> bool {
    output.formats.iter().any(|f| f == format)
}

/// Calibrates the compound Poisson copula correlation and writes the
/// per-pair achieved-vs-target table together with a simulated audit column.
pub fn cmd_calibrate(config: &mut ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let spec = match &mut config.sampler {
        SamplerSpec::CompoundPoisson(spec) => spec,
        SamplerSpec::Gaussian(_) => {
            return Err(CliError::Config(
                "sampler: calibrate needs a compound_poisson sampler".into(),
            ))
        }
    };
    let report = calibrate_matrix(spec, None, CALIBRATION_TOL)?;

    // audit: simulate counts under the calibrated copula and compare the
    // empirical correlations with the targets
    let sampler = riskalloc_core::samplers::CompoundPoissonSampler::from_spec(spec)?;
    let d = sampler.dim();
    let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(config.run.seed, 0xca11b));
    let mut counts = vec![0u64; d];
    let mut cols = vec![Vec::with_capacity(CALIBRATION_AUDIT_DRAWS); d];
    for _ in 0..CALIBRATION_AUDIT_DRAWS {
        sampler.sample_counts_into(&mut rng, &mut counts);
        for (col, &c) in cols.iter_mut().zip(&counts) {
            col.push(c as f64);
        }
    }
    let rows: Vec<artifacts::CalibrationPairRow> = report
        .pairs
        .iter()
        .map(|p| artifacts::CalibrationPairRow {
            k: p.k,
            l: p.l,
            target: p.target,
            gauss_rho: p.gauss_rho,
            achieved: p.achieved,
            simulated: stats::correlation(&cols[p.k], &cols[p.l]),
        })
        .collect();

    println!(
        "calibrated {} pairs (tolerance {CALIBRATION_TOL:.0e})",
        rows.len()
    );
    println!(
        "{:>3} {:>3} {:>10} {:>10} {:>10} {:>10}",
        "k", "l", "target", "rho", "achieved", "simulated"
    );
    for r in &rows {
        println!(
            "{:>3} {:>3} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            r.k, r.l, r.target, r.gauss_rho, r.achieved, r.simulated
        );
    }

    let output = config.output_or_default();
    if wants(&output, "json") {
        artifacts::write_json(
            &out_dir.join("calibration.json"),
            &artifacts::CalibrationArtifacts {
                gauss_corr: report.gauss_corr,
                pairs: rows,
                tolerance: CALIBRATION_TOL,
                audit_draws: CALIBRATION_AUDIT_DRAWS,
            },
        )?;
    }
    Ok(())
}

/// Ensures a compound Poisson sampler is calibrated (calibrating in place
/// when needed, so the copula matrix lands in the audited config echo).
fn ensure_calibrated(config: &mut ExperimentConfig) -> Result<(), CliError> {
    if let SamplerSpec::CompoundPoisson(spec) = &mut config.sampler {
        if spec.gauss_corr.is_none() {
            calibrate_matrix(spec, None, CALIBRATION_TOL)?;
        }
    }
    Ok(())
}

fn build_run_results(
    config: &ExperimentConfig,
    traj: &Trajectory,
    alpha_level: f64,
    seconds: f64,
) -> artifacts::RunResults {
    let mut results = artifacts::RunResults {
        config: config.clone(),
        final_point: FlatPoint::from_flat(&traj.final_point),
        pr_average: traj
            .pr_average
            .as_ref()
            .map(|p| FlatPoint::from_flat(p.as_flat())),
        total_steps: traj.total_steps,
        thin: traj.thin,
        estimators: None,
        confidence_intervals: None,
        gain_diagnostic: None,
        boundary_contacts: traj.boundary_contacts.clone(),
        late_boundary_contacts: traj.late_boundary_contacts.clone(),
        boundary_warning: traj.late_boundary_contacts.iter().any(|&c| c > 0),
        timings: artifacts::Timings { seconds },
        metadata: artifacts::Metadata::default(),
    };

    if let (Some(cov), Some(jac)) = (&traj.cov, &traj.jac) {
        let sigma = cov.sigma().expect("estimators fed during the run");
        let a_n = jac.jacobian().expect("estimators fed during the run");
        let mut est = artifacts::EstimatorArtifacts {
            observations: cov.count(),
            jac_epsilon: jac.epsilon(),
            sigma_n: artifacts::matrix_to_rows(&sigma),
            a_n: artifacts::matrix_to_rows(&a_n),
            v_n: None,
            a_condition_number: None,
            v_error: None,
        };
        match estimators::asymptotic_cov(&sigma, &a_n) {
            Ok((v, condition)) => {
                est.v_n = Some(artifacts::matrix_to_rows(&v));
                est.a_condition_number = Some(condition);
                if let Some(avg) = &traj.pr_average {
                    let make = |scaling| {
                        estimators::confidence_interval(
                            avg.as_flat(),
                            &v,
                            config.run.averaging_t.expect("averaged run"),
                            config.run.n_steps,
                            config.run.schedule.gamma,
                            config.run.schedule.c,
                            alpha_level,
                            scaling,
                        )
                    };
                    if let (Ok(printed), Ok(gain)) =
                        (make(CiScaling::AsPrinted), make(CiScaling::GainScaled))
                    {
                        results.confidence_intervals = Some(artifacts::IntervalArtifacts {
                            alpha_level,
                            as_printed: printed,
                            gain_scaled: gain,
                        });
                    }
                }
            }
            Err(e) => est.v_error = Some(e.to_string()),
        }
        results.gain_diagnostic = Some(estimators::diagnose_gain(config.run.schedule.c, &a_n));
        results.estimators = Some(est);
    }
    results
}

/// One projected Robbins-Monro run with full artifacts.
pub fn cmd_run(config: &mut ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_calibrated(config)?;
    let sampler = ScenarioSampler::from_spec(&config.sampler)?;
    // materialize defaults into the audited echo
    let window = config.run.pr_window_len();
    let total = config.run.n_steps + window.map_or(0, |w| w - 1);
    config.run.thin = Some(config.run.thin_resolved(total));
    config.run.jac_epsilon = Some(config.run.jac_epsilon_resolved());

    let started = Instant::now();
    let traj = run_rm(&config.run, &config.loss, &sampler)?;
    let seconds = started.elapsed().as_secs_f64();

    let output = config.output_or_default();
    let results = build_run_results(config, &traj, output.ci_alpha, seconds);

    if results.boundary_warning {
        eprintln!(
            "warning: projection clamped iterates late in the run \
             (per-coordinate counts {:?}, total {:?}); the rectangle may be too small",
            results.late_boundary_contacts, results.boundary_contacts
        );
    }
    if wants(&output, "csv") {
        artifacts::write_trajectory_csv(&out_dir.join("trajectory.csv"), &traj, config.loss.d)?;
    }
    if wants(&output, "json") {
        artifacts::write_json(&out_dir.join("results.json"), &results)?;
    }
    let point = results.pr_average.as_ref().unwrap_or(&results.final_point);
    println!(
        "m = {:?}, lambda = {:.6} ({} steps in {seconds:.2}s)",
        point.m, point.lambda, traj.total_steps
    );
    Ok(())
}

/// Resolves the reference point for normalized errors.
fn resolve_z_star(config: &ExperimentConfig) -> Result<(Vec<f64>, serde_json::Value), CliError> {
    let oracle = config.oracle.as_ref().ok_or_else(|| {
        CliError::Config("oracle: section required to resolve the reference point".into())
    })?;
    match oracle {
        OracleSection::ClosedForm { params } => {
            let alloc = exact_allocation(params)?;
            Ok((
                alloc.to_flat(),
                json!({"kind": "closed_form", "allocation": alloc}),
            ))
        }
        OracleSection::Saa {
            n_samples,
            z_init,
            tol,
            seed,
        } => {
            let sampler = ScenarioSampler::from_spec(&config.sampler)?;
            let z_init = z_init.clone().unwrap_or_else(|| config.rect_center());
            let seed = seed.unwrap_or_else(|| derive_seed(config.run.seed, 0x5aa));
            let root = saa_root(&config.loss, &sampler, *n_samples, &z_init, *tol, seed)?;
            let flat = root.as_flat().to_vec();
            Ok((
                flat,
                json!({"kind": "saa", "allocation": root, "n_samples": n_samples, "seed": seed}),
            ))
        }
    }
}

/// Independent replications: distribution of the estimators around the
/// oracle reference, interval coverage, and plot-ready error grids.
pub fn cmd_replicate(config: &mut ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    let rep = config
        .replicate
        .ok_or_else(|| CliError::Config("replicate: section required".into()))?;
    ensure_calibrated(config)?;
    let (z_star, _oracle_meta) = resolve_z_star(config)?;
    let sampler = ScenarioSampler::from_spec(&config.sampler)?;

    let started = Instant::now();
    let batch = run_replications(
        &config.run,
        &config.loss,
        &sampler,
        rep.n,
        rep.mode,
        &z_star,
    )?;
    let seconds = started.elapsed().as_secs_f64();

    let dim = config.loss.d + 1;
    let output = config.output_or_default();

    // KS of the standardized normalized errors, per coordinate
    let ks: Vec<f64> = (0..dim)
        .map(|j| {
            let col: Vec<f64> = batch.norm_errors.iter().map(|row| row[j]).collect();
            stats::ks_distance_standard_normal(&stats::standardize(&col))
        })
        .collect();

    // interval coverage of the reference, per coordinate (PR mode)
    let coverage = batch.estimator_outputs.as_ref().map(|outputs| {
        let mut covered_printed = vec![0usize; dim];
        let mut covered_gain = vec![0usize; dim];
        let mut failed = 0usize;
        for (estimate, (sigma, a_n)) in batch.estimates.iter().zip(outputs) {
            match estimators::asymptotic_cov(sigma, a_n) {
                Ok((v, _)) => {
                    for (scaling, covered) in [
                        (CiScaling::AsPrinted, &mut covered_printed),
                        (CiScaling::GainScaled, &mut covered_gain),
                    ] {
                        if let Ok(cis) = estimators::confidence_interval(
                            estimate,
                            &v,
                            config.run.averaging_t.expect("PR mode"),
                            config.run.n_steps,
                            config.run.schedule.gamma,
                            config.run.schedule.c,
                            output.ci_alpha,
                            scaling,
                        ) {
                            for (j, ci) in cis.iter().enumerate() {
                                if ci.contains(z_star[j]) {
                                    covered[j] += 1;
                                }
                            }
                        }
                    }
                }
                Err(_) => failed += 1,
            }
        }
        let n = batch.estimates.len() as f64;
        artifacts::CoverageArtifacts {
            alpha_level: output.ci_alpha,
            as_printed: covered_printed.iter().map(|&c| c as f64 / n).collect(),
            gain_scaled: covered_gain.iter().map(|&c| c as f64 / n).collect(),
            failed,
        }
    });

    let ecdf_error: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|j| {
            let col: Vec<f64> = batch
                .estimates
                .iter()
                .map(|row| row[j] - z_star[j])
                .collect();
            stats::ecdf_grid(&col)
        })
        .collect();
    let epdf_normalized: Vec<stats::Histogram> = (0..dim)
        .map(|j| {
            let col: Vec<f64> = batch.norm_errors.iter().map(|row| row[j]).collect();
            stats::freedman_diaconis_histogram(&col)
        })
        .collect();

    let summary = artifacts::ReplicationSummary {
        config: config.clone(),
        mode: rep.mode,
        replications: rep.n,
        z_star: FlatPoint::from_flat(&z_star),
        ks_standardized: ks,
        coverage,
        ecdf_error,
        epdf_normalized,
        timings: artifacts::Timings { seconds },
    };

    if wants(&output, "csv") {
        artifacts::write_replications_csv(
            &out_dir.join("replications.csv"),
            &batch,
            config.loss.d,
        )?;
    }
    if wants(&output, "json") {
        artifacts::write_json(&out_dir.join("replication_summary.json"), &summary)?;
    }
    println!(
        "{} replications in {seconds:.2}s; KS of standardized errors: {:?}",
        rep.n, summary.ks_standardized
    );
    if let Some(cov) = &summary.coverage {
        println!(
            "interval coverage at {:.0}%: as_printed {:?}, gain_scaled {:?}",
            100.0 * (1.0 - cov.alpha_level),
            cov.as_printed,
            cov.gain_scaled
        );
    }
    Ok(())
}

/// Prints the configured oracle's solution as JSON (the reference point
/// feeding `replicate`).
pub fn cmd_oracle(config: &mut ExperimentConfig, out_dir: &Path) -> Result<(), CliError> {
    ensure_calibrated(config)?;
    let (z_star, meta) = resolve_z_star(config)?;
    #[derive(Serialize)]
    struct OracleOut {
        z_star: FlatPoint,
        oracle: serde_json::Value,
    }
    let out = OracleOut {
        z_star: FlatPoint::from_flat(&z_star),
        oracle: meta,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    let output = config.output_or_default();
    if wants(&output, "json") {
        artifacts::write_json(&out_dir.join("oracle.json"), &out)?;
    }
    Ok(())
}
