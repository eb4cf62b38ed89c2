//! Compound Poisson loss vectors with copula-correlated event counts.
//!
//! Component `i` is `X_i = sum_{k=1}^{N_i} G_i^k` where `N_i` is Poisson
//! with mean `lambda_i * T` and the `G_i^k` are i.i.d. jump sizes. The
//! counts are coupled by mapping a correlated Gaussian vector through the
//! Poisson quantile: `N_i = P^{-1}_{lambda_i T}(Phi(eta_i))`.
//!
//! The Gaussian correlation `rho` that produces a prescribed *count*
//! correlation `rho*` solves the implicit moment equation
//!
//! ```text
//! sum_{m>=1} sum_{n>=1} m n Z_mn(rho) = lk*ll + rho* sqrt(lk*ll)
//! ```
//!
//! with `Z_mn` the probability that the two counts equal `(m, n)`, written
//! as a four-corner rectangle of bivariate normal CDF values. The left side
//! is increasing in `rho`, so a bisection on `[-0.999, 0.999]` is robust;
//! targets outside the bracket values are reported as infeasible together
//! with the achievable range.

use super::bivnorm::bivariate_normal_cdf;
use super::gaussian::psd_factor;
use super::poisson::{poisson_cdf, poisson_cdf_inverse_unchecked, poisson_quantile};
use super::{check_symmetric, SamplerError};
use crate::stats::{normal_cdf, normal_quantile};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

/// Truncation cap for the calibration series.
const TRUNC_CAP: u64 = 200;
/// Tail mass excluded by the default truncation rule.
const TRUNC_TAIL: f64 = 1e-12;
/// Bisection bracket for the copula correlation.
const RHO_BRACKET: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpDistribution {
    Normal { mu: f64, sigma: f64 },
    Exponential { rate: f64 },
}

impl JumpDistribution {
    fn validate(&self) -> Result<(), SamplerError> {
        match *self {
            JumpDistribution::Normal { sigma, mu } => {
                if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
                    return Err(SamplerError::InvalidSpec(format!(
                        "normal jumps need finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
                    )));
                }
            }
            JumpDistribution::Exponential { rate } => {
                if !(rate > 0.0) || !rate.is_finite() {
                    return Err(SamplerError::InvalidSpec(format!(
                        "exponential jumps need rate > 0, got {rate}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Mean jump size (Wald checks and diagnostics).
    pub fn mean(&self) -> f64 {
        match *self {
            JumpDistribution::Normal { mu, .. } => mu,
            JumpDistribution::Exponential { rate } => 1.0 / rate,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            JumpDistribution::Normal { mu, sigma } => {
                mu + sigma * rng.sample::<f64, _>(StandardNormal)
            }
            JumpDistribution::Exponential { rate } => rng.sample::<f64, _>(Exp1) / rate,
        }
    }
}

/// Jump-size section of the config: one distribution shared by every
/// component, or one per component.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum JumpsSpec {
    Shared(JumpDistribution),
    PerComponent(Vec<JumpDistribution>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompoundPoissonSpec {
    pub intensities: Vec<f64>,
    pub horizon: f64,
    pub jumps: JumpsSpec,
    pub target_corr: Vec<Vec<f64>>,
    /// Copula correlation produced by calibration; emitted to results for
    /// audit. Sampling requires it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauss_corr: Option<Vec<Vec<f64>>>,
}

impl CompoundPoissonSpec {
    pub fn dim(&self) -> usize {
        self.intensities.len()
    }

    pub fn jumps_per_component(&self) -> Result<Vec<JumpDistribution>, SamplerError> {
        let d = self.dim();
        let jumps = match &self.jumps {
            JumpsSpec::Shared(j) => vec![*j; d],
            JumpsSpec::PerComponent(v) => {
                if v.len() != d {
                    return Err(SamplerError::DimensionMismatch {
                        expected: d,
                        got: v.len(),
                    });
                }
                v.clone()
            }
        };
        for j in &jumps {
            j.validate()?;
        }
        Ok(jumps)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        let d = self.dim();
        if d == 0 {
            return Err(SamplerError::InvalidSpec("no intensities given".into()));
        }
        for &l in &self.intensities {
            if !(l > 0.0) || !l.is_finite() {
                return Err(SamplerError::InvalidIntensity(l));
            }
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(SamplerError::InvalidSpec(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        self.jumps_per_component()?;
        check_symmetric(&self.target_corr, 1e-12)?;
        if self.target_corr.len() != d {
            return Err(SamplerError::DimensionMismatch {
                expected: d,
                got: self.target_corr.len(),
            });
        }
        for i in 0..d {
            if (self.target_corr[i][i] - 1.0).abs() > 1e-12 {
                return Err(SamplerError::InvalidSpec(format!(
                    "target correlation diagonal must be 1, got {} at {i}",
                    self.target_corr[i][i]
                )));
            }
            for j in 0..i {
                let r = self.target_corr[i][j];
                if !(r.abs() < 1.0) {
                    return Err(SamplerError::InvalidCorrelation(r));
                }
            }
        }
        Ok(())
    }
}

/// Poisson quantile thresholds on the Gaussian scale:
/// `A_m = Phi^{-1}(P_lambda(m))` for `m = 0..=trunc`.
fn gaussian_thresholds(lambda: f64, trunc: u64) -> Vec<f64> {
    (0..=trunc)
        .map(|m| {
            let c = poisson_cdf(lambda, m);
            if c >= 1.0 {
                f64::INFINITY
            } else {
                normal_quantile(c)
            }
        })
        .collect()
}

/// Truncated series `sum m n Z_mn(rho)` for count intensities behind the
/// given quantile thresholds.
fn count_product_moment(a: &[f64], b: &[f64], rho: f64) -> Result<f64, SamplerError> {
    let m_max = a.len() - 1;
    let n_max = b.len() - 1;
    // corner grid of Phi2 values, shared by the four-term differences
    let mut grid = vec![0.0; a.len() * b.len()];
    for (m, &am) in a.iter().enumerate() {
        for (n, &bn) in b.iter().enumerate() {
            grid[m * b.len() + n] = bivariate_normal_cdf(am, bn, rho)?;
        }
    }
    let g = |m: usize, n: usize| grid[m * b.len() + n];
    let mut total = 0.0;
    for m in 1..=m_max {
        let mut row = 0.0;
        for n in 1..=n_max {
            let z = g(m, n) - g(m - 1, n) - g(m, n - 1) + g(m - 1, n - 1);
            row += n as f64 * z;
        }
        total += m as f64 * row;
    }
    Ok(total)
}

/// Default truncation for one margin: the Poisson quantile leaving tail
/// mass below 1e-12, capped.
pub fn default_truncation(lambda: f64) -> Result<u64, SamplerError> {
    Ok(poisson_quantile(lambda, 1.0 - TRUNC_TAIL)?.min(TRUNC_CAP))
}

/// Solves for the Gaussian copula correlation that reproduces the target
/// count correlation `rho_star` between Poisson counts with the given
/// intensities. Both margins are truncated at `trunc` terms.
pub fn calibrate_pair(
    lambda_k: f64,
    lambda_l: f64,
    rho_star: f64,
    trunc: u64,
    tol: f64,
) -> Result<f64, SamplerError> {
    calibrate_pair_detailed(lambda_k, lambda_l, rho_star, trunc, tol, 0, 1).map(|(rho, _)| rho)
}

fn calibrate_pair_detailed(
    lambda_k: f64,
    lambda_l: f64,
    rho_star: f64,
    trunc: u64,
    tol: f64,
    k: usize,
    l: usize,
) -> Result<(f64, f64), SamplerError> {
    for &lam in &[lambda_k, lambda_l] {
        if !(lam > 0.0) || !lam.is_finite() {
            return Err(SamplerError::InvalidIntensity(lam));
        }
    }
    if !(rho_star.abs() < 1.0) {
        return Err(SamplerError::InvalidCorrelation(rho_star));
    }
    if trunc == 0 || !(tol > 0.0) {
        return Err(SamplerError::InvalidSpec(
            "calibration needs trunc >= 1 and tol > 0".into(),
        ));
    }
    let a = gaussian_thresholds(lambda_k, trunc);
    let b = gaussian_thresholds(lambda_l, trunc);
    let product = lambda_k * lambda_l;
    let scale = (lambda_k * lambda_l).sqrt();
    let target = product + rho_star * scale;
    let implied = |moment: f64| (moment - product) / scale;

    let mut lo = -RHO_BRACKET;
    let mut hi = RHO_BRACKET;
    let f_lo = count_product_moment(&a, &b, lo)?;
    let f_hi = count_product_moment(&a, &b, hi)?;
    if target < f_lo || target > f_hi {
        return Err(SamplerError::InfeasibleCorrelation {
            k,
            l,
            target: rho_star,
            achievable_min: implied(f_lo),
            achievable_max: implied(f_hi),
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if count_product_moment(&a, &b, mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho = 0.5 * (lo + hi);
    let achieved = implied(count_product_moment(&a, &b, rho)?);
    Ok((rho, achieved))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationPair {
    pub k: usize,
    pub l: usize,
    pub target: f64,
    pub gauss_rho: f64,
    /// Count correlation implied by the truncated series at `gauss_rho`.
    pub achieved: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub gauss_corr: Vec<Vec<f64>>,
    pub pairs: Vec<CalibrationPair>,
}

/// Calibrates every pair `k > l` of the spec's target correlation matrix,
/// verifies the result factorizes, and fills `spec.gauss_corr`.
///
/// Calibration operates on the count intensities over the horizon,
/// `lambda_i * T`. `trunc` overrides the per-pair default truncation.
pub fn calibrate_matrix(
    spec: &mut CompoundPoissonSpec,
    trunc: Option<u64>,
    tol: f64,
) -> Result<CalibrationReport, SamplerError> {
    spec.validate()?;
    let d = spec.dim();
    let lam_t: Vec<f64> = spec.intensities.iter().map(|l| l * spec.horizon).collect();
    let mut gauss = vec![vec![0.0; d]; d];
    let mut pairs = Vec::new();
    for k in 0..d {
        gauss[k][k] = 1.0;
        for l in 0..k {
            let pair_trunc = match trunc {
                Some(t) => t,
                None => default_truncation(lam_t[k])?.max(default_truncation(lam_t[l])?),
            };
            let target = spec.target_corr[k][l];
            let (rho, achieved) =
                calibrate_pair_detailed(lam_t[k], lam_t[l], target, pair_trunc, tol, k, l)?;
            gauss[k][l] = rho;
            gauss[l][k] = rho;
            pairs.push(CalibrationPair {
                k,
                l,
                target,
                gauss_rho: rho,
                achieved,
            });
        }
    }
    let m = DMatrix::from_fn(d, d, |i, j| gauss[i][j]);
    let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -1e-10 {
        return Err(SamplerError::CalibratedMatrixNotPsd {
            min_eigenvalue: min_eig,
        });
    }
    spec.gauss_corr = Some(gauss.clone());
    Ok(CalibrationReport {
        gauss_corr: gauss,
        pairs,
    })
}

/// Validated, calibrated compound Poisson sampler.
#[derive(Debug, Clone)]
pub struct CompoundPoissonSampler {
    lam_t: Vec<f64>,
    jumps: Vec<JumpDistribution>,
    factor: DMatrix<f64>,
}

impl CompoundPoissonSampler {
    pub fn from_spec(spec: &CompoundPoissonSpec) -> Result<Self, SamplerError> {
        spec.validate()?;
        let d = spec.dim();
        let gauss = spec.gauss_corr.as_ref().ok_or(SamplerError::Uncalibrated)?;
        check_symmetric(gauss, 1e-10)?;
        if gauss.len() != d {
            return Err(SamplerError::DimensionMismatch {
                expected: d,
                got: gauss.len(),
            });
        }
        let corr = DMatrix::from_fn(d, d, |i, j| gauss[i][j]);
        let factor = psd_factor(&corr)?;
        Ok(CompoundPoissonSampler {
            lam_t: spec.intensities.iter().map(|l| l * spec.horizon).collect(),
            jumps: spec.jumps_per_component()?,
            factor,
        })
    }

    pub fn dim(&self) -> usize {
        self.lam_t.len()
    }

    /// Draws one loss vector: correlated Gaussian -> Poisson counts over the
    /// horizon -> summed jumps. A zero count gives exactly zero loss.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), d);
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            let count = self.count_from_gaussian(&xi, i);
            let mut x = 0.0;
            for _ in 0..count {
                x += self.jumps[i].sample(rng);
            }
            *o = x;
        }
    }

    /// Draws only the count vector; used for calibration audits.
    pub fn sample_counts_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [u64]) {
        let d = self.dim();
        debug_assert_eq!(out.len(), d);
        let xi: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.count_from_gaussian(&xi, i);
        }
    }

    fn count_from_gaussian(&self, xi: &[f64], i: usize) -> u64 {
        let mut eta = 0.0;
        for (j, &x) in xi.iter().enumerate() {
            eta += self.factor[(i, j)] * x;
        }
        // guard the u = 1 corner (would make the quantile unbounded)
        let u = normal_cdf(eta).min(1.0 - f64::EPSILON / 2.0);
        poisson_cdf_inverse_unchecked(self.lam_t[i], u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn pair_counts(lam_k: f64, lam_l: f64, rho: f64, n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let chol = rho_chol(rho);
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for _ in 0..n {
            let z1: f64 = rng.sample(StandardNormal);
            let z2: f64 = rng.sample(StandardNormal);
            let e1 = z1;
            let e2 = chol.0 * z1 + chol.1 * z2;
            a.push(poisson_cdf_inverse_unchecked(lam_k, normal_cdf(e1).min(1.0 - 1e-16)) as f64);
            b.push(poisson_cdf_inverse_unchecked(lam_l, normal_cdf(e2).min(1.0 - 1e-16)) as f64);
        }
        (a, b)
    }

    fn rho_chol(rho: f64) -> (f64, f64) {
        (rho, (1.0 - rho * rho).sqrt())
    }

    #[test]
    fn zero_target_calibrates_to_zero() {
        let rho = calibrate_pair(2.0, 2.0, 0.0, 40, 1e-6).unwrap();
        assert!(rho.abs() <= 1e-6, "rho = {rho}");
    }

    #[test]
    fn positive_target_needs_larger_gaussian_rho() {
        let rho = calibrate_pair(2.0, 2.0, 0.5, 40, 1e-6).unwrap();
        assert!((0.5..1.0).contains(&rho), "rho = {rho}");
        // round trip: simulated count correlation near the target
        let (a, b) = pair_counts(2.0, 2.0, rho, 1_000_000, 42);
        let r = stats::correlation(&a, &b);
        assert!((r - 0.5).abs() < 0.01, "simulated target {r}");
    }

    #[test]
    fn unreachable_target_reports_achievable_range() {
        match calibrate_pair(1.0, 3.0, 0.9999, 60, 1e-6) {
            Err(SamplerError::InfeasibleCorrelation {
                achievable_min,
                achievable_max,
                ..
            }) => {
                assert!(achievable_max < 0.9999);
                assert!(achievable_min > -1.0);
            }
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn boundary_target_is_rejected() {
        assert!(matches!(
            calibrate_pair(1.0, 2.0, -1.0, 40, 1e-6),
            Err(SamplerError::InvalidCorrelation(_))
        ));
    }

    fn demo_spec(d: usize, target: Vec<Vec<f64>>) -> CompoundPoissonSpec {
        CompoundPoissonSpec {
            intensities: (0..d)
                .map(|i| 1.0 + 2.0 * i as f64 / d.max(2) as f64)
                .collect(),
            horizon: 1.0,
            jumps: JumpsSpec::Shared(JumpDistribution::Normal {
                mu: 1.0,
                sigma: 1.0,
            }),
            target_corr: target,
            gauss_corr: None,
        }
    }

    #[test]
    fn identity_target_gives_identity_copula() {
        let d = 3;
        let target = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        let mut spec = demo_spec(d, target);
        let report = calibrate_matrix(&mut spec, None, 1e-6).unwrap();
        for p in &report.pairs {
            assert!(p.gauss_rho.abs() <= 1e-6);
        }
        let g = spec.gauss_corr.unwrap();
        for (i, row) in g.iter().enumerate() {
            assert_eq!(row[i], 1.0);
        }
    }

    #[test]
    fn matrix_round_trip_recovers_random_feasible_targets() {
        // random feasible d = 10 target: a shrunk random Gram correlation
        let d = 10usize;
        let mut rng = ChaCha12Rng::seed_from_u64(40);
        let raw =
            nalgebra::DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let gram = &raw * raw.transpose();
        let mut target = vec![vec![0.0; d]; d];
        for i in 0..d {
            target[i][i] = 1.0;
            for j in 0..i {
                let r = 0.55 * gram[(i, j)] / (gram[(i, i)] * gram[(j, j)]).sqrt();
                target[i][j] = r;
                target[j][i] = r;
            }
        }
        let mut spec = demo_spec(d, target.clone());
        let report = calibrate_matrix(&mut spec, None, 1e-6).unwrap();
        for p in &report.pairs {
            assert!(
                (p.achieved - p.target).abs() <= 1e-6,
                "pair ({},{}): achieved {} vs target {}",
                p.k,
                p.l,
                p.achieved,
                p.target
            );
        }
        // resimulate the counts and compare the empirical correlations
        let sampler = CompoundPoissonSampler::from_spec(&spec).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let n = 100_000;
        let mut cols: Vec<Vec<f64>> = (0..d).map(|_| Vec::with_capacity(n)).collect();
        let mut counts = vec![0u64; d];
        for _ in 0..n {
            sampler.sample_counts_into(&mut rng, &mut counts);
            for (c, &v) in cols.iter_mut().zip(&counts) {
                c.push(v as f64);
            }
        }
        for i in 0..d {
            for j in 0..i {
                let r = stats::correlation(&cols[i], &cols[j]);
                assert!(
                    (r - target[i][j]).abs() < 0.03,
                    "pair ({i},{j}): simulated {r} vs target {}",
                    target[i][j]
                );
            }
        }
    }

    #[test]
    fn boundary_target_entries_are_rejected_by_matrix_calibration() {
        let mut spec = demo_spec(2, vec![vec![1.0, -1.0], vec![-1.0, 1.0]]);
        assert!(matches!(
            calibrate_matrix(&mut spec, None, 1e-6),
            Err(SamplerError::InvalidCorrelation(_))
        ));
    }

    #[test]
    fn sampling_requires_calibration() {
        let spec = demo_spec(2, vec![vec![1.0, 0.5], vec![0.5, 1.0]]);
        assert!(matches!(
            CompoundPoissonSampler::from_spec(&spec),
            Err(SamplerError::Uncalibrated)
        ));
    }

    #[test]
    fn vanishing_intensity_produces_zero_losses() {
        let mut spec = CompoundPoissonSpec {
            intensities: vec![1e-9, 1e-9],
            horizon: 1.0,
            jumps: JumpsSpec::Shared(JumpDistribution::Normal {
                mu: 1.0,
                sigma: 1.0,
            }),
            target_corr: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            gauss_corr: None,
        };
        calibrate_matrix(&mut spec, Some(4), 1e-6).unwrap();
        let sampler = CompoundPoissonSampler::from_spec(&spec).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let mut buf = vec![0.0; 2];
        for _ in 0..10_000 {
            sampler.sample_into(&mut rng, &mut buf);
            assert_eq!(buf, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn wald_identity_for_both_jump_families() {
        // E X = lambda T E[G]
        for (jumps, expected, band) in [
            (
                JumpDistribution::Normal {
                    mu: 1.0,
                    sigma: 1.0,
                },
                2.0,
                0.05,
            ),
            (JumpDistribution::Exponential { rate: 0.5 }, 4.0, 0.1),
        ] {
            let spec = CompoundPoissonSpec {
                intensities: vec![2.0],
                horizon: 1.0,
                jumps: JumpsSpec::Shared(jumps),
                target_corr: vec![vec![1.0]],
                gauss_corr: Some(vec![vec![1.0]]),
            };
            spec.validate().unwrap();
            let sampler = CompoundPoissonSampler::from_spec(&spec).unwrap();
            let mut rng = ChaCha12Rng::seed_from_u64(13);
            let mut buf = vec![0.0];
            let n = 100_000;
            let mut acc = 0.0;
            for _ in 0..n {
                sampler.sample_into(&mut rng, &mut buf);
                acc += buf[0];
            }
            let mean = acc / n as f64;
            assert!(
                (mean - expected).abs() < band,
                "jumps {jumps:?}: mean {mean} vs {expected}"
            );
        }
    }

    #[test]
    fn same_seed_gives_bit_identical_streams() {
        let mut spec = demo_spec(
            3,
            vec![
                vec![1.0, 0.3, 0.1],
                vec![0.3, 1.0, 0.2],
                vec![0.1, 0.2, 1.0],
            ],
        );
        calibrate_matrix(&mut spec, None, 1e-6).unwrap();
        let sampler = CompoundPoissonSampler::from_spec(&spec).unwrap();
        let draw = |seed: u64| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let mut buf = vec![0.0; 3];
            let mut out = Vec::new();
            for _ in 0..200 {
                sampler.sample_into(&mut rng, &mut buf);
                out.extend_from_slice(&buf);
            }
            out
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn marginal_counts_pass_chi_square_gof() {
        let lam_t = 2.4;
        let mut spec = CompoundPoissonSpec {
            intensities: vec![lam_t, 1.1],
            horizon: 1.0,
            jumps: JumpsSpec::Shared(JumpDistribution::Normal {
                mu: 1.0,
                sigma: 1e-12,
            }),
            target_corr: vec![vec![1.0, 0.35], vec![0.35, 1.0]],
            gauss_corr: None,
        };
        calibrate_matrix(&mut spec, None, 1e-6).unwrap();
        let sampler = CompoundPoissonSampler::from_spec(&spec).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(29);
        let n = 100_000usize;
        let mut buf = vec![0.0; 2];
        let mut freq = vec![0u64; 64];
        for _ in 0..n {
            sampler.sample_into(&mut rng, &mut buf);
            let k = (buf[0].round() as usize).min(63);
            freq[k] += 1;
        }
        // pool the tail so every expected count is at least 5
        let mut expected = Vec::new();
        let mut observed = Vec::new();
        let mut tail_e = n as f64;
        let mut tail_o = n as i64;
        let mut k = 0usize;
        loop {
            let pk = poisson_cdf(lam_t, k as u64)
                - if k == 0 {
                    0.0
                } else {
                    poisson_cdf(lam_t, k as u64 - 1)
                };
            let e = pk * n as f64;
            if tail_e - e < 5.0 || k >= 62 {
                break;
            }
            expected.push(e);
            observed.push(freq[k] as f64);
            tail_e -= e;
            tail_o -= freq[k] as i64;
            k += 1;
        }
        expected.push(tail_e);
        observed.push(tail_o as f64);
        let chi2: f64 = expected
            .iter()
            .zip(&observed)
            .map(|(e, o)| (o - e) * (o - e) / e)
            .sum();
        let crit = stats::chi_square_critical(expected.len() as f64 - 1.0, 0.01);
        assert!(chi2 < crit, "chi2 = {chi2}, critical = {crit}");
    }
}
