//! Online estimation of the quantities behind the confidence machinery.
//!
//! Along a single run the engine accumulates
//!
//! ```text
//! Sigma_n = (1/n)     sum_k H(X_k, Z_{k-1}) H(X_k, Z_{k-1})^T
//! A_n     = (1/eps n) sum_k [ H(X_k, Z_{k-1} + eps e_j) - H(X_k, Z_{k-1}) ]_j
//! ```
//!
//! fed with the *same* draws as the iteration itself. Both are consistent
//! for the noise covariance `Sigma*` and the mean-field Jacobian `A` at the
//! root; note `Sigma_n` is the uncentered second moment as defined — the
//! centering term vanishes asymptotically since the mean field goes to zero
//! along the trajectory, and the finite-n discrepancy is reported in run
//! metadata rather than subtracted.
//!
//! From these, `V_n = A_n^{-1} Sigma_n A_n^{-T}` gives the averaged
//! estimator's asymptotic covariance, per-coordinate confidence intervals,
//! and a diagnostic for the `gamma = 1` step-gain conditions.

use crate::loss::{LossError, LossSpec};
use crate::stats::normal_quantile;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Jacobian estimates with a worse condition number than this are refused
/// rather than silently regularized.
pub const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("estimated Jacobian is near-singular (condition number {condition:.3e})")]
    NearSingularJacobian { condition: f64 },
    #[error("no observations accumulated")]
    Empty,
    #[error("negative variance diagonal V[{index},{index}] = {value:.3e}")]
    NegativeVariance { index: usize, value: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Running uncentered second moment of the field values.
///
/// With a window set, only the most recent observations enter the average
/// (the evicted outer products are subtracted exactly from the stored
/// field values).
#[derive(Debug, Clone, PartialEq)]
pub struct CovEstimatorState {
    n: u64,
    sum_outer: DMatrix<f64>,
    window: Option<usize>,
    recent: std::collections::VecDeque<Vec<f64>>,
}

impl CovEstimatorState {
    pub fn new(dim: usize) -> Self {
        Self::with_window(dim, None)
    }

    pub fn with_window(dim: usize, window: Option<usize>) -> Self {
        CovEstimatorState {
            n: 0,
            sum_outer: DMatrix::zeros(dim, dim),
            window,
            recent: std::collections::VecDeque::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.sum_outer.nrows()
    }

    /// Observations currently averaged.
    pub fn count(&self) -> u64 {
        match self.window {
            Some(w) => self.n.min(w as u64),
            None => self.n,
        }
    }

    /// Accumulates one outer product `h h^T`. Must be called once per
    /// iteration step with the field value of that step.
    pub fn update(&mut self, h: &[f64]) {
        debug_assert_eq!(h.len(), self.dim());
        for (i, &hi) in h.iter().enumerate() {
            for (j, &hj) in h.iter().enumerate() {
                self.sum_outer[(i, j)] += hi * hj;
            }
        }
        self.n += 1;
        if let Some(w) = self.window {
            self.recent.push_back(h.to_vec());
            if self.recent.len() > w {
                let old = self.recent.pop_front().expect("nonempty");
                for (i, &hi) in old.iter().enumerate() {
                    for (j, &hj) in old.iter().enumerate() {
                        self.sum_outer[(i, j)] -= hi * hj;
                    }
                }
            }
        }
    }

    /// Current estimate `Sigma_n`; symmetric PSD by construction.
    pub fn sigma(&self) -> Result<DMatrix<f64>, EstimatorError> {
        if self.count() == 0 {
            return Err(EstimatorError::Empty);
        }
        Ok(&self.sum_outer / self.count() as f64)
    }
}

/// Running forward-difference Jacobian estimate of the mean field.
///
/// With a window set, evicted steps are replayed from their stored
/// `(x, z)` pair (the field is pure, so the recomputed columns cancel the
/// original contribution exactly).
#[derive(Debug, Clone, PartialEq)]
pub struct JacEstimatorState {
    n: u64,
    epsilon: f64,
    sum_diff: DMatrix<f64>,
    window: Option<usize>,
    recent: std::collections::VecDeque<(Vec<f64>, Vec<f64>)>,
    z_pert: Vec<f64>,
    h_pert: Vec<f64>,
    h_base_buf: Vec<f64>,
}

impl JacEstimatorState {
    pub fn new(dim: usize, epsilon: f64) -> Result<Self, EstimatorError> {
        Self::with_window(dim, epsilon, None)
    }

    pub fn with_window(
        dim: usize,
        epsilon: f64,
        window: Option<usize>,
    ) -> Result<Self, EstimatorError> {
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return Err(EstimatorError::InvalidArgument(format!(
                "perturbation must be positive, got {epsilon}"
            )));
        }
        Ok(JacEstimatorState {
            n: 0,
            epsilon,
            sum_diff: DMatrix::zeros(dim, dim),
            window,
            recent: std::collections::VecDeque::new(),
            z_pert: vec![0.0; dim],
            h_pert: vec![0.0; dim],
            h_base_buf: vec![0.0; dim],
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Observations currently averaged.
    pub fn count(&self) -> u64 {
        match self.window {
            Some(w) => self.n.min(w as u64),
            None => self.n,
        }
    }

    #[allow(clippy::needless_range_loop)] // two arrays and a matrix share the index
    fn accumulate(
        &mut self,
        loss: &LossSpec,
        x: &[f64],
        z: &[f64],
        h_base: &[f64],
        sign: f64,
    ) -> Result<(), EstimatorError> {
        let dim = self.sum_diff.nrows();
        for j in 0..dim {
            self.z_pert.copy_from_slice(z);
            self.z_pert[j] += self.epsilon;
            loss.field_into(x, &self.z_pert, &mut self.h_pert)?;
            for i in 0..dim {
                self.sum_diff[(i, j)] += sign * (self.h_pert[i] - h_base[i]) / self.epsilon;
            }
        }
        Ok(())
    }

    /// Accumulates the forward differences of one step. `h_base` must be
    /// the field value `H(x, z)` already computed for this `(x, z)` pair,
    /// so the same draw serves the iteration, the covariance and the
    /// Jacobian (common random numbers).
    pub fn update(
        &mut self,
        loss: &LossSpec,
        x: &[f64],
        z: &[f64],
        h_base: &[f64],
    ) -> Result<(), EstimatorError> {
        debug_assert_eq!(z.len(), self.sum_diff.nrows());
        debug_assert_eq!(h_base.len(), self.sum_diff.nrows());
        self.accumulate(loss, x, z, h_base, 1.0)?;
        self.n += 1;
        if let Some(w) = self.window {
            self.recent.push_back((x.to_vec(), z.to_vec()));
            if self.recent.len() > w {
                let (old_x, old_z) = self.recent.pop_front().expect("nonempty");
                let mut base = std::mem::take(&mut self.h_base_buf);
                loss.field_into(&old_x, &old_z, &mut base)?;
                let result = self.accumulate(loss, &old_x, &old_z, &base, -1.0);
                self.h_base_buf = base;
                result?;
            }
        }
        Ok(())
    }

    /// Current estimate `A_n`.
    pub fn jacobian(&self) -> Result<DMatrix<f64>, EstimatorError> {
        if self.count() == 0 {
            return Err(EstimatorError::Empty);
        }
        Ok(&self.sum_diff / self.count() as f64)
    }
}

/// `V = A^{-1} Sigma A^{-T}`, symmetrized, with an explicit condition gate.
pub fn asymptotic_cov(
    sigma: &DMatrix<f64>,
    a: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64), EstimatorError> {
    let svd = a.clone().svd(false, false);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(EstimatorError::NearSingularJacobian { condition });
    }
    let inv = a
        .clone()
        .try_inverse()
        .ok_or(EstimatorError::NearSingularJacobian { condition })?;
    let v = &inv * sigma * inv.transpose();
    Ok(((&v + v.transpose()) * 0.5, condition))
}

/// Which variance scaling the interval uses; the two differ by the gain
/// constant `c` of the step schedule (they coincide for `c = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiScaling {
    /// Half-width `q * sqrt(V_jj / (t n^gamma))`.
    AsPrinted,
    /// Half-width `q * sqrt(V_jj * gamma_n / t)` with `gamma_n = c / n^gamma`,
    /// the scaling under which the averaged estimator's CLT is normalized.
    GainScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }
}

/// Per-coordinate confidence intervals around an averaged estimate.
///
/// A zero variance diagonal yields the degenerate `[point, point]` interval;
/// a negative one is an error, never truncated.
#[allow(clippy::too_many_arguments)]
pub fn confidence_interval(
    estimate: &[f64],
    v: &DMatrix<f64>,
    averaging_t: f64,
    n_steps: u64,
    gamma: f64,
    gain_c: f64,
    alpha_level: f64,
    scaling: CiScaling,
) -> Result<Vec<ConfidenceInterval>, EstimatorError> {
    if !(alpha_level > 0.0 && alpha_level < 1.0) {
        return Err(EstimatorError::InvalidArgument(format!(
            "alpha level must lie in (0,1), got {alpha_level}"
        )));
    }
    if estimate.len() != v.nrows() {
        return Err(EstimatorError::InvalidArgument(format!(
            "estimate has {} coordinates but V is {}x{}",
            estimate.len(),
            v.nrows(),
            v.ncols()
        )));
    }
    let q = normal_quantile(1.0 - alpha_level / 2.0);
    let t_n_gamma = averaging_t * (n_steps as f64).powf(gamma);
    let denom_scale = match scaling {
        CiScaling::AsPrinted => 1.0 / t_n_gamma,
        CiScaling::GainScaled => gain_c / t_n_gamma,
    };
    estimate
        .iter()
        .enumerate()
        .map(|(j, &zj)| {
            let vjj = v[(j, j)];
            if vjj < 0.0 {
                return Err(EstimatorError::NegativeVariance {
                    index: j,
                    value: vjj,
                });
            }
            let hw = q * (vjj * denom_scale).sqrt();
            Ok(ConfidenceInterval {
                lower: zj - hw,
                upper: zj + hw,
            })
        })
        .collect()
}

/// Outcome of the step-gain diagnostic for the `gamma = 1` schedule.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainDiagnostic {
    pub gain_c: f64,
    /// Eigenvalues of `c A + I/2` as `(re, im)` pairs.
    pub shifted_eigenvalues: Vec<(f64, f64)>,
    /// All real parts strictly negative.
    pub hurwitz: bool,
    /// Whether `A^T P + P A = -I` admitted a solution.
    pub lyapunov_solved: bool,
    /// Positive definiteness of `c I - P`, when `P` exists.
    pub c_i_minus_p_positive_definite: Option<bool>,
    /// Both conditions hold. Advisory only: the run does not stop on failure.
    pub pass: bool,
}

/// Checks the two spectral conditions under which the unaveraged `gamma = 1`
/// schedule attains its central limit theorem: `c A + I/2` Hurwitz, and
/// `c I - P` positive definite for the Lyapunov solution `P`.
pub fn diagnose_gain(gain_c: f64, a: &DMatrix<f64>) -> GainDiagnostic {
    let dim = a.nrows();
    let shifted = a * gain_c + DMatrix::<f64>::identity(dim, dim) * 0.5;
    let eig = shifted.complex_eigenvalues();
    let shifted_eigenvalues: Vec<(f64, f64)> = eig.iter().map(|c| (c.re, c.im)).collect();
    let hurwitz = shifted_eigenvalues.iter().all(|&(re, _)| re < 0.0);

    // Lyapunov equation via the Kronecker identity
    //   vec(A^T P + P A) = (I (x) A^T + A^T (x) I) vec(P)
    let id = DMatrix::<f64>::identity(dim, dim);
    let at = a.transpose();
    let lhs = id.kronecker(&at) + at.kronecker(&id);
    let rhs = DMatrix::<f64>::identity(dim, dim) * -1.0;
    let rhs_vec = nalgebra::DVector::from_iterator(
        dim * dim,
        rhs.column_iter()
            .flat_map(|c| c.iter().copied().collect::<Vec<_>>()),
    );
    let lu = lhs.lu();
    let (lyapunov_solved, c_i_minus_p_positive_definite) = match lu.solve(&rhs_vec) {
        Some(p_vec) if p_vec.iter().all(|v| v.is_finite()) => {
            let p = DMatrix::from_fn(dim, dim, |i, j| p_vec[j * dim + i]);
            let p_sym = (&p + p.transpose()) * 0.5;
            let test = DMatrix::<f64>::identity(dim, dim) * gain_c - p_sym;
            let min_eig = test.symmetric_eigen().eigenvalues.min();
            (true, Some(min_eig > 0.0))
        }
        _ => (false, None),
    };
    let pass = hurwitz && c_i_minus_p_positive_definite == Some(true);
    GainDiagnostic {
        gain_c,
        shifted_eigenvalues,
        hurwitz,
        lyapunov_solved,
        c_i_minus_p_positive_definite,
        pass,
    }
}
