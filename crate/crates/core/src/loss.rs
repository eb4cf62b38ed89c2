//! Multivariate loss families, their gradients, and the root-finding field.
//!
//! Two permutation-invariant families are provided. With systemic weight
//! `alpha >= 0` and (for the exponential family) risk aversion `beta > 0`:
//!
//! ```text
//! exponential:        l(x) = [sum_i exp(beta x_i) + alpha exp(beta sum x)] / (1 + alpha)
//!                            - (alpha + d) / (alpha + 1)
//! pospart_quadratic:  l(x) = sum_i x_i + 1/2 sum_i (x_i^+)^2 + alpha sum_{i<j} x_i^+ x_j^+
//! ```
//!
//! Both are increasing, convex, vanish at the origin and dominate
//! `sum x_k - c` for a finite constant `c` stored on the spec.
//!
//! The composite state `z = (m, lambda)` is laid out as a flat vector of
//! length `d + 1` with the multiplier last; every operation in this crate
//! uses that layout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exponent bound past which the exponential family would overflow `f64`.
/// Larger arguments indicate a misconfigured run (the projection rectangle
/// keeps `m` bounded) and are reported instead of silently saturating.
const EXP_ARG_MAX: f64 = 700.0;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite loss evaluation (exponent {exponent:.3e} exceeds the overflow guard)")]
    NonFiniteResult { exponent: f64 },
    #[error("invalid loss specification: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Exponential,
    PospartQuadratic,
}

/// A validated multivariate loss function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub kind: LossKind,
    pub d: usize,
    pub alpha: f64,
    /// Risk-aversion coefficient; required by the exponential family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Witness constant for the linear lower bound `l(x) >= sum x_k - c`.
    /// Filled during validation when absent; used only by property checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower_bound_c: Option<f64>,
}

impl LossSpec {
    pub fn exponential(d: usize, alpha: f64, beta: f64) -> Result<Self, LossError> {
        let mut spec = LossSpec {
            kind: LossKind::Exponential,
            d,
            alpha,
            beta: Some(beta),
            lower_bound_c: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn pospart_quadratic(d: usize, alpha: f64) -> Result<Self, LossError> {
        let mut spec = LossSpec {
            kind: LossKind::PospartQuadratic,
            d,
            alpha,
            beta: None,
            lower_bound_c: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks parameter ranges and fills `lower_bound_c` when absent.
    pub fn validate(&mut self) -> Result<(), LossError> {
        if self.d < 2 {
            return Err(LossError::InvalidSpec(format!(
                "dimension must be at least 2, got {}",
                self.d
            )));
        }
        if !(self.alpha >= 0.0) {
            return Err(LossError::InvalidSpec(format!(
                "alpha must be nonnegative, got {}",
                self.alpha
            )));
        }
        match self.kind {
            LossKind::Exponential => match self.beta {
                Some(b) if b > 0.0 && b.is_finite() => {}
                other => {
                    return Err(LossError::InvalidSpec(format!(
                        "exponential loss needs beta > 0, got {other:?}"
                    )))
                }
            },
            LossKind::PospartQuadratic => {}
        }
        if self.lower_bound_c.is_none() {
            self.lower_bound_c = Some(self.default_lower_bound_c());
        }
        Ok(())
    }

    /// A valid witness for the linear lower bound.
    ///
    /// `g(x) = l(x) - sum x_k` is convex and permutation invariant, so it
    /// attains its infimum on the diagonal; a one-dimensional bisection on
    /// the diagonal derivative locates it. For the positive-part family the
    /// surplus terms are nonnegative, hence `c = 0`.
    fn default_lower_bound_c(&self) -> f64 {
        match self.kind {
            LossKind::PospartQuadratic => 0.0,
            LossKind::Exponential => {
                let d = self.d as f64;
                let beta = self.beta.expect("validated");
                let a = self.alpha;
                // phi'(s) = beta/(1+a) (d e^{beta s} + a d e^{beta d s}) - d, increasing
                let dphi = |s: f64| {
                    beta / (1.0 + a) * (d * (beta * s).exp() + a * d * (beta * d * s).exp()) - d
                };
                let (mut lo, mut hi) = (-60.0 / beta, 60.0 / (beta * d));
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if dphi(mid) < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let s = 0.5 * (lo + hi);
                let phi = ((d * (beta * s).exp() + a * (beta * d * s).exp()) / (1.0 + a))
                    - (a + d) / (1.0 + a)
                    - d * s;
                // tiny slack absorbs the bisection and rounding error
                -phi + 1e-9
            }
        }
    }

    fn check_dim(&self, got: usize) -> Result<(), LossError> {
        if got != self.d {
            return Err(LossError::DimensionMismatch {
                expected: self.d,
                got,
            });
        }
        Ok(())
    }

    /// Evaluates `l(x)`.
    pub fn eval(&self, x: &[f64]) -> Result<f64, LossError> {
        self.check_dim(x.len())?;
        match self.kind {
            LossKind::Exponential => {
                let beta = self.beta.ok_or_else(|| {
                    LossError::InvalidSpec("exponential loss without beta".into())
                })?;
                let mut sum_exp = 0.0;
                let mut sum_x = 0.0;
                for &xi in x {
                    let e = beta * xi;
                    if e > EXP_ARG_MAX {
                        return Err(LossError::NonFiniteResult { exponent: e });
                    }
                    sum_exp += e.exp();
                    sum_x += xi;
                }
                let es = beta * sum_x;
                if es > EXP_ARG_MAX {
                    return Err(LossError::NonFiniteResult { exponent: es });
                }
                let v = (sum_exp + self.alpha * es.exp()) / (1.0 + self.alpha)
                    - (self.alpha + self.d as f64) / (self.alpha + 1.0);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(LossError::NonFiniteResult { exponent: es })
                }
            }
            LossKind::PospartQuadratic => {
                let mut s = 0.0;
                let mut sp = 0.0;
                let mut sp2 = 0.0;
                for &xi in x {
                    s += xi;
                    let p = xi.max(0.0);
                    sp += p;
                    sp2 += p * p;
                }
                // sum_{i<j} x_i^+ x_j^+ = ((sum x^+)^2 - sum (x^+)^2) / 2
                Ok(s + 0.5 * sp2 + 0.5 * self.alpha * (sp * sp - sp2))
            }
        }
    }

    /// Analytic gradient of `l` at `x`.
    ///
    /// The positive part uses subgradient value 0 at the kink `x_i = 0`
    /// (a measure-zero event under the continuous scenario laws).
    pub fn grad(&self, x: &[f64]) -> Result<Vec<f64>, LossError> {
        let mut out = vec![0.0; self.d];
        self.grad_into(x, &mut out)?;
        Ok(out)
    }

    pub fn grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), LossError> {
        self.check_dim(x.len())?;
        self.check_dim(out.len())?;
        match self.kind {
            LossKind::Exponential => {
                let beta = self.beta.ok_or_else(|| {
                    LossError::InvalidSpec("exponential loss without beta".into())
                })?;
                let mut sum_x = 0.0;
                for (o, &xi) in out.iter_mut().zip(x) {
                    let e = beta * xi;
                    if e > EXP_ARG_MAX {
                        return Err(LossError::NonFiniteResult { exponent: e });
                    }
                    *o = e.exp();
                    sum_x += xi;
                }
                let es = beta * sum_x;
                if es > EXP_ARG_MAX {
                    return Err(LossError::NonFiniteResult { exponent: es });
                }
                let shared = self.alpha * es.exp();
                let scale = beta / (1.0 + self.alpha);
                for o in out.iter_mut() {
                    *o = scale * (*o + shared);
                }
                Ok(())
            }
            LossKind::PospartQuadratic => {
                let mut sp = 0.0;
                for &xi in x {
                    sp += xi.max(0.0);
                }
                for (o, &xi) in out.iter_mut().zip(x) {
                    let p = xi.max(0.0);
                    let ind = if xi > 0.0 { 1.0 } else { 0.0 };
                    *o = 1.0 + p + self.alpha * ind * (sp - p);
                }
                Ok(())
            }
        }
    }

    /// The random field whose expectation vanishes at the optimum:
    /// first `d` entries `lambda * grad l(x - m) - 1`, last entry `l(x - m)`.
    pub fn field(&self, x: &[f64], z: &AllocationPoint) -> Result<FieldValue, LossError> {
        let mut out = vec![0.0; self.d + 1];
        self.field_into(x, z.as_flat(), &mut out)?;
        Ok(FieldValue { v: out })
    }

    /// Allocation-free field evaluation; `z` and `out` have length `d + 1`.
    ///
    /// Shares the exponential terms between the gradient and the loss value,
    /// which matters in the simulation hot loop.
    pub fn field_into(&self, x: &[f64], z: &[f64], out: &mut [f64]) -> Result<(), LossError> {
        self.check_dim(x.len())?;
        let d = self.d;
        if z.len() != d + 1 || out.len() != d + 1 {
            return Err(LossError::DimensionMismatch {
                expected: d + 1,
                got: if z.len() != d + 1 { z.len() } else { out.len() },
            });
        }
        let lambda = z[d];
        match self.kind {
            LossKind::Exponential => {
                let beta = self.beta.ok_or_else(|| {
                    LossError::InvalidSpec("exponential loss without beta".into())
                })?;
                let mut sum_exp = 0.0;
                let mut sum_y = 0.0;
                for i in 0..d {
                    let y = x[i] - z[i];
                    let e = beta * y;
                    if e > EXP_ARG_MAX {
                        return Err(LossError::NonFiniteResult { exponent: e });
                    }
                    out[i] = e.exp();
                    sum_exp += out[i];
                    sum_y += y;
                }
                let es = beta * sum_y;
                if es > EXP_ARG_MAX {
                    return Err(LossError::NonFiniteResult { exponent: es });
                }
                let shared = self.alpha * es.exp();
                let scale = beta / (1.0 + self.alpha);
                for o in out[..d].iter_mut() {
                    *o = lambda * scale * (*o + shared) - 1.0;
                }
                out[d] = (sum_exp + shared) / (1.0 + self.alpha)
                    - (self.alpha + d as f64) / (self.alpha + 1.0);
                if out[d].is_finite() {
                    Ok(())
                } else {
                    Err(LossError::NonFiniteResult { exponent: es })
                }
            }
            LossKind::PospartQuadratic => {
                let mut s = 0.0;
                let mut sp = 0.0;
                let mut sp2 = 0.0;
                for i in 0..d {
                    let y = x[i] - z[i];
                    out[i] = y;
                    s += y;
                    let p = y.max(0.0);
                    sp += p;
                    sp2 += p * p;
                }
                for o in out[..d].iter_mut() {
                    let y = *o;
                    let p = y.max(0.0);
                    let ind = if y > 0.0 { 1.0 } else { 0.0 };
                    *o = lambda * (1.0 + p + self.alpha * ind * (sp - p)) - 1.0;
                }
                out[d] = s + 0.5 * sp2 + 0.5 * self.alpha * (sp * sp - sp2);
                Ok(())
            }
        }
    }
}

/// Value of the field `H(X, z)`: a vector of length `d + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldValue {
    pub v: Vec<f64>,
}

impl FieldValue {
    /// The last entry, `l(x - m)`.
    pub fn loss_component(&self) -> f64 {
        *self.v.last().expect("field value is nonempty")
    }
}

/// The composite state `z = (m, lambda)`, stored flat with `lambda` last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AllocationPointRepr", into = "AllocationPointRepr")]
pub struct AllocationPoint {
    flat: Vec<f64>,
}

impl AllocationPoint {
    pub fn new(m: Vec<f64>, lambda: f64) -> Result<Self, LossError> {
        let mut flat = m;
        flat.push(lambda);
        Self::from_flat(flat)
    }

    pub fn from_flat(flat: Vec<f64>) -> Result<Self, LossError> {
        if flat.len() < 2 {
            return Err(LossError::InvalidSpec(
                "allocation point needs at least one allocation entry and a multiplier".into(),
            ));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(LossError::InvalidSpec(
                "allocation point entries must be finite".into(),
            ));
        }
        let lambda = *flat.last().unwrap();
        if lambda < 0.0 {
            return Err(LossError::InvalidSpec(format!(
                "lambda must be nonnegative, got {lambda}"
            )));
        }
        Ok(AllocationPoint { flat })
    }

    /// Allocation dimension `d`.
    pub fn dim(&self) -> usize {
        self.flat.len() - 1
    }

    pub fn m(&self) -> &[f64] {
        &self.flat[..self.flat.len() - 1]
    }

    pub fn lambda(&self) -> f64 {
        *self.flat.last().unwrap()
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn into_flat(self) -> Vec<f64> {
        self.flat
    }
}

#[derive(Serialize, Deserialize)]
struct AllocationPointRepr {
    m: Vec<f64>,
    lambda: f64,
}

impl TryFrom<AllocationPointRepr> for AllocationPoint {
    type Error = LossError;
    fn try_from(r: AllocationPointRepr) -> Result<Self, LossError> {
        AllocationPoint::new(r.m, r.lambda)
    }
}

impl From<AllocationPoint> for AllocationPointRepr {
    fn from(p: AllocationPoint) -> Self {
        let lambda = p.lambda();
        let mut m = p.flat;
        m.pop();
        AllocationPointRepr { m, lambda }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;
    use rand_distr::StandardNormal;

    fn exp_loss() -> LossSpec {
        LossSpec::exponential(2, 1.0, 1.0).unwrap()
    }

    fn quad_loss() -> LossSpec {
        LossSpec::pospart_quadratic(2, 1.0).unwrap()
    }

    #[test]
    fn eval_reference_values() {
        assert_abs_diff_eq!(exp_loss().eval(&[0.0, 0.0]).unwrap(), 0.0, epsilon = 1e-15);
        // 2 + (1 + 1)/2 + 1*1
        assert_abs_diff_eq!(quad_loss().eval(&[1.0, 1.0]).unwrap(), 4.0, epsilon = 1e-15);
        // negative parts vanish, pure sum
        assert_abs_diff_eq!(
            quad_loss().eval(&[-1.0, -2.0]).unwrap(),
            -3.0,
            epsilon = 1e-15
        );
        // l(0) = 0 for both families
        assert_abs_diff_eq!(quad_loss().eval(&[0.0, 0.0]).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn grad_reference_values() {
        let g = exp_loss().grad(&[0.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[1], 1.0, epsilon = 1e-15);
        let g = quad_loss().grad(&[-1.0, -2.0]).unwrap();
        assert_eq!(g, vec![1.0, 1.0]);
    }

    #[test]
    fn field_reference_values() {
        let z = AllocationPoint::new(vec![0.0, 0.0], 1.0).unwrap();
        let f = exp_loss().field(&[0.0, 0.0], &z).unwrap();
        for v in &f.v {
            assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15);
        }

        // lambda = 0 kills the gradient term; l(0) = 0
        let z0 = AllocationPoint::new(vec![0.3, -0.2], 0.0).unwrap();
        for loss in [exp_loss(), quad_loss()] {
            let f = loss.field(&[0.3, -0.2], &z0).unwrap();
            assert_eq!(&f.v[..2], &[-1.0, -1.0]);
            assert_abs_diff_eq!(f.loss_component(), 0.0, epsilon = 1e-15);
        }

        let quad0 = LossSpec::pospart_quadratic(2, 0.0).unwrap();
        let z = AllocationPoint::new(vec![0.0, 0.0], 1.0).unwrap();
        let f = quad0.field(&[1.0, 0.0], &z).unwrap();
        assert_abs_diff_eq!(f.v[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.v[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.v[2], 1.5, epsilon = 1e-15);
    }

    #[test]
    fn field_last_entry_equals_eval_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for loss in [exp_loss(), quad_loss()] {
            for _ in 0..200 {
                let x: Vec<f64> = (0..2)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let m: Vec<f64> = (0..2)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let lambda: f64 = rng.random::<f64>();
                let z = AllocationPoint::new(m.clone(), lambda).unwrap();
                let f = loss.field(&x, &z).unwrap();
                let y: Vec<f64> = x.iter().zip(&m).map(|(a, b)| a - b).collect();
                assert_eq!(f.loss_component(), loss.eval(&y).unwrap());
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_kinks() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let losses = [
            LossSpec::exponential(3, 0.7, 1.3).unwrap(),
            LossSpec::pospart_quadratic(3, 0.4).unwrap(),
        ];
        for loss in &losses {
            let mut checked = 0;
            while checked < 1000 {
                let x: Vec<f64> = (0..3)
                    .map(|_| rng.sample::<f64, _>(StandardNormal) * 0.8)
                    .collect();
                if loss.kind == LossKind::PospartQuadratic && x.iter().any(|v| v.abs() <= 1e-3) {
                    continue;
                }
                let g = loss.grad(&x).unwrap();
                for i in 0..3 {
                    let h = 1e-6 * (1.0 + x[i].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (loss.eval(&xp).unwrap() - loss.eval(&xm).unwrap()) / (2.0 * h);
                    let denom = g[i].abs().max(1e-8);
                    assert!(
                        ((g[i] - fd) / denom).abs() <= 1e-5,
                        "{:?} at {:?}: grad {} vs fd {}",
                        loss.kind,
                        x,
                        g[i],
                        fd
                    );
                }
                checked += 1;
            }
        }
    }

    #[test]
    fn monotone_convex_and_lower_bounded() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let losses = [
            LossSpec::exponential(2, 1.0, 1.0).unwrap(),
            LossSpec::exponential(4, 0.3, 2.0).unwrap(),
            LossSpec::pospart_quadratic(2, 1.0).unwrap(),
            LossSpec::pospart_quadratic(5, 0.0).unwrap(),
        ];
        for loss in &losses {
            let d = loss.d;
            let c = loss.lower_bound_c.unwrap();
            for _ in 0..300 {
                let x: Vec<f64> = (0..d)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let bump: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
                let y: Vec<f64> = x.iter().zip(&bump).map(|(a, b)| a + b).collect();
                let lx = loss.eval(&x).unwrap();
                let ly = loss.eval(&y).unwrap();
                // monotone
                assert!(lx <= ly + 1e-12);
                // lower bound with the stored witness constant
                let sum: f64 = x.iter().sum();
                assert!(lx >= sum - c - 1e-9, "l = {lx}, sum - c = {}", sum - c);
                // convexity along a random segment
                let t: f64 = rng.random::<f64>();
                let mid: Vec<f64> = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| t * a + (1.0 - t) * b)
                    .collect();
                let lm = loss.eval(&mid).unwrap();
                assert!(lm <= t * lx + (1.0 - t) * ly + 1e-12);
            }
        }
    }

    #[test]
    fn permutation_invariance() {
        // swapping the two coordinates is bit-exact (one commutative
        // addition); longer permutations reassociate the sums, so those are
        // held to a couple of ulps
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for loss in [
            LossSpec::exponential(2, 0.5, 1.1).unwrap(),
            LossSpec::pospart_quadratic(2, 0.8).unwrap(),
        ] {
            for _ in 0..200 {
                let x = [
                    rng.sample::<f64, _>(StandardNormal),
                    rng.sample::<f64, _>(StandardNormal),
                ];
                assert_eq!(loss.eval(&x).unwrap(), loss.eval(&[x[1], x[0]]).unwrap());
            }
        }
        for loss in [
            LossSpec::exponential(4, 0.5, 1.1).unwrap(),
            LossSpec::pospart_quadratic(4, 0.8).unwrap(),
        ] {
            for _ in 0..200 {
                let x: Vec<f64> = (0..4)
                    .map(|_| rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let mut perm: Vec<usize> = (0..4).collect();
                perm.shuffle(&mut rng);
                let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
                let (a, b) = (loss.eval(&x).unwrap(), loss.eval(&px).unwrap());
                let scale = a.abs().max(1.0);
                assert!((a - b).abs() <= 4.0 * f64::EPSILON * scale, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn field_permutation_equivariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let loss = LossSpec::exponential(3, 0.6, 0.9).unwrap();
        for _ in 0..100 {
            let x: Vec<f64> = (0..3)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let m: Vec<f64> = (0..3)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect();
            let lambda = rng.random::<f64>() * 2.0;
            let mut perm: Vec<usize> = (0..3).collect();
            perm.shuffle(&mut rng);
            let px: Vec<f64> = perm.iter().map(|&i| x[i]).collect();
            let pm: Vec<f64> = perm.iter().map(|&i| m[i]).collect();
            let f = loss
                .field(&x, &AllocationPoint::new(m, lambda).unwrap())
                .unwrap();
            let pf = loss
                .field(&px, &AllocationPoint::new(pm, lambda).unwrap())
                .unwrap();
            // reassociating the exponent sum costs an ulp that the
            // exponential amplifies; bound relative to the largest term
            let magnitude = f.v.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
            let tol = 1e-12 * magnitude;
            for (j, &i) in perm.iter().enumerate() {
                assert!((pf.v[j] - f.v[i]).abs() <= tol, "{} vs {}", pf.v[j], f.v[i]);
            }
            assert!((pf.v[3] - f.v[3]).abs() <= tol);
        }
    }

    #[test]
    fn overflow_is_an_error_not_infinity() {
        let loss = exp_loss();
        let err = loss.eval(&[400.0, 400.0]).unwrap_err();
        assert!(matches!(err, LossError::NonFiniteResult { .. }));
        let err = loss.eval(&[800.0, -800.0]).unwrap_err();
        assert!(matches!(err, LossError::NonFiniteResult { .. }));
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let loss = exp_loss();
        assert!(matches!(
            loss.eval(&[1.0, 2.0, 3.0]),
            Err(LossError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            loss.grad(&[1.0]),
            Err(LossError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lambda_must_be_nonnegative() {
        assert!(AllocationPoint::new(vec![0.0, 0.0], -0.1).is_err());
        assert!(AllocationPoint::new(vec![0.0, 0.0], 0.0).is_ok());
    }

    #[test]
    fn allocation_point_serializes_with_named_fields() {
        let z = AllocationPoint::new(vec![0.25, 0.5], 1.5).unwrap();
        let json = serde_json::to_string(&z).unwrap();
        assert_eq!(json, r#"{"m":[0.25,0.5],"lambda":1.5}"#);
        let back: AllocationPoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back, z);
    }
}
