//! Poisson distribution function and its generalized inverse.

use super::SamplerError;
use statrs::function::gamma::gamma_ur;

/// Intensities up to this size use the direct pmf recurrence; larger ones
/// switch to the regularized-gamma identity plus binary search.
const DIRECT_LAMBDA_MAX: f64 = 30.0;

/// `P(N <= n)` for `N ~ Poisson(lambda)`, via the identity
/// `P(N <= n) = Q(n + 1, lambda)` with `Q` the upper regularized gamma.
pub fn poisson_cdf(lambda: f64, n: u64) -> f64 {
    gamma_ur(n as f64 + 1.0, lambda)
}

/// Smallest integer `n` with `P(N <= n) >= u`. `u` must lie in `[0, 1)`;
/// `u = 1` is rejected (the quantile is unbounded).
pub fn poisson_cdf_inverse(lambda: f64, u: f64) -> Result<u64, SamplerError> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SamplerError::InvalidIntensity(lambda));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(SamplerError::InvalidProbability(u));
    }
    Ok(poisson_cdf_inverse_unchecked(lambda, u))
}

/// Same as [`poisson_cdf_inverse`] but assumes validated arguments; used in
/// the sampling hot loop where `u` comes from a clamped normal CDF.
pub(crate) fn poisson_cdf_inverse_unchecked(lambda: f64, u: f64) -> u64 {
    if lambda <= DIRECT_LAMBDA_MAX {
        // pmf recurrence p_{n+1} = p_n * lambda / (n + 1)
        let mut n = 0u64;
        let mut p = (-lambda).exp();
        let mut cdf = p;
        loop {
            if cdf >= u {
                return n;
            }
            n += 1;
            p *= lambda / n as f64;
            let next = cdf + p;
            if next == cdf && p < 1e-300 {
                // cdf saturated below u in f64; no larger mass exists
                return n - 1;
            }
            cdf = next;
        }
    } else {
        // bracket then bisect on the gamma-based cdf
        let sd = lambda.sqrt();
        let mut hi = (lambda + 10.0 * sd + 10.0) as u64;
        while poisson_cdf(lambda, hi) < u {
            hi = hi.saturating_mul(2).max(hi + 1);
        }
        let mut lo = 0u64;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if poisson_cdf(lambda, mid) >= u {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }
}

/// Smallest `n` with `P(N <= n) >= p`; convenience alias used to choose the
/// truncation level of the calibration series.
pub fn poisson_quantile(lambda: f64, p: f64) -> Result<u64, SamplerError> {
    poisson_cdf_inverse(lambda, p)
}
