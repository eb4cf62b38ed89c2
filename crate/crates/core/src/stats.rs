//! Scalar distribution functions and output-analysis helpers.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function via the complementary error
/// function (libm's erfc is good to a couple of ulps, which the bivariate
/// CDF accuracy budget relies on).
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile. `p` outside `[0, 1]` yields NaN; the endpoints
/// map to `-inf` / `+inf`. One Newton step on top of the library inverse
/// brings the result to machine precision.
pub fn normal_quantile(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let mut x = Normal::new(0.0, 1.0).unwrap().inverse_cdf(p);
    for _ in 0..2 {
        let pdf = normal_pdf(x);
        if pdf <= f64::MIN_POSITIVE {
            break;
        }
        x -= (normal_cdf(x) - p) / pdf;
    }
    x
}

/// Upper chi-square critical value at significance `alpha`.
pub fn chi_square_critical(df: f64, alpha: f64) -> f64 {
    ChiSquared::new(df).unwrap().inverse_cdf(1.0 - alpha)
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance (n - 1 denominator).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn std_dev(xs: &[f64]) -> f64 {
    variance(xs).sqrt()
}

/// Pearson correlation of two equally long samples.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "correlation needs paired samples");
    let (mx, my) = (mean(xs), mean(ys));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Center and scale a sample by its own mean and standard deviation.
pub fn standardize(xs: &[f64]) -> Vec<f64> {
    let m = mean(xs);
    let s = std_dev(xs);
    xs.iter().map(|&x| (x - m) / s).collect()
}

/// Two-sided Kolmogorov-Smirnov distance between the sample and the standard
/// normal distribution. The sample is typically standardized first.
pub fn ks_distance_standard_normal(xs: &[f64]) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal_cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

/// Empirical CDF evaluated at the sorted sample points, as `(x, F(x))` pairs.
pub fn ecdf_grid(xs: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    sorted
        .into_iter()
        .enumerate()
        .map(|(i, x)| (x, (i as f64 + 1.0) / n))
        .collect()
}

/// Histogram with bin edges and normalized densities.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub densities: Vec<f64>,
}

/// Freedman-Diaconis histogram: bin width `2 IQR / n^(1/3)`.
pub fn freedman_diaconis_histogram(xs: &[f64]) -> Histogram {
    assert!(xs.len() >= 2, "histogram needs at least two points");
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len();
    let q = |p: f64| -> f64 {
        let idx = p * (n - 1) as f64;
        let lo = idx.floor() as usize;
        let hi = idx.ceil() as usize;
        let w = idx - lo as f64;
        sorted[lo] * (1.0 - w) + sorted[hi] * w
    };
    let iqr = q(0.75) - q(0.25);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let span = (hi - lo).max(f64::MIN_POSITIVE);
    let width = if iqr > 0.0 {
        2.0 * iqr / (n as f64).cbrt()
    } else {
        span
    };
    let bins = ((span / width).ceil() as usize).clamp(1, 10_000);
    let width = span / bins as f64;
    let mut counts = vec![0u64; bins];
    for &x in &sorted {
        let k = (((x - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
    let densities = counts
        .iter()
        .map(|&c| c as f64 / (n as f64 * width))
        .collect();
    Histogram {
        edges,
        counts,
        densities,
    }
}
