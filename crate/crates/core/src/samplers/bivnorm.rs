//! Bivariate standard normal distribution function.
//!
//! Port of Alan Genz's `BVND` routine (Drezner-Wesolowsky method with
//! Gauss-Legendre quadrature and a separate expansion for |rho| > 0.925),
//! accurate to about 1e-15 absolute.
#![allow(clippy::excessive_precision)] // quadrature tables kept verbatim

use super::SamplerError;
use crate::stats::normal_cdf;

// Gauss-Legendre (weight, node) pairs; the nodes are the negative half,
// the loop evaluates at 1 - x and 1 + x.
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];

const GL12: [(f64, f64); 6] = [
    (0.04717533638651177, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];

const GL20: [(f64, f64); 10] = [
    (0.01761400713915212, -0.9931285991850949),
    (0.04060142980038694, -0.9639719272779138),
    (0.06267204833410906, -0.9122344282513259),
    (0.08327674157670475, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.07652652113349733),
];

fn quadrature(rho_abs: f64) -> &'static [(f64, f64)] {
    if rho_abs < 0.3 {
        &GL6
    } else if rho_abs < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// Upper-orthant probability `P(X > dh, Y > dk)` for standard bivariate
/// normals with correlation `r`, `|r| < 1`.
fn bvnd(dh: f64, dk: f64, r: f64) -> f64 {
    let h = dh;
    let mut k = dk;
    let hk = h * k;
    let quad = quadrature(r.abs());
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut bvn = 0.0;

    if r.abs() <= 0.925 {
        if r.abs() > 0.0 {
            let hs = (h * h + k * k) / 2.0;
            let asr = 0.5 * r.asin();
            for &(w, x) in quad {
                for is in [-1.0, 1.0] {
                    let sn = (asr * (is * x + 1.0)).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / two_pi;
        }
        bvn + normal_cdf(-h) * normal_cdf(-k)
    } else {
        if r < 0.0 {
            k = -k;
        }
        let hk = if r < 0.0 { -hk } else { hk };
        if r.abs() < 1.0 {
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let b_s = (h - k) * (h - k);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 16.0;
            let asr = -0.5 * (b_s / a_s + hk);
            if asr > -100.0 {
                bvn = a
                    * asr.exp()
                    * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0
                        + c * d * a_s * a_s / 5.0);
            }
            if -hk < 100.0 {
                let b = b_s.sqrt();
                bvn -= (-0.5 * hk).exp()
                    * two_pi.sqrt()
                    * normal_cdf(-b / a)
                    * b
                    * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
            }
            a /= 2.0;
            for &(w, x) in quad {
                for is in [-1.0, 1.0] {
                    let xs = (a * (is * x + 1.0)) * (a * (is * x + 1.0));
                    let rs = (1.0 - xs).sqrt();
                    let asr = -0.5 * (b_s / xs + hk);
                    if asr > -100.0 {
                        bvn += a
                            * w
                            * asr.exp()
                            * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                                - (1.0 + c * xs * (1.0 + d * xs)));
                    }
                }
            }
            bvn /= -two_pi;
        }
        if r > 0.0 {
            bvn + normal_cdf(-h.max(k))
        } else {
            bvn = -bvn;
            if k > h {
                bvn += normal_cdf(k) - normal_cdf(h);
            }
            bvn
        }
    }
}

/// `P(X <= a, Y <= b)` for a standard bivariate normal pair with correlation
/// `rho`. The limits may be infinite; `|rho| >= 1` is rejected.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> Result<f64, SamplerError> {
    if !(rho.abs() < 1.0) {
        return Err(SamplerError::InvalidCorrelation(rho));
    }
    if a.is_nan() || b.is_nan() {
        return Err(SamplerError::InvalidSpec(
            "bivariate normal limits must not be NaN".into(),
        ));
    }
    if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    if a == f64::INFINITY && b == f64::INFINITY {
        return Ok(1.0);
    }
    if a == f64::INFINITY {
        return Ok(normal_cdf(b));
    }
    if b == f64::INFINITY {
        return Ok(normal_cdf(a));
    }
    Ok(bvnd(-a, -b, rho).clamp(0.0, 1.0))
}
