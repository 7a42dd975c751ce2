//! Normal-distribution helpers and related special functions.

use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::erf;

/// `sqrt(2)`.
pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// `sqrt(2 pi)`.
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF, evaluated through `erfc` so both tails keep full
/// relative accuracy.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / SQRT_2)
}

/// Standard normal survival function `1 - Phi(x)`.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erf::erfc(x / SQRT_2)
}

/// Standard normal quantile.
///
/// Starts from the library rational approximation and applies one Halley
/// refinement step, which brings the result to full double precision.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "normal_quantile requires p in (0,1)");
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    let mut q = n.inverse_cdf(p);
    // Halley's method on Phi(q) - p = 0; the correction is tiny, so a
    // single step suffices.
    let err = normal_cdf(q) - p;
    let pdf = normal_pdf(q);
    if pdf > 0.0 {
        let u = err / pdf;
        q -= u / (1.0 + 0.5 * q * u);
    }
    q
}

/// Two-sided Student-t quantile used for batch-means confidence intervals.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0 && df > 0.0);
    let t = StudentsT::new(0.0, 1.0, df).expect("valid Student t");
    t.inverse_cdf(p)
}

/// Weight function `w*(u)` used for departure-IDC interpolation:
///
/// `w*(u) = [(u^2+2u-1)(2 Phi(sqrt u)-1) + 2 phi(sqrt u) sqrt(u) (1+u) - u^2] / (2u)`.
///
/// The centered CDF term is evaluated as `erf(sqrt(u/2))` to avoid
/// cancellation, and a Taylor branch covers `u -> 0+` where the closed form
/// degenerates to 0/0. The result is clamped to `[0, 1]` against roundoff.
pub fn wstar(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u < 1e-8 {
        // w*(u) = (4/3) sqrt(2/pi) sqrt(u) + O(u^{3/2})
        let c = 4.0 / 3.0 * (2.0 / std::f64::consts::PI).sqrt();
        return c * u.sqrt();
    }
    let ru = u.sqrt();
    let centered = erf::erf((0.5 * u).sqrt()); // 2 Phi(sqrt u) - 1
    let val = ((u * u + 2.0 * u - 1.0) * centered + 2.0 * normal_pdf(ru) * ru * (1.0 + u)
        - u * u)
        / (2.0 * u);
    val.clamp(0.0, 1.0)
}
