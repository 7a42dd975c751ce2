//! Reference values for the mean steady-state virtual waiting time: the
//! exact M/M/1+GI formula and three closed-form approximations used as
//! comparison baselines (diffusion with patience-density scaling, hazard-rate
//! scaling, and an exponential-arrival surrogate with an SCV modification).

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{Error, Result};
use crate::model::QueueModel;
use crate::num::quad::{adaptive_simpson, gauss7, gauss7_points};
use crate::num::special::{normal_cdf, normal_pdf};

/// Benchmark method identifiers, mirrored in CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ExactMm1Gi,
    Wg,
    HazardRate,
    Hg,
    HgModified,
}

/// Outcome of one benchmark evaluation. `value` is `Some` exactly when the
/// method is applicable to the model; the note explains a `None`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub method: Method,
    pub value: Option<f64>,
    pub applicable: bool,
    pub note: String,
}

impl BenchmarkResult {
    fn ok(method: Method, value: f64) -> Self {
        BenchmarkResult {
            method,
            value: Some(value),
            applicable: true,
            note: String::new(),
        }
    }

    fn inapplicable(method: Method, note: impl Into<String>) -> Self {
        BenchmarkResult {
            method,
            value: None,
            applicable: false,
            note: note.into(),
        }
    }
}

/// Default cap on the exponent change across one quadrature panel.
const DE_CAP: f64 = 0.5;
/// Stop marching once the integrand sits this many nats below its peak.
const TAIL_CUTOFF: f64 = -66.0;
/// Hard stop against a non-decaying exponent.
const MAX_PANELS: usize = 4_000_000;
/// Floor under survival functions before taking logs.
const SF_FLOOR: f64 = 1e-300;

/// Computes `int_0^inf x e^{E(x)} dx / (extra_den + int_0^inf e^{E(x)} dx)`
/// where `E(x) = int_0^x slope(u) du` and `E(0) = 0`.
///
/// Both integrals are shifted by `e^{-r_shift}`, so `extra_den` must carry
/// the same shift. The integrand is covered by Gauss-Legendre panels marched
/// from the origin; each panel is narrowed until the exponent moves by at
/// most `de_cap`, which keeps the rule's relative error near machine level.
/// The march stops once `x` has passed `x_peak` (the maximizer of `E`, or 0
/// when `E` is decreasing) and the integrand has dropped 66 nats below the
/// peak value.
fn peak_ratio<F: Fn(f64) -> f64>(
    slope: &F,
    x_peak: f64,
    r_shift: f64,
    extra_den: f64,
    de_cap: f64,
) -> Result<f64> {
    let mut num = 0.0;
    let mut den = extra_den;
    let mut x = 0.0_f64;
    // Running value of E(x) - r_shift.
    let mut e = -r_shift;
    let mut width = 0.1 * (1.0 + x_peak);
    for _ in 0..MAX_PANELS {
        let mut w = width;
        let mut de = gauss7(slope, x, x + w);
        while de.abs() > de_cap && w > 1e-12 * (1.0 + x) {
            w *= 0.5;
            de = gauss7(slope, x, x + w);
        }
        // E at the panel's own nodes, via sub-integrals from the left edge.
        for (xi, wi) in gauss7_points(x, x + w) {
            let fi = (e + gauss7(slope, x, xi)).exp();
            num += wi * xi * fi;
            den += wi * fi;
        }
        e += de;
        x += w;
        if x > x_peak && e <= TAIL_CUTOFF {
            return Ok(num / den);
        }
        width = w * 1.4;
    }
    Err(Error::Numerical(
        "integrand exponent did not decay within the panel budget".into(),
    ))
}

/// Maximizer of `int_0^x (rho * sf(u) - 1) du`: the point where the scaled
/// patience survival crosses `1/rho`, or 0 in underload.
fn drift_peak(model: &QueueModel) -> Result<f64> {
    let rho = model.rho();
    if rho <= 1.0 {
        return Ok(0.0);
    }
    Ok(model.patience_base().quantile((rho - 1.0) / rho)? / model.alpha())
}

/// Exponent value at the peak, used to shift both integrals so the
/// integrand's maximum is `e^0`. Any shift cancels in the ratio, so the
/// quadrature tolerance here only affects conditioning.
fn peak_shift<F: Fn(f64) -> f64>(slope: &F, x_peak: f64) -> f64 {
    if x_peak > 0.0 {
        adaptive_simpson(slope, 0.0, x_peak, 1e-10 * (1.0 + x_peak))
    } else {
        0.0
    }
}

/// Mean steady-state virtual waiting time of the M/M/1+GI queue from the
/// explicit stationary formula
///
/// `E[Z] = int_0^inf x e^{E(x)} dx / (1/lambda + int_0^inf e^{E(x)} dx)`
///
/// with `E(x) = mu int_0^x (rho * sf(u) - 1) du`, where `sf` is the scaled
/// patience survival function. Requires Poisson arrivals (constant-one
/// arrival IDC) and exponential service.
pub fn exact_mm1_gi(model: &QueueModel) -> Result<f64> {
    exact_mm1_gi_with(model, DE_CAP)
}

/// Same as [`exact_mm1_gi`] with an explicit cap on the exponent change per
/// quadrature panel, the resolution knob used for convergence checks.
pub fn exact_mm1_gi_with(model: &QueueModel, de_cap: f64) -> Result<f64> {
    if !model.arrival_idc().is_constant_one() {
        return Err(Error::UnsupportedFamily(
            "exact_mm1_gi requires Poisson arrivals".into(),
        ));
    }
    if !matches!(
        model.service().spec(),
        DistributionSpec::Exponential { .. }
    ) {
        return Err(Error::UnsupportedFamily(
            "exact_mm1_gi requires exponential service".into(),
        ));
    }
    if !(de_cap > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "panel cap must be positive, got {de_cap}"
        )));
    }
    let mu = model.mu();
    let rho = model.rho();
    let slope = |u: f64| mu * (rho * model.patience_sf(u) - 1.0);
    let x_peak = drift_peak(model)?;
    let r = peak_shift(&slope, x_peak);
    // The 1/lambda term carries the same peak shift as the integrals; in
    // heavy overload it underflows to zero, matching its true weight.
    let extra_den = (-r).exp() / model.lambda();
    peak_ratio(&slope, x_peak, r, extra_den, de_cap)
}

/// Mills ratio `phi(s) / Phi(s)`, switching to the asymptotic series once
/// the CDF underflows.
fn mills_ratio(s: f64) -> f64 {
    if s > -30.0 {
        normal_pdf(s) / normal_cdf(s)
    } else {
        -s / (1.0 - 1.0 / (s * s) + 3.0 / (s * s * s * s))
    }
}

/// Diffusion approximation scaled by the patience density at zero:
///
/// `E[Z] ~ alpha^{-1/2} [ c / f(0) + phi(s)/Phi(s) * sqrt(cx2 / (2 mu f(0))) ]`
///
/// with `c = alpha^{-1/2} (rho - 1)`, `cx2 = rho ca2 + min(rho,1) cs2`, and
/// `s = sqrt(2 mu) c / sqrt(f(0) cx2)`. Applicable only when the base
/// patience density is positive at zero (linear CDF term).
pub fn wg_approx(model: &QueueModel) -> BenchmarkResult {
    let f0 = match model.zero_exp() {
        Ok(ze) if ze.k == 1 => ze.coeff,
        _ => {
            return BenchmarkResult::inapplicable(
                Method::Wg,
                "requires a patience density that is positive at zero",
            )
        }
    };
    let mu = model.mu();
    let rho = model.rho();
    let alpha = model.alpha();
    let c = (rho - 1.0) / alpha.sqrt();
    let cx2 = rho * model.c_a2() + rho.min(1.0) * model.c_s2();
    let s = (2.0 * mu).sqrt() * c / (f0 * cx2).sqrt();
    let value = (c / f0 + mills_ratio(s) * (cx2 / (2.0 * mu * f0)).sqrt()) / alpha.sqrt();
    BenchmarkResult::ok(Method::Wg, value.max(0.0))
}

/// Deterministic-fluid correction with hazard-rate scaling:
///
/// `E[Z] ~ int x e^{G(x)} dx / int e^{G(x)} dx` with
/// `G(x) = (2 mu / cx2) int_0^x (ln sf(u) + rho - 1) du` and
/// `cx2 = ca2 + cs2`. Zero survival values are floored before the log.
pub fn hazard_rate_approx(model: &QueueModel) -> BenchmarkResult {
    let mu = model.mu();
    let rho = model.rho();
    let fac = 2.0 * mu / (model.c_a2() + model.c_s2());
    let slope = |u: f64| fac * (model.patience_sf(u).max(SF_FLOOR).ln() + rho - 1.0);
    // G peaks where ln sf = 1 - rho, i.e. at the (1 - e^{1-rho}) quantile.
    let x_peak = if rho > 1.0 {
        match model.patience_base().quantile(1.0 - (1.0 - rho).exp()) {
            Ok(q) => q / model.alpha(),
            Err(err) => {
                return BenchmarkResult::inapplicable(Method::HazardRate, err.to_string())
            }
        }
    } else {
        0.0
    };
    let r = peak_shift(&slope, x_peak);
    match peak_ratio(&slope, x_peak, r, 0.0, DE_CAP) {
        Ok(v) => BenchmarkResult::ok(Method::HazardRate, v),
        Err(err) => BenchmarkResult::inapplicable(Method::HazardRate, err.to_string()),
    }
}

/// Exponential-arrival surrogate:
///
/// `E[Z] ~ int x e^{G(x)} dx / int e^{G(x)} dx` with
/// `G(x) = (2 mu / (cx2 min(rho,1))) int_0^x (rho * sf(u) - 1) du`,
/// where `cx2 = 1 + cs2`, or `ca2 + cs2` when `modified` is set.
pub fn hg_approx(model: &QueueModel, modified: bool) -> BenchmarkResult {
    let method = if modified {
        Method::HgModified
    } else {
        Method::Hg
    };
    let mu = model.mu();
    let rho = model.rho();
    let cx2 = if modified {
        model.c_a2() + model.c_s2()
    } else {
        1.0 + model.c_s2()
    };
    let fac = 2.0 * mu / (cx2 * rho.min(1.0));
    let slope = |u: f64| fac * (rho * model.patience_sf(u) - 1.0);
    let x_peak = match drift_peak(model) {
        Ok(x) => x,
        Err(err) => return BenchmarkResult::inapplicable(method, err.to_string()),
    };
    let r = peak_shift(&slope, x_peak);
    match peak_ratio(&slope, x_peak, r, 0.0, DE_CAP) {
        Ok(v) => BenchmarkResult::ok(method, v),
        Err(err) => BenchmarkResult::inapplicable(method, err.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::PatienceSpec;
    use crate::renewal::IdcCurve;

    fn mm1m(lambda: f64, mu: f64, alpha: f64) -> QueueModel {
        QueueModel::from_renewal(
            &DistributionSpec::Exponential { mean: 1.0 / lambda },
            &DistributionSpec::Exponential { mean: 1.0 / mu },
            &PatienceSpec::exponential(alpha),
        )
        .unwrap()
    }

    #[test]
    fn exact_underload_matches_closed_form() {
        // rho = 1/2, alpha -> 0: E(x) = -x/2, so num = 4, den = 1/lambda + 2
        // = 4 and E[Z] -> 1. The first-order alpha correction is
        // -(alpha rho / 2)(int x^3 e^{-x/2} - int x^2 e^{-x/2}) / 4 = -5 alpha.
        let alpha = 1e-12;
        let v = exact_mm1_gi(&mm1m(0.5, 1.0, alpha)).unwrap();
        assert!((v - 1.0).abs() < 1e-9, "v = {v}");
        assert!(((1.0 - v) - 5.0 * alpha).abs() < 0.01 * 5.0 * alpha, "v = {v}");
    }

    #[test]
    fn exact_overload_scales_like_log_over_alpha() {
        // rho = 2: the integrand concentrates at x* = ln 2 / alpha, so
        // alpha * E[Z] -> ln 2 as alpha -> 0.
        let alpha = 2.0_f64.powi(-13);
        let v = exact_mm1_gi(&mm1m(2.0, 1.0, alpha)).unwrap();
        let scaled = alpha * v;
        assert!((scaled - 0.693208).abs() < 1e-5, "scaled = {scaled}");
        let ln2 = std::f64::consts::LN_2;
        assert!((scaled - ln2).abs() < 0.02 * ln2, "scaled = {scaled}");
    }

    #[test]
    fn exact_nondecreasing_as_patience_lengthens() {
        // At critical load the mean wait grows as abandonment weakens.
        let mut last = 0.0;
        for k in [0, 2, 4, 6, 8] {
            let v = exact_mm1_gi(&mm1m(1.0, 1.0, 2.0_f64.powi(-k))).unwrap();
            assert!(v.is_finite() && v > 0.0);
            assert!(v > last, "alpha = 2^-{k}: {v} vs {last}");
            last = v;
        }
    }

    #[test]
    fn exact_converges_under_panel_refinement() {
        let m = mm1m(1.25, 1.0, 1.0 / 32.0);
        let coarse = exact_mm1_gi_with(&m, 0.5).unwrap();
        let fine = exact_mm1_gi_with(&m, 0.25).unwrap();
        assert!(
            ((coarse - fine) / fine).abs() < 1e-6,
            "coarse = {coarse}, fine = {fine}"
        );
    }

    #[test]
    fn exact_gates_on_poisson_arrivals_and_exponential_service() {
        let erlang_arrivals = QueueModel::from_renewal(
            &DistributionSpec::Erlang {
                shape: 2,
                mean: 1.0,
            },
            &DistributionSpec::Exponential { mean: 0.5 },
            &PatienceSpec::exponential(1.0),
        )
        .unwrap();
        assert!(matches!(
            exact_mm1_gi(&erlang_arrivals),
            Err(Error::UnsupportedFamily(_))
        ));

        let erlang_service = QueueModel::from_renewal(
            &DistributionSpec::Exponential { mean: 1.0 },
            &DistributionSpec::Erlang {
                shape: 2,
                mean: 0.5,
            },
            &PatienceSpec::exponential(1.0),
        )
        .unwrap();
        assert!(matches!(
            exact_mm1_gi(&erlang_service),
            Err(Error::UnsupportedFamily(_))
        ));

        // A constant-one IDC passed directly counts as Poisson.
        let via_idc = QueueModel::from_idc(
            1.0,
            IdcCurve::constant(1.0),
            &DistributionSpec::Exponential { mean: 1.0 },
            &PatienceSpec::exponential(0.5),
        )
        .unwrap();
        assert!(exact_mm1_gi(&via_idc).is_ok());
    }

    #[test]
    fn wg_critical_load_closed_form() {
        // rho = 1: c = 0, cx2 = 2, f(0) = 1, so the value collapses to
        // alpha^{-1/2} phi(0)/Phi(0) = alpha^{-1/2} sqrt(2/pi).
        let alpha = 1.0 / 16.0;
        let r = wg_approx(&mm1m(1.0, 1.0, alpha));
        assert!(r.applicable);
        let expect = 4.0 * (2.0 / std::f64::consts::PI).sqrt();
        let v = r.value.unwrap();
        assert!((v - expect).abs() < 1e-12 * expect, "v = {v}");
    }

    #[test]
    fn wg_requires_positive_density_at_zero() {
        let m = mm1m(0.9, 1.0, 0.5);
        assert!(wg_approx(&m).applicable);

        let erlang_patience = QueueModel::from_renewal(
            &DistributionSpec::Exponential { mean: 1.0 / 0.9 },
            &DistributionSpec::Exponential { mean: 1.0 },
            &PatienceSpec::erlang(2, 0.5),
        )
        .unwrap();
        let r = wg_approx(&erlang_patience);
        assert!(!r.applicable);
        assert!(r.value.is_none());
        assert!(!r.note.is_empty());
    }

    #[test]
    fn wg_tracks_exact_at_critical_load() {
        let m = mm1m(1.0, 1.0, 2.0_f64.powi(-13));
        let exact = exact_mm1_gi(&m).unwrap();
        let wg = wg_approx(&m).value.unwrap();
        assert!(((wg - exact) / exact).abs() < 0.05, "wg = {wg}, exact = {exact}");
    }

    #[test]
    fn wg_uses_the_arrival_scv() {
        // Constant IDC 4 gives ca2 = 4; at rho = 1 the closed form becomes
        // alpha^{-1/2} sqrt(2/pi) sqrt((4 + 1)/2).
        let alpha = 1.0 / 4.0;
        let m = QueueModel::from_idc(
            1.0,
            IdcCurve::constant(4.0),
            &DistributionSpec::Exponential { mean: 1.0 },
            &PatienceSpec::exponential(alpha),
        )
        .unwrap();
        let v = wg_approx(&m).value.unwrap();
        let expect = 2.0 * (2.0 / std::f64::consts::PI).sqrt() * (2.5_f64).sqrt();
        assert!((v - expect).abs() < 1e-12 * expect, "v = {v}");
    }

    #[test]
    fn hazard_rate_matches_direct_quadrature() {
        // M patience: ln sf = -alpha u, so G(x) = fac((rho-1)x - alpha x^2/2)
        // is available in closed form for an independent Simpson check.
        let (lambda, mu, alpha) = (0.8, 1.0, 0.5);
        let m = mm1m(lambda, mu, alpha);
        let v = hazard_rate_approx(&m).value.unwrap();
        // Truncate where G ~ -38; the coarse domain must stay small enough
        // that the adaptive rule's first probes see the integrand.
        let fac = 2.0 * mu / 2.0;
        let g = |x: f64| (fac * ((lambda / mu - 1.0) * x - alpha * x * x / 2.0)).exp();
        let num = adaptive_simpson(&|x: f64| x * g(x), 0.0, 12.0, 1e-13);
        let den = adaptive_simpson(&g, 0.0, 12.0, 1e-13);
        let oracle = num / den;
        assert!(((v - oracle) / oracle).abs() < 1e-8, "v = {v}, oracle = {oracle}");
    }

    #[test]
    fn hazard_rate_accepts_erlang_patience() {
        let m = QueueModel::from_renewal(
            &DistributionSpec::Exponential { mean: 1.0 / 1.1 },
            &DistributionSpec::Exponential { mean: 1.0 },
            &PatienceSpec::erlang(2, 0.25),
        )
        .unwrap();
        let r = hazard_rate_approx(&m);
        assert!(r.applicable);
        let v = r.value.unwrap();
        assert!(v.is_finite() && v > 0.0, "v = {v}");
    }

    #[test]
    fn hg_differs_from_exact_by_the_idle_mass() {
        // For M/M/1+M in overload the exponents coincide, so the only
        // difference is the 1/lambda term in the exact denominator; the
        // surrogate must sit strictly above.
        let m = mm1m(1.1, 1.0, 0.25);
        let exact = exact_mm1_gi(&m).unwrap();
        let hg = hg_approx(&m, false).value.unwrap();
        assert!(hg > exact, "hg = {hg}, exact = {exact}");
        assert!((hg - exact) / exact > 0.01, "hg = {hg}, exact = {exact}");
    }

    #[test]
    fn hg_modification_is_idle_for_poisson_arrivals() {
        let m = mm1m(0.9, 1.0, 0.5);
        let plain = hg_approx(&m, false).value.unwrap();
        let modified = hg_approx(&m, true).value.unwrap();
        assert_eq!(plain, modified);
    }

    #[test]
    fn hg_tracks_exact_in_overload() {
        let m = mm1m(2.0, 1.0, 2.0_f64.powi(-6));
        let exact = exact_mm1_gi(&m).unwrap();
        let hg = hg_approx(&m, false).value.unwrap();
        assert!(((hg - exact) / exact).abs() < 0.10, "hg = {hg}, exact = {exact}");
    }

    #[test]
    fn all_methods_finite_and_nonnegative_on_a_load_grid() {
        for lambda in [0.75, 1.0, 1.25] {
            for alpha in [1.0, 1.0 / 32.0] {
                let m = mm1m(lambda, 1.0, alpha);
                let mut values = vec![exact_mm1_gi(&m).unwrap()];
                for r in [
                    wg_approx(&m),
                    hazard_rate_approx(&m),
                    hg_approx(&m, false),
                    hg_approx(&m, true),
                ] {
                    assert!(r.applicable, "{:?}: {}", r.method, r.note);
                    values.push(r.value.unwrap());
                }
                for v in values {
                    assert!(
                        v.is_finite() && v >= 0.0,
                        "lambda = {lambda}, alpha = {alpha}: {v}"
                    );
                }
            }
        }
    }
}
