//! Fixed-point solvers for the two steady-state delay approximations,
//! calibration of the robustness parameter `b`, and derived performance
//! measures (abandonment probability, waiting time, queue length).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::QueueModel;
use crate::num::opt::{sup_positive, SupResult};
use crate::num::quad::adaptive_simpson;
use crate::renewal::{effective_idw_surrogate, IdwCurve};
use crate::wck::{scale_map, ParameterTuple, WckSurface};

/// Which fixed-point formulation produced a solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    First,
    Refined,
}

/// Solution of one steady-state fixed point.
///
/// The solver guarantees `z >= 0`, `u_star >= 0`, and
/// `residual <= 1e-6 * max(1, z)`; a run that cannot meet the residual
/// bound returns an error instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RqSolution {
    /// Approximate mean steady-state virtual waiting time (time units).
    pub z: f64,
    /// Maximizer of the inner supremum at the fixed point.
    pub u_star: f64,
    /// Fixed-point defect `|Psi(z) - z|` at the reported `z`.
    pub residual: f64,
    /// Number of outer objective evaluations.
    pub iterations: u32,
    /// Robustness parameter the solve used.
    pub b_used: f64,
    /// Formulation that produced this solution.
    pub algorithm: Algorithm,
    /// Scaled drift passed to the reduction surface (refined only).
    pub c_tilde: Option<f64>,
    /// Set when `c_tilde` fell outside the surface grid and was clamped
    /// to its edge.
    pub c_tilde_clamped: bool,
}

/// Performance measures derived from a fixed-point solution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DerivedMeasures {
    /// Abandonment probability `F_alpha(z)`.
    pub p_abandon: f64,
    /// Mean waiting time of served customers.
    pub mean_wait_served: f64,
    /// Mean effective queue length.
    pub mean_queue_effective: f64,
}

/// Absolute tolerance of the outer bisection on `z`.
const Z_TOL: f64 = 1e-9;
/// Relative tolerance of the inner supremum search.
const SUP_REL_TOL: f64 = 1e-10;
/// Survival-function floor keeping `u / F_bar` finite.
const SF_FLOOR: f64 = 1e-300;
/// Residual acceptance bound, relative to `max(1, z)`.
const RESIDUAL_BOUND: f64 = 1e-6;

fn validate_b(b: f64) -> Result<()> {
    if !(b >= 0.0) || !b.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "robustness parameter b must be nonnegative and finite, got {b}"
        )));
    }
    Ok(())
}

fn factorial(k: u32) -> f64 {
    (2..=k).map(|j| j as f64).product::<f64>().max(1.0)
}

struct FixedPoint {
    z: f64,
    u_star: f64,
    residual: f64,
    iterations: u32,
}

/// Solves `z = max(0, sup_u objective(z, u))` for a map that is
/// nonincreasing in `z`, by bisection to absolute tolerance [`Z_TOL`].
///
/// `hi_seed` starts the upper bracket; it is doubled until the map falls
/// below the diagonal (a no-abandonment bound plus one mean patience
/// already satisfies this, so underloaded callers pay one check).
fn solve_fixed_point<F: Fn(f64) -> SupResult>(psi: F, hi_seed: f64) -> Result<FixedPoint> {
    let clamp = |s: &SupResult| s.value.max(0.0);
    let mut iterations = 0u32;

    let at_zero = psi(0.0);
    iterations += 1;
    if clamp(&at_zero) <= 0.0 {
        return Ok(FixedPoint {
            z: 0.0,
            u_star: 0.0,
            residual: 0.0,
            iterations,
        });
    }

    let mut hi = hi_seed.max(Z_TOL);
    let mut at_hi = psi(hi);
    iterations += 1;
    let mut doublings = 0;
    while clamp(&at_hi) >= hi {
        hi *= 2.0;
        if !hi.is_finite() || doublings > 1100 {
            return Err(Error::Bracket(format!(
                "no upper bracket for the fixed point below z = {hi}"
            )));
        }
        at_hi = psi(hi);
        iterations += 1;
        doublings += 1;
    }

    let mut lo = 0.0;
    while hi - lo > Z_TOL && iterations < 10_000 {
        let mid = 0.5 * (lo + hi);
        let at_mid = psi(mid);
        iterations += 1;
        if clamp(&at_mid) >= mid {
            lo = mid;
        } else {
            hi = mid;
            at_hi = at_mid;
        }
    }

    // Report at the upper end, where the map is guaranteed finite.
    let value = clamp(&at_hi);
    let residual = (value - hi).abs();
    let u_star = if at_hi.value > 0.0 { at_hi.arg } else { 0.0 };
    if residual > RESIDUAL_BOUND * hi.max(1.0) {
        return Err(Error::Numerical(format!(
            "fixed-point residual {residual} exceeds {RESIDUAL_BOUND} * max(1, z) at z = {hi}"
        )));
    }
    Ok(FixedPoint {
        z: hi,
        u_star,
        residual,
        iterations,
    })
}

/// First steady-state fixed point:
/// `z = sup_{u >= 0} { rho u - u / F_bar(z) + b sqrt(rho u I_w(lambda u) / mu) }`,
/// where the workload dispersion at count `lambda u` equals the supplied
/// physical-time curve at `u`.
///
/// The map is nonincreasing in `z`, so the fixed point is unique; the
/// outer root is found by bisection, the inner supremum by a doubling
/// ladder plus golden-section in `log u`.
pub fn solve_first_rq(model: &QueueModel, idw: &IdwCurve, b: f64) -> Result<RqSolution> {
    validate_b(b)?;
    let rho = model.rho();
    let mu = model.mu();
    let sqrt_arg = |u: f64| rho * u * idw.eval(u) / mu;

    let no_abandon = sup_positive(
        |u| (rho - 1.0) * u + b * sqrt_arg(u).sqrt(),
        SUP_REL_TOL,
    );
    let hi_seed = if no_abandon.value.is_finite() {
        no_abandon.value.max(0.0) + model.mean_patience()
    } else {
        model.mean_patience().max(1.0)
    };

    let psi = |z: f64| {
        let sbar = model.patience_sf(z).max(SF_FLOOR);
        sup_positive(
            |u| rho * u - u / sbar + b * sqrt_arg(u).sqrt(),
            SUP_REL_TOL,
        )
    };
    let fp = solve_fixed_point(psi, hi_seed)?;
    Ok(RqSolution {
        z: fp.z,
        u_star: fp.u_star,
        residual: fp.residual,
        iterations: fp.iterations,
        b_used: b,
        algorithm: Algorithm::First,
        c_tilde: None,
        c_tilde_clamped: false,
    })
}

/// Refined steady-state fixed point:
/// `z = sup_{s >= 0} { Lambda(s)/mu - s + b sqrt(V(s)) }` with
/// `Lambda(s) = lambda F_bar(z) s` and
/// `V(s) = I_w_hat(s) w_{c_tilde,k}(alpha^{2h} tau s) Lambda(s) / mu^2`.
///
/// The scaled drift is `c = alpha^{-h} (rho - 1)` with no regime switch;
/// `(c_tilde, tau)` come from [`scale_map`] on the model's parameter
/// tuple. A `c_tilde` outside the surface grid is clamped to the edge and
/// reported through `c_tilde_clamped`; a surface built for a different
/// `k` is a coverage error.
pub fn solve_refined_rq(model: &QueueModel, wck: &WckSurface, b: f64) -> Result<RqSolution> {
    validate_b(b)?;
    let ze = model.zero_exp()?;
    if wck.k != ze.k {
        return Err(Error::SurfaceCoverage(format!(
            "surface holds k = {}, the model's patience has k = {}",
            wck.k, ze.k
        )));
    }
    let lambda = model.lambda();
    let mu = model.mu();
    let rho = model.rho();
    let alpha = model.alpha();
    let c = alpha.powf(-ze.h) * (rho - 1.0);
    let (c_tilde, tau) = scale_map(&ParameterTuple {
        c,
        k: ze.k,
        mu,
        c_a2: model.c_a2(),
        c_s2: model.c_s2(),
        fk0: ze.coeff,
    })?;
    let clamped = !wck.covers(c_tilde);
    let idw_hat = effective_idw_surrogate(model.arrival_idc(), rho, model.c_s2())?;
    let time_scale = alpha.powf(2.0 * ze.h) * tau;

    let objective = |rate: f64, s: f64| {
        let lam_s = rate * s;
        let v = idw_hat.eval(s) * wck.eval(c_tilde, time_scale * s) * lam_s / (mu * mu);
        lam_s / mu - s + b * v.sqrt()
    };

    let no_abandon = sup_positive(|s| objective(lambda, s), SUP_REL_TOL);
    let hi_seed = if no_abandon.value.is_finite() {
        no_abandon.value.max(0.0) + model.mean_patience()
    } else {
        model.mean_patience().max(1.0)
    };

    let psi = |z: f64| {
        let rate = lambda * model.patience_sf(z).max(SF_FLOOR);
        sup_positive(|s| objective(rate, s), SUP_REL_TOL)
    };
    let fp = solve_fixed_point(psi, hi_seed)?;
    Ok(RqSolution {
        z: fp.z,
        u_star: fp.u_star,
        residual: fp.residual,
        iterations: fp.iterations,
        b_used: b,
        algorithm: Algorithm::Refined,
        c_tilde: Some(c_tilde),
        c_tilde_clamped: clamped,
    })
}

/// Heavy-traffic mean constant
/// `psi = int x exp(g) dx / int exp(g) dx` over `x >= 0`, with
/// `g(x) = c mu x 1{gamma = h} - mu Fk0 x^{k+1} / (k+1)!`,
/// by adaptive quadrature on a domain truncated 60 nats below the peak.
pub fn psi_constant(
    c: f64,
    k: u32,
    fk0: f64,
    mu: f64,
    gamma_equals_h: bool,
) -> Result<f64> {
    if !(1..=4).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..=4, got {k}"
        )));
    }
    if !(fk0 > 0.0) || !(mu > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "psi_constant needs finite c and positive Fk0, mu; got c = {c}, \
             Fk0 = {fk0}, mu = {mu}"
        )));
    }
    let kp1_fact = factorial(k + 1);
    let drift = if gamma_equals_h { c * mu } else { 0.0 };
    let g = |x: f64| drift * x - mu * fk0 * x.powi(k as i32 + 1) / kp1_fact;
    let x_peak = if drift > 0.0 {
        (drift * factorial(k) / (mu * fk0)).powf(1.0 / k as f64)
    } else {
        0.0
    };
    let g_max = g(x_peak);
    let mut x_edge = x_peak + 1.0;
    while g(x_edge) > g_max - 60.0 {
        x_edge *= 2.0;
    }
    let den = adaptive_simpson(&|x: f64| (g(x) - g_max).exp(), 0.0, x_edge, 1e-12);
    let num = adaptive_simpson(&|x: f64| x * (g(x) - g_max).exp(), 0.0, x_edge, 1e-12);
    Ok(num / den)
}

/// Calibration of `b` for the first fixed point at drift `c`:
/// `b = sqrt(2 |-c psi + (Fk0/k!) psi^{k+1}|)` with `mu` normalized to 1
/// (rescale time so `mu = 1` before calling; the solution scales back).
pub fn calibrate_b_first(c: f64, k: u32, fk0: f64) -> Result<f64> {
    let psi = psi_constant(c, k, fk0, 1.0, true)?;
    let beta = fk0 / factorial(k);
    Ok((2.0 * (-c * psi + beta * psi.powi(k as i32 + 1)).abs()).sqrt())
}

/// Calibration of `b` for the refined fixed point at drift `c`: finds the
/// `b` in `[0.1, 5]` whose scaled solution
/// `Z = sup_u { (c - beta Z^k) u + b sqrt(2 w_{c_tilde,k}(tau u) u) }`
/// matches [`psi_constant`] of the base calibration model (exponential
/// patience for `k = 1`, Erlang-k for larger `k`; `mu = 1`, `c_x^2 = 2`).
pub fn calibrate_b_refined(c: f64, k: u32, wck: &WckSurface) -> Result<f64> {
    if wck.k != k {
        return Err(Error::SurfaceCoverage(format!(
            "surface holds k = {}, calibration requested k = {k}",
            wck.k
        )));
    }
    let fk0 = if k == 1 {
        1.0
    } else {
        (k as f64).powi(k as i32)
    };
    let beta = fk0 / factorial(k);
    let (c_tilde, tau) = scale_map(&ParameterTuple {
        c,
        k,
        mu: 1.0,
        c_a2: 1.0,
        c_s2: 1.0,
        fk0,
    })?;
    if !wck.covers(c_tilde) {
        return Err(Error::SurfaceCoverage(format!(
            "calibration at c = {c} needs c_tilde = {c_tilde}, outside the \
             surface grid [{}, {}]",
            wck.c_grid[0],
            wck.c_grid.last().expect("nonempty")
        )));
    }
    let target = psi_constant(c, k, fk0, 1.0, true)?;

    let scaled_z = |b: f64| -> Result<f64> {
        let psi = |z: f64| {
            sup_positive(
                |u| {
                    (c - beta * z.powi(k as i32)) * u
                        + b * (2.0 * wck.eval(c_tilde, tau * u) * u).sqrt()
                },
                SUP_REL_TOL,
            )
        };
        let seed = ((c.max(0.0) + 1.0) / beta).powf(1.0 / k as f64).max(1.0);
        Ok(solve_fixed_point(psi, seed)?.z)
    };

    let mut b_lo = 0.1;
    let mut b_hi = 5.0;
    let mut z_lo = scaled_z(b_lo)?;
    let mut z_hi = scaled_z(b_hi)?;
    if !(z_lo < target && target < z_hi) {
        return Err(Error::Numerical(format!(
            "calibration bracket b in [0.1, 5] does not enclose the target: \
             Z(0.1) = {z_lo}, Z(5) = {z_hi}, target = {target}"
        )));
    }
    for _ in 0..60 {
        if b_hi - b_lo < 1e-9 {
            break;
        }
        let mid = 0.5 * (b_lo + b_hi);
        let z_mid = scaled_z(mid)?;
        // The matched solution must stay increasing in b.
        if z_mid < z_lo - 1e-9 || z_mid > z_hi + 1e-9 {
            return Err(Error::Numerical(format!(
                "matched solution is not increasing in b: Z({b_lo}) = {z_lo}, \
                 Z({mid}) = {z_mid}, Z({b_hi}) = {z_hi}"
            )));
        }
        if z_mid < target {
            b_lo = mid;
            z_lo = z_mid;
        } else {
            b_hi = mid;
            z_hi = z_mid;
        }
    }
    Ok(0.5 * (b_lo + b_hi))
}

/// Performance measures at a solution: abandonment probability
/// `p = F_alpha(z)`, served-customer mean wait
/// `max(0, z / (rho (1-p)) - (c_s^2 + 1)/(2 mu))`, and effective queue
/// length `max(0, mu z - rho (1-p) (c_s^2 + 1)/2)`.
pub fn derived_measures(solution: &RqSolution, model: &QueueModel) -> DerivedMeasures {
    let z = solution.z;
    let p = model.patience_cdf(z);
    let served = model.rho() * (1.0 - p);
    let half_moment = (model.c_s2() + 1.0) / (2.0 * model.mu());
    let mean_wait_served = if served > 0.0 {
        (z / served - half_moment).max(0.0)
    } else {
        0.0
    };
    let mean_queue_effective = (model.mu() * z - served * (model.c_s2() + 1.0) / 2.0).max(0.0);
    DerivedMeasures {
        p_abandon: p,
        mean_wait_served,
        mean_queue_effective,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec;
    use crate::model::{PatienceSpec, QueueModel};
    use crate::num::special::normal_cdf;
    use crate::renewal::{idw_from_idc, IdcCurve};
    use crate::testutil::{mm1m, shared_surface, unit_surface};
    use crate::wck::{load_or_build_surface_with, PdeConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn default_idw(m: &QueueModel) -> IdwCurve {
        idw_from_idc(m.arrival_idc(), m.c_s2()).unwrap()
    }

    #[test]
    fn no_abandonment_limit_matches_closed_form() {
        // rho = 0.5, mu = 1, I_w = 2, b = sqrt(2): z = rho/(mu(1-rho)) = 1.
        let m = mm1m(0.5, 1.0, 1e-12);
        let sol = solve_first_rq(&m, &default_idw(&m), std::f64::consts::SQRT_2).unwrap();
        assert!((sol.z - 1.0).abs() < 1e-6, "z = {}", sol.z);
        assert!(sol.residual <= 1e-6 * sol.z.max(1.0));
        // The maximizer of -(1-rho)u + sqrt(2) sqrt(u) sits at u = 2.
        assert!((sol.u_star - 2.0).abs() < 1e-3, "u* = {}", sol.u_star);
    }

    #[test]
    fn overload_recovers_the_crude_estimate() {
        // rho = 2, exponential patience: alpha z -> ln 2.
        let alpha = 2f64.powi(-13);
        let m = mm1m(2.0, 1.0, alpha);
        let sol = solve_first_rq(&m, &default_idw(&m), std::f64::consts::SQRT_2).unwrap();
        let scaled = alpha * sol.z;
        let target = std::f64::consts::LN_2;
        assert!(
            (scaled - target).abs() < 0.02 * target,
            "alpha z = {scaled} vs {target}"
        );
    }

    #[test]
    fn zero_b_gives_zero_delay_up_to_critical_load() {
        for lambda in [0.4, 0.9, 1.0] {
            let m = mm1m(lambda, 1.0, 0.5);
            let sol = solve_first_rq(&m, &default_idw(&m), 0.0).unwrap();
            assert_eq!(sol.z, 0.0, "lambda = {lambda}");
            assert_eq!(sol.u_star, 0.0);
        }
    }

    #[test]
    fn critical_load_matches_heavy_traffic_constant() {
        // lambda = mu = 1 gives scaled drift 0; the limit equation
        // zhat = sup{ -zhat u + b sqrt(2u) } has root 1 at b = sqrt(2).
        let alpha = 2f64.powi(-13);
        let m = mm1m(1.0, 1.0, alpha);
        let sol = solve_first_rq(&m, &default_idw(&m), std::f64::consts::SQRT_2).unwrap();
        let scaled = alpha.sqrt() * sol.z;
        assert!((scaled - 1.0).abs() < 0.02, "alpha^h z = {scaled}");
    }

    #[test]
    fn psi_constant_gaussian_and_asymptotic_values() {
        // c = 0, k = 1: psi = sqrt(2/pi).
        let p0 = psi_constant(0.0, 1, 1.0, 1.0, true).unwrap();
        assert!((p0 - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-9);
        // Dropping the drift term gives the same Gaussian value.
        let p_nodrift = psi_constant(5.0, 1, 1.0, 1.0, false).unwrap();
        assert!((p_nodrift - p0).abs() < 1e-9);
        // k = 1 closed form: mean of a normal truncated to x > 0.
        for c in [-3.0f64, -1.0, 0.7, 2.5] {
            let phi = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let expect = c + phi / normal_cdf(c);
            let got = psi_constant(c, 1, 1.0, 1.0, true).unwrap();
            assert!((got - expect).abs() < 1e-8 * expect.abs().max(1.0), "c = {c}");
        }
        // Deep underload: psi ~ -1/c.
        let p = psi_constant(-20.0, 1, 1.0, 1.0, true).unwrap();
        assert!((p - 0.05).abs() < 0.05 * 0.05, "psi(-20) = {p}");
    }

    #[test]
    fn calibrate_b_first_known_values() {
        // c = 0: b = sqrt(2) psi = 2/sqrt(pi).
        let b0 = calibrate_b_first(0.0, 1, 1.0).unwrap();
        assert!((b0 - 2.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9);
        // Deep underload approaches sqrt(2) (frozen 1.40752 at c = -10).
        let b = calibrate_b_first(-10.0, 1, 1.0).unwrap();
        assert!((b - 1.40752).abs() < 1e-4, "b(-10) = {b}");
        assert!((b - std::f64::consts::SQRT_2).abs() < 0.01 * std::f64::consts::SQRT_2);
        // Explicit k = 1 form through the truncated-normal mean.
        for c in [-2.0f64, 0.5, 1.3] {
            let phi = (-0.5 * c * c).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let mills = phi / normal_cdf(c);
            let expect = (2.0 * (c + mills) * mills).sqrt();
            let got = calibrate_b_first(c, 1, 1.0).unwrap();
            assert!((got - expect).abs() < 1e-7, "c = {c}: {got} vs {expect}");
        }
    }

    #[test]
    fn derived_measures_examples() {
        let m = mm1m(0.5, 1.0, 1e-12);
        let zero = RqSolution {
            z: 0.0,
            u_star: 0.0,
            residual: 0.0,
            iterations: 1,
            b_used: 1.0,
            algorithm: Algorithm::First,
            c_tilde: None,
            c_tilde_clamped: false,
        };
        let d0 = derived_measures(&zero, &m);
        assert_eq!(d0.p_abandon, 0.0);
        assert_eq!(d0.mean_wait_served, 0.0);
        assert_eq!(d0.mean_queue_effective, 0.0);

        let one = RqSolution { z: 1.0, ..zero.clone() };
        let d1 = derived_measures(&one, &m);
        assert!(d1.p_abandon < 1e-10);
        assert!((d1.mean_wait_served - 1.0).abs() < 1e-9, "{}", d1.mean_wait_served);
        assert!(
            (d1.mean_queue_effective - 0.5).abs() < 1e-9,
            "{}",
            d1.mean_queue_effective
        );

        // p stays in [0, 1] across a parameter sweep.
        for z in [0.0, 0.3, 2.0, 50.0] {
            let s = RqSolution { z, ..zero.clone() };
            let d = derived_measures(&s, &mm1m(1.2, 1.0, 0.7));
            assert!((0.0..=1.0).contains(&d.p_abandon));
        }
    }

    #[test]
    fn fixed_point_map_changes_sign_exactly_once() {
        let mut rng = ChaCha12Rng::seed_from_u64(90210);
        for trial in 0..100 {
            let lambda = rng.random_range(0.3..2.5);
            let alpha = rng.random_range(0.05..2.0);
            let c_s2 = [0.5, 1.0, 2.0][rng.random_range(0..3)];
            let b = rng.random_range(0.3..2.5);
            let idc = IdcCurve::constant(1.0);
            let idw = idw_from_idc(&idc, c_s2).unwrap();
            let m = QueueModel::from_idc(
                lambda,
                idc.clone(),
                &DistributionSpec::Exponential { mean: 1.0 },
                &PatienceSpec::exponential(alpha),
            )
            .unwrap();
            let sol = solve_first_rq(&m, &idw, b).unwrap();
            let g = |z: f64| {
                let sbar = m.patience_sf(z).max(SF_FLOOR);
                let s = sup_positive(
                    |u| m.rho() * u - u / sbar + b * (m.rho() * u * idw.eval(u)).sqrt(),
                    1e-8,
                );
                s.value.max(0.0) - z
            };
            let z_top = (2.0 * sol.z).max(1.0);
            let mut signs = Vec::new();
            for i in 0..60 {
                let z = z_top * i as f64 / 59.0;
                let v = g(z);
                if v != 0.0 {
                    signs.push(v > 0.0);
                }
            }
            let flips = signs.windows(2).filter(|w| w[0] != w[1]).count();
            assert!(flips <= 1, "trial {trial}: {flips} sign changes");
            // The solver's z sits at the transition.
            assert!(g((sol.z - 1e-5 * z_top).max(0.0)) >= -1e-6);
            assert!(g(sol.z + 1e-5 * z_top) <= 1e-6);
        }
    }

    #[test]
    fn z_is_monotone_in_load_and_in_b() {
        let b = 1.2;
        let mut last = -1.0;
        for lambda in [0.5, 0.8, 1.1, 1.6] {
            let m = mm1m(lambda, 1.0, 0.5);
            let z = solve_first_rq(&m, &default_idw(&m), b).unwrap().z;
            assert!(z >= last - 1e-9, "lambda = {lambda}: {z} < {last}");
            last = z;
        }
        let m = mm1m(0.9, 1.0, 0.5);
        let idw = default_idw(&m);
        let mut last = -1.0;
        for b in [0.0, 0.5, 1.0, 1.5, 2.2] {
            let z = solve_first_rq(&m, &idw, b).unwrap().z;
            assert!(z >= last - 1e-9, "b = {b}: {z} < {last}");
            last = z;
        }
    }

    #[test]
    fn abandonment_shrinks_delay() {
        let with = mm1m(0.9, 1.0, 0.8);
        let without = mm1m(0.9, 1.0, 1e-12);
        let b = std::f64::consts::SQRT_2;
        let z_with = solve_first_rq(&with, &default_idw(&with), b).unwrap().z;
        let z_without = solve_first_rq(&without, &default_idw(&without), b).unwrap().z;
        assert!(z_with <= z_without + 1e-9, "{z_with} vs {z_without}");
    }

    #[test]
    fn refined_matches_first_when_reduction_is_one() {
        // Constant arrival IDC and w = 1: the two fixed points coincide
        // under u = F_bar s.
        let m = mm1m(0.5, 1.0, 1.0);
        let b = std::f64::consts::SQRT_2;
        let first = solve_first_rq(&m, &default_idw(&m), b).unwrap();
        let refined = solve_refined_rq(&m, &unit_surface(1), b).unwrap();
        assert!(
            (first.z - refined.z).abs() < 5e-9,
            "{} vs {}",
            first.z,
            refined.z
        );
        assert!(!refined.c_tilde_clamped);
        assert_eq!(refined.algorithm, Algorithm::Refined);
    }

    #[test]
    fn refined_overload_recovers_the_crude_estimate() {
        let alpha = 2f64.powi(-13);
        let m = mm1m(2.0, 1.0, alpha);
        let sol =
            solve_refined_rq(&m, shared_surface(), std::f64::consts::SQRT_2).unwrap();
        // Scaled drift alpha^{-1/2}(rho - 1) = 90.5 exceeds the grid.
        assert!(sol.c_tilde_clamped);
        assert!((sol.c_tilde.unwrap() - 2f64.powf(6.5)).abs() < 1e-6);
        let scaled = alpha * sol.z;
        let target = std::f64::consts::LN_2;
        assert!(
            (scaled - target).abs() < 0.02 * target,
            "alpha z = {scaled} vs {target}"
        );
    }

    #[test]
    fn refined_does_not_exceed_first_for_poisson_inputs() {
        // With a constant IDC the refined objective equals the first one
        // except for the reduction factor w <= 1 under the square root.
        let m = mm1m(1.0, 1.0, 1.0 / 32.0);
        let b = std::f64::consts::SQRT_2;
        let z_first = solve_first_rq(&m, &default_idw(&m), b).unwrap().z;
        let z_refined = solve_refined_rq(&m, shared_surface(), b).unwrap().z;
        assert!(z_refined > 0.0);
        assert!(z_refined <= z_first + 1e-9, "{z_refined} vs {z_first}");
    }

    #[test]
    fn refined_rejects_mismatched_surface_order() {
        let m = QueueModel::from_renewal(
            &DistributionSpec::Exponential { mean: 1.0 },
            &DistributionSpec::Exponential { mean: 1.0 },
            &PatienceSpec::erlang(2, 1.0),
        )
        .unwrap();
        let err = solve_refined_rq(&m, &unit_surface(1), 1.0).unwrap_err();
        assert!(matches!(err, Error::SurfaceCoverage(_)), "{err}");
    }

    #[test]
    fn calibrate_b_refined_brackets_and_matches() {
        let s = shared_surface();
        // Frozen from the production pipeline: b(0, 1) = 1.3502; the
        // coarse test surface reproduces it loosely.
        let b0 = calibrate_b_refined(0.0, 1, s).unwrap();
        assert!((b0 - 1.3502).abs() < 0.03, "b(0) = {b0}");
        // Out-of-range c is a coverage error naming the needed drift.
        let err = calibrate_b_refined(-10.0, 1, s).unwrap_err();
        assert!(matches!(err, Error::SurfaceCoverage(_)), "{err}");
        // k mismatch is rejected.
        assert!(calibrate_b_refined(0.0, 2, s).is_err());
    }

    #[test]
    fn calibrate_b_refined_approaches_sqrt2_underloaded() {
        // Needs c = -10 on the surface; build a small dedicated grid.
        let dir = std::env::temp_dir().join("rqab-unit-surface");
        let cfg = PdeConfig {
            n_x: 300,
            ..PdeConfig::default()
        };
        let t_grid: Vec<f64> = {
            let (lo, hi) = (1e-3f64.ln(), 20f64.ln());
            (0..40)
                .map(|i| (lo + (hi - lo) * i as f64 / 39.0).exp())
                .collect()
        };
        let s =
            load_or_build_surface_with(1, &[-10.5, -9.5], &t_grid, &dir, &cfg).unwrap();
        let b = calibrate_b_refined(-10.0, 1, &s).unwrap();
        assert!(
            (b - std::f64::consts::SQRT_2).abs() < 0.02 * std::f64::consts::SQRT_2,
            "b(-10) = {b}"
        );
    }
}
