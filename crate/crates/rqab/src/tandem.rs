//! Two single-server queues in series: a stable FIFO station without
//! abandonment feeds a station with abandonment. The downstream fixed point
//! is solved after replacing its arrival IDC with a time-varying convex
//! blend of the upstream arrival and service IDCs that approximates the
//! upstream departure IDC.

use crate::error::{Error, Result};
use crate::model::{PatienceSpec, QueueModel};
use crate::num::special;
use crate::renewal::{idc_phase_type, IdcCurve};
use crate::rq::{solve_refined_rq, RqSolution};
use crate::wck::WckSurface;

/// Upstream station: a stable FIFO queue without abandonment, described
/// through the IDCs of its arrival and service renewal processes.
#[derive(Debug, Clone)]
pub struct Queue1Spec {
    /// IDC of the external arrival process.
    pub arrival_idc: IdcCurve,
    /// External arrival rate; equals the departure rate because the
    /// station is stable.
    pub lambda: f64,
    /// Utilization, strictly inside `(0, 1)`.
    pub rho1: f64,
    /// IDC of the service renewal process rescaled to rate `lambda`, i.e.
    /// of the renewal process whose interrenewal times are the service
    /// times scaled to mean `1/lambda`.
    pub service_idc_rate_matched: IdcCurve,
    /// Interarrival SCV, the long-time limit of `arrival_idc`.
    pub c_a2: f64,
    /// Service SCV, the long-time limit of `service_idc_rate_matched`.
    pub c_s2: f64,
}

/// Two queues in series: `queue1` feeds `queue2`, whose own arrival
/// variability is replaced by the blended departure curve when solving.
#[derive(Debug, Clone)]
pub struct TandemSpec {
    pub queue1: Queue1Spec,
    pub queue2: QueueModel,
}

impl TandemSpec {
    /// Checks rates, the upstream utilization, and the variability
    /// parameters. A downstream rate that differs from the upstream
    /// throughput is logged but not rejected.
    pub fn validate(&self) -> Result<()> {
        let q1 = &self.queue1;
        if !(q1.lambda > 0.0) || !q1.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "upstream rate must be positive, got {}",
                q1.lambda
            )));
        }
        if !(q1.rho1 > 0.0 && q1.rho1 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "upstream utilization must lie in (0, 1), got {}",
                q1.rho1
            )));
        }
        if !(q1.c_a2 >= 0.0) || !(q1.c_s2 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "upstream SCVs must be nonnegative, got c_a2 = {}, c_s2 = {}",
                q1.c_a2, q1.c_s2
            )));
        }
        let c_x2 = q1.c_a2 + q1.c_s2;
        if !(c_x2 > 0.0) || !c_x2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "combined upstream SCV must be positive, got {c_x2}"
            )));
        }
        if (self.queue2.lambda() - q1.lambda).abs() > 1e-9 * q1.lambda {
            log::warn!(
                "downstream arrival rate {} differs from upstream throughput {}",
                self.queue2.lambda(),
                q1.lambda
            );
        }
        Ok(())
    }
}

/// Blend weight placed on the arrival IDC at window scale `u`:
/// `w*(u) = (1/2u) [(u^2 + 2u - 1)(2 Phi(sqrt u) - 1)
///                  + 2 phi(sqrt u) sqrt(u) (1 + u) - u^2]`,
/// clamped to `[0, 1]` against roundoff. The function increases from
/// `w*(0+) = 0` to 1 as `u -> infinity`. By convention `u = 0` returns 0;
/// a negative or NaN argument is a domain error.
pub fn weight_wstar(u: f64) -> Result<f64> {
    if u.is_nan() || u < 0.0 {
        return Err(Error::Domain(format!(
            "blend weight needs a nonnegative argument, got {u}"
        )));
    }
    if u == 0.0 {
        return Ok(0.0);
    }
    if u == f64::INFINITY {
        return Ok(1.0);
    }
    Ok(special::wstar(u))
}

/// Departure IDC of the upstream station:
/// `I_d(t) = w(t) I_a1(t) + (1 - w(t)) I_s1(t)` with weight
/// `w(t) = w*((1 - rho1)^2 lambda t / (rho1 c_x1^2))` on the arrival
/// curve, so small times reflect service-scale variability and large
/// times arrival-scale variability. The long-time limit is the upstream
/// interarrival SCV. Evaluation is lazy through the constituent curves;
/// [`departure_idc_rows`] tabulates for export.
pub fn departure_idc(spec: &TandemSpec) -> Result<IdcCurve> {
    spec.validate()?;
    let q1 = &spec.queue1;
    let limit = q1.arrival_idc.limit_c2();
    if (limit - q1.c_a2).abs() > 1e-6 * limit.max(1.0) {
        log::warn!(
            "arrival curve limit {limit} differs from the declared c_a2 {}",
            q1.c_a2
        );
    }
    let coef = (1.0 - q1.rho1).powi(2) * q1.lambda / (q1.rho1 * (q1.c_a2 + q1.c_s2));
    IdcCurve::departure_blend(
        coef,
        q1.arrival_idc.clone(),
        q1.service_idc_rate_matched.clone(),
    )
}

/// Departure IDC sampled on `t_grid`, as `(t, value)` rows for export.
pub fn departure_idc_rows(spec: &TandemSpec, t_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    let curve = departure_idc(spec)?;
    Ok(t_grid.iter().map(|&t| (t, curve.eval(t))).collect())
}

/// Upstream description taken from a renewal queue model: arrival IDC and
/// SCVs come from the model, and the service IDC is computed for the
/// service distribution rescaled to interrenewal mean `1/lambda`.
/// `t_grid` seeds the tabulation of phase-type service curves.
pub fn queue1_from_model(queue1: &QueueModel, t_grid: &[f64]) -> Result<Queue1Spec> {
    if !(queue1.rho() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "upstream utilization must be below one, got {}",
            queue1.rho()
        )));
    }
    let lambda = queue1.lambda();
    let scaled = queue1.service().spec().with_mean(1.0 / lambda);
    let service_idc = match scaled {
        crate::dist::DistributionSpec::Deterministic { .. } => {
            IdcCurve::deterministic_gaps(lambda)?
        }
        ref other => idc_phase_type(other, t_grid)?,
    };
    Ok(Queue1Spec {
        arrival_idc: queue1.arrival_idc().clone(),
        lambda,
        rho1: queue1.rho(),
        service_idc_rate_matched: service_idc,
        c_a2: queue1.c_a2(),
        c_s2: queue1.c_s2(),
    })
}

/// Solves the downstream refined fixed point with the blended departure
/// curve as its arrival IDC. The downstream model keeps its own rate,
/// service, and patience; only the arrival variability is replaced.
pub fn solve_tandem_rq(spec: &TandemSpec, wck: &WckSurface, b: f64) -> Result<RqSolution> {
    let idc = departure_idc(spec)?;
    let q2 = &spec.queue2;
    let patience = PatienceSpec {
        base: q2.patience_base().spec().clone(),
        alpha: q2.alpha(),
    };
    let model = QueueModel::from_idc(q2.lambda(), idc, q2.service().spec(), &patience)?;
    solve_refined_rq(&model, wck, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::DistributionSpec;
    use crate::rq::calibrate_b_refined;
    use crate::sim::{estimate_departure_idc, simulate_tandem, SimConfig};
    use crate::testutil::{mm1m, shared_surface};

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let step = (hi / lo).ln() / (n - 1) as f64;
        (0..n).map(|i| lo * (step * i as f64).exp()).collect()
    }

    fn h2(mean: f64) -> DistributionSpec {
        DistributionSpec::HyperExp2Balanced { mean, scv: 4.0 }
    }

    fn e2(mean: f64) -> DistributionSpec {
        DistributionSpec::Erlang { mean, shape: 2 }
    }

    /// Upstream H2(4) arrivals at rate 0.9 into Erlang-2 service at rate 1.
    fn h2_e2_spec(queue2: QueueModel) -> TandemSpec {
        let grid = log_grid(1e-2, 1e3, 50);
        let model = QueueModel::from_renewal(
            &h2(1.0 / 0.9),
            &e2(1.0),
            &PatienceSpec::exponential(1.0),
        )
        .unwrap();
        TandemSpec {
            queue1: queue1_from_model(&model, &grid).unwrap(),
            queue2,
        }
    }

    #[test]
    fn weight_rises_from_zero_to_one() {
        assert_eq!(weight_wstar(0.0).unwrap(), 0.0);
        let small = weight_wstar(1e-6).unwrap();
        assert!((small - 1.0638e-3).abs() < 1e-6, "w*(1e-6) = {small}");
        assert!(weight_wstar(1e3).unwrap() > 0.99);
        assert_eq!(weight_wstar(f64::INFINITY).unwrap(), 1.0);
        let mut prev = 0.0;
        for &u in &log_grid(1e-6, 1e3, 100) {
            let w = weight_wstar(u).unwrap();
            assert!((0.0..=1.0).contains(&w), "w*({u}) = {w}");
            assert!(w >= prev - 1e-12, "not monotone at u = {u}");
            prev = w;
        }
    }

    #[test]
    fn weight_rejects_negative_and_nan_arguments() {
        assert!(matches!(weight_wstar(-1e-9), Err(Error::Domain(_))));
        assert!(matches!(weight_wstar(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn blend_of_equal_curves_is_that_curve() {
        let grid = log_grid(1e-2, 1e3, 40);
        let idc = idc_phase_type(&e2(1.0 / 0.9), &grid).unwrap();
        let spec = TandemSpec {
            queue1: Queue1Spec {
                arrival_idc: idc.clone(),
                lambda: 0.9,
                rho1: 0.9,
                service_idc_rate_matched: idc.clone(),
                c_a2: 0.5,
                c_s2: 0.5,
            },
            queue2: mm1m(0.9, 1.0, 0.125),
        };
        let dep = departure_idc(&spec).unwrap();
        for &t in &grid {
            assert!((dep.eval(t) - idc.eval(t)).abs() < 1e-12, "t = {t}");
        }
        assert_eq!(dep.limit_c2(), idc.limit_c2());
    }

    #[test]
    fn poisson_upstream_departures_stay_poisson() {
        let one = IdcCurve::constant(1.0);
        let spec = TandemSpec {
            queue1: Queue1Spec {
                arrival_idc: one.clone(),
                lambda: 0.9,
                rho1: 0.9,
                service_idc_rate_matched: one,
                c_a2: 1.0,
                c_s2: 1.0,
            },
            queue2: mm1m(0.9, 1.0, 0.125),
        };
        let dep = departure_idc(&spec).unwrap();
        for &t in &[1e-3, 0.1, 1.0, 10.0, 1e3, 1e6] {
            assert!((dep.eval(t) - 1.0).abs() < 1e-12, "t = {t}");
        }
        assert_eq!(dep.limit_c2(), 1.0);
    }

    #[test]
    fn blend_moves_from_service_scale_to_arrival_scale() {
        let spec = h2_e2_spec(mm1m(0.9, 1.0, 0.125));
        let dep = departure_idc(&spec).unwrap();
        let arrival = &spec.queue1.arrival_idc;
        let service = &spec.queue1.service_idc_rate_matched;
        // Weight argument coef = (1-0.9)^2 0.9 / (0.9 * 4.5) = 1/450, so the
        // service curve dominates at t = 0.01 and the arrival curve by t = 1e6.
        let t = 0.01;
        assert!(
            (dep.eval(t) - service.eval(t)).abs() < 1e-3,
            "small t: dep = {}, service = {}",
            dep.eval(t),
            service.eval(t)
        );
        assert!(
            (dep.eval(1e6) - 4.0).abs() < 0.05,
            "large t: dep = {}",
            dep.eval(1e6)
        );
        for &t in &log_grid(1e-3, 1e5, 80) {
            let (a, s, d) = (arrival.eval(t), service.eval(t), dep.eval(t));
            assert!(
                d >= a.min(s) - 1e-12 && d <= a.max(s) + 1e-12,
                "t = {t}: {d} outside [{}, {}]",
                a.min(s),
                a.max(s)
            );
        }
        assert!((dep.limit_c2() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_upstream_reduces_to_the_plain_solve() {
        let q2 = mm1m(0.9, 1.0, 0.125);
        let one = IdcCurve::constant(1.0);
        let spec = TandemSpec {
            queue1: Queue1Spec {
                arrival_idc: one.clone(),
                lambda: 0.9,
                rho1: 0.9,
                service_idc_rate_matched: one,
                c_a2: 1.0,
                c_s2: 1.0,
            },
            queue2: q2.clone(),
        };
        let surface = shared_surface();
        let tandem = solve_tandem_rq(&spec, surface, 1.0).unwrap();
        let plain = solve_refined_rq(&q2, surface, 1.0).unwrap();
        assert!(
            (tandem.z - plain.z).abs() <= 1e-9 * plain.z.max(1.0),
            "tandem z = {}, plain z = {}",
            tandem.z,
            plain.z
        );
    }

    #[test]
    fn vanishing_upstream_load_passes_the_arrival_curve_through() {
        let grid = log_grid(1e-3, 1e4, 50);
        let arrival = idc_phase_type(&e2(1.0 / 0.9), &grid).unwrap();
        let q2 = QueueModel::from_idc(
            0.9,
            arrival.clone(),
            &DistributionSpec::Exponential { mean: 1.0 },
            &PatienceSpec::exponential(0.125),
        )
        .unwrap();
        let spec = TandemSpec {
            queue1: Queue1Spec {
                arrival_idc: arrival,
                lambda: 0.9,
                rho1: 1e-4,
                service_idc_rate_matched: IdcCurve::constant(1.0),
                c_a2: 0.5,
                c_s2: 1.0,
            },
            queue2: q2.clone(),
        };
        let surface = shared_surface();
        let tandem = solve_tandem_rq(&spec, surface, 1.0).unwrap();
        let raw = solve_refined_rq(&q2, surface, 1.0).unwrap();
        let rel = (tandem.z - raw.z).abs() / raw.z;
        assert!(rel < 0.01, "tandem z = {}, raw z = {}", tandem.z, raw.z);
    }

    #[test]
    fn downstream_solution_tracks_the_tandem_simulation() {
        let lam = 0.9;
        let service2 = DistributionSpec::Exponential { mean: 1.0 };
        let patience2 = PatienceSpec {
            base: h2(1.0),
            alpha: 0.125,
        };
        let q2 = QueueModel::from_idc(lam, IdcCurve::constant(1.0), &service2, &patience2)
            .unwrap();
        let spec = h2_e2_spec(q2.clone());
        let surface = shared_surface();
        let c = 0.125_f64.powf(-0.5) * (lam - 1.0);
        let b = calibrate_b_refined(c, 1, surface).unwrap();
        let sol = solve_tandem_rq(&spec, surface, b).unwrap();

        let upstream = QueueModel::from_renewal(
            &h2(1.0 / lam),
            &e2(1.0),
            &PatienceSpec::exponential(1.0),
        )
        .unwrap();
        let mut cfg = SimConfig::new(q2, 3e4, 4242);
        cfg.warmup_time = 3e3;
        cfg.replications = 4;
        let est = simulate_tandem(&upstream, &cfg).unwrap();
        let rel = (sol.z - est.mean_virtual_wait).abs() / est.mean_virtual_wait;
        assert!(
            rel < 0.20,
            "z = {}, simulated = {} +- {}, rel = {rel}",
            sol.z,
            est.mean_virtual_wait,
            est.ci_halfwidth
        );
    }

    #[test]
    fn blended_curve_tracks_simulated_departures() {
        let grid = log_grid(1e-2, 1e3, 50);
        let t_check = [1.0, 3.162, 10.0, 31.62, 100.0];
        let configs = [
            (h2(1.0 / 0.9), e2(1.0), 910_u64),
            (e2(1.0 / 0.9), h2(1.0), 911_u64),
        ];
        for (arrival, service, seed) in configs {
            let upstream =
                QueueModel::from_renewal(&arrival, &service, &PatienceSpec::exponential(1.0))
                    .unwrap();
            let spec = TandemSpec {
                queue1: queue1_from_model(&upstream, &grid).unwrap(),
                queue2: mm1m(0.9, 1.0, 0.125),
            };
            let dep = departure_idc(&spec).unwrap();
            let mut cfg = SimConfig::new(upstream, 4e4, seed);
            cfg.warmup_time = 2e3;
            cfg.replications = 5;
            let mc = estimate_departure_idc(&cfg, &t_check).unwrap();
            for p in &mc {
                assert!(p.reliable, "unreliable window count at t = {}", p.t);
                let approx = dep.eval(p.t);
                let rel = (approx - p.value).abs() / p.value;
                assert!(
                    rel < 0.15,
                    "t = {}: blend = {approx}, simulated = {} +- {}, rel = {rel}",
                    p.t,
                    p.value,
                    p.stderr
                );
            }
        }
    }

    #[test]
    fn invalid_upstream_parameters_are_rejected() {
        let one = IdcCurve::constant(1.0);
        let base = Queue1Spec {
            arrival_idc: one.clone(),
            lambda: 0.9,
            rho1: 0.9,
            service_idc_rate_matched: one,
            c_a2: 1.0,
            c_s2: 1.0,
        };
        let q2 = mm1m(0.9, 1.0, 0.125);
        for bad in [
            Queue1Spec {
                rho1: 1.0,
                ..base.clone()
            },
            Queue1Spec {
                rho1: 0.0,
                ..base.clone()
            },
            Queue1Spec {
                lambda: -1.0,
                ..base.clone()
            },
            Queue1Spec {
                c_a2: 0.0,
                c_s2: 0.0,
                ..base.clone()
            },
            Queue1Spec {
                c_a2: -0.5,
                ..base.clone()
            },
        ] {
            let spec = TandemSpec {
                queue1: bad,
                queue2: q2.clone(),
            };
            assert!(departure_idc(&spec).is_err());
        }
    }
}
