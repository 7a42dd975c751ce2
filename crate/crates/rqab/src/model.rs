//! Queue model primitives shared by the fixed-point solvers, the exact
//! benchmarks, and the simulator.

use serde::{Deserialize, Serialize};

use crate::dist::{
    make_distribution, zero_expansion, Distribution, DistributionSpec, ZeroExpansion,
};
use crate::error::{Error, Result};
use crate::renewal::{idc_monte_carlo, idc_phase_type, IdcCurve};

/// Patience description: a base CDF with mean 1, stretched by `1/alpha`.
/// The effective patience CDF is `F(alpha x)` with mean `1/alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatienceSpec {
    pub base: DistributionSpec,
    pub alpha: f64,
}

impl PatienceSpec {
    /// Exponential patience with mean `1/alpha`.
    pub fn exponential(alpha: f64) -> Self {
        PatienceSpec {
            base: DistributionSpec::Exponential { mean: 1.0 },
            alpha,
        }
    }

    /// Erlang patience of the given shape with mean `1/alpha`.
    pub fn erlang(shape: u32, alpha: f64) -> Self {
        PatienceSpec {
            base: DistributionSpec::Erlang { mean: 1.0, shape },
            alpha,
        }
    }
}

/// How the arrival process is described.
#[derive(Debug, Clone)]
pub enum ArrivalSpec {
    /// Stationary renewal process with the given interarrival distribution;
    /// both sampling and the IDC are available.
    Renewal(DistributionSpec),
    /// Rate plus an externally supplied IDC curve; solvers work, the
    /// simulator cannot sample from it.
    Idc { rate: f64, curve: IdcCurve },
}

/// A `GI/GI/1+GI` model: renewal (or IDC-described) arrivals, i.i.d.
/// services, and i.i.d. patience with a mean-1 base CDF scaled by `alpha`.
#[derive(Debug, Clone)]
pub struct QueueModel {
    lambda: f64,
    mu: f64,
    c_s2: f64,
    arrival_interarrival: Option<Distribution>,
    arrival_idc: IdcCurve,
    service: Distribution,
    patience_base: Distribution,
    alpha: f64,
    zero_exp: Option<ZeroExpansion>,
}

/// Log-spaced grid used when a model builds its own arrival IDC.
fn default_idc_grid(mean: f64, decades_up: f64, n: usize) -> Vec<f64> {
    let lo = (0.01 * mean).ln();
    let hi = (mean * 10f64.powf(decades_up)).ln();
    (0..n)
        .map(|i| (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl QueueModel {
    /// Model with renewal arrivals. The arrival IDC is computed here: closed
    /// form for exponential and deterministic interarrivals, phase-type
    /// matrix exponentials for Erlang and hyperexponential, Monte Carlo
    /// (fixed internal seed, 20k paths) otherwise.
    pub fn from_renewal(
        arrival: &DistributionSpec,
        service: &DistributionSpec,
        patience: &PatienceSpec,
    ) -> Result<Self> {
        let arrival_dist = make_distribution(arrival)?;
        let mean_a = arrival_dist.mean();
        let idc = match arrival {
            DistributionSpec::Exponential { .. } => IdcCurve::constant(1.0),
            DistributionSpec::Erlang { .. } | DistributionSpec::HyperExp2Balanced { .. } => {
                idc_phase_type(arrival, &default_idc_grid(mean_a, 2.0, 40))?
            }
            DistributionSpec::Deterministic { .. } => {
                IdcCurve::deterministic_gaps(1.0 / mean_a)?
            }
            DistributionSpec::Lognormal { .. } => idc_monte_carlo(
                &arrival_dist,
                &default_idc_grid(mean_a, 3.0, 48),
                20_000,
                0x1DC0,
            )?,
        };
        Self::build(Some(arrival_dist), idc, service, patience)
    }

    /// Model whose arrival process is described only by its rate and IDC.
    pub fn from_idc(
        lambda: f64,
        arrival_idc: IdcCurve,
        service: &DistributionSpec,
        patience: &PatienceSpec,
    ) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "arrival rate must be positive, got {lambda}"
            )));
        }
        // Carry the rate through a rate-matched exponential placeholder so
        // lambda has a single storage path.
        let mut model = Self::build(None, arrival_idc, service, patience)?;
        model.lambda = lambda;
        Ok(model)
    }

    fn build(
        arrival_interarrival: Option<Distribution>,
        arrival_idc: IdcCurve,
        service: &DistributionSpec,
        patience: &PatienceSpec,
    ) -> Result<Self> {
        let service_dist = make_distribution(service)?;
        let patience_base = make_distribution(&patience.base)?;
        if (patience_base.mean() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "patience base CDF must have mean 1 (within 1e-9), got {}",
                patience_base.mean()
            )));
        }
        if !(patience.alpha > 0.0) || !patience.alpha.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "patience scale alpha must be positive, got {}",
                patience.alpha
            )));
        }
        let lambda = arrival_interarrival
            .as_ref()
            .map(|d| 1.0 / d.mean())
            .unwrap_or(f64::NAN);
        let zero_exp = zero_expansion(&patience_base).ok();
        Ok(QueueModel {
            lambda,
            mu: 1.0 / service_dist.mean(),
            c_s2: service_dist.scv(),
            arrival_interarrival,
            arrival_idc,
            service: service_dist,
            patience_base,
            alpha: patience.alpha,
            zero_exp,
        })
    }

    /// Arrival rate.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Service rate.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Traffic intensity `lambda / mu`.
    pub fn rho(&self) -> f64 {
        self.lambda / self.mu
    }

    /// Service-time SCV.
    pub fn c_s2(&self) -> f64 {
        self.c_s2
    }

    /// Long-run arrival-process variability `c_a^2 = I_a(infinity)`.
    pub fn c_a2(&self) -> f64 {
        self.arrival_idc.limit_c2()
    }

    /// Arrival IDC curve.
    pub fn arrival_idc(&self) -> &IdcCurve {
        &self.arrival_idc
    }

    /// Interarrival distribution, when arrivals are renewal.
    pub fn interarrival(&self) -> Result<&Distribution> {
        self.arrival_interarrival.as_ref().ok_or_else(|| {
            Error::InvalidParameter(
                "model arrivals are IDC-only; sampling needs a renewal arrival spec".into(),
            )
        })
    }

    /// Service-time distribution.
    pub fn service(&self) -> &Distribution {
        &self.service
    }

    /// Mean-1 base patience distribution.
    pub fn patience_base(&self) -> &Distribution {
        &self.patience_base
    }

    /// Patience scale; mean patience is `1/alpha`.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Mean patience `1/alpha`.
    pub fn mean_patience(&self) -> f64 {
        1.0 / self.alpha
    }

    /// Patience CDF `F(alpha x)`.
    pub fn patience_cdf(&self, x: f64) -> f64 {
        self.patience_base.cdf(self.alpha * x)
    }

    /// Patience survival `1 - F(alpha x)`.
    pub fn patience_sf(&self, x: f64) -> f64 {
        self.patience_base.sf(self.alpha * x)
    }

    /// Zero-expansion of the base patience CDF; errs for families whose CDF
    /// has no polynomial behavior at zero.
    pub fn zero_exp(&self) -> Result<&ZeroExpansion> {
        self.zero_exp.as_ref().ok_or_else(|| {
            Error::UnsupportedPatience(format!(
                "patience family {} has no CDF expansion at zero",
                self.patience_base.spec().family_name()
            ))
        })
    }
}
