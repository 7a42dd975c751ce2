//! Parametric distributions for interarrival, service, and patience times,
//! including the behavior-at-zero descriptors the fixed-point solvers need.

use rand::Rng;
use rand_distr::Distribution as RandDistribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::special::normal_quantile;

/// Serializable description of a distribution family with its parameters.
///
/// All families are parameterized by their mean; `Erlang` adds the shape,
/// `HyperExp2Balanced` and `Lognormal` add the squared coefficient of
/// variation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Exponential { mean: f64 },
    Erlang { mean: f64, shape: u32 },
    HyperExp2Balanced { mean: f64, scv: f64 },
    Lognormal { mean: f64, scv: f64 },
    Deterministic { mean: f64 },
}

impl DistributionSpec {
    /// The mean encoded in the spec.
    pub fn mean(&self) -> f64 {
        match *self {
            DistributionSpec::Exponential { mean }
            | DistributionSpec::Erlang { mean, .. }
            | DistributionSpec::HyperExp2Balanced { mean, .. }
            | DistributionSpec::Lognormal { mean, .. }
            | DistributionSpec::Deterministic { mean } => mean,
        }
    }

    /// Same family and shape parameters with a different mean.
    pub fn with_mean(&self, mean: f64) -> Self {
        let mut s = self.clone();
        match &mut s {
            DistributionSpec::Exponential { mean: m }
            | DistributionSpec::Erlang { mean: m, .. }
            | DistributionSpec::HyperExp2Balanced { mean: m, .. }
            | DistributionSpec::Lognormal { mean: m, .. }
            | DistributionSpec::Deterministic { mean: m } => *m = mean,
        }
        s
    }

    /// Short lowercase family tag, matching the serialized form.
    pub fn family_name(&self) -> &'static str {
        match self {
            DistributionSpec::Exponential { .. } => "exponential",
            DistributionSpec::Erlang { .. } => "erlang",
            DistributionSpec::HyperExp2Balanced { .. } => "hyper_exp2_balanced",
            DistributionSpec::Lognormal { .. } => "lognormal",
            DistributionSpec::Deterministic { .. } => "deterministic",
        }
    }
}

/// Precomputed per-family parameters.
#[derive(Debug, Clone)]
pub(crate) enum Params {
    Exponential {
        rate: f64,
    },
    Erlang {
        shape: u32,
        rate: f64,
        /// ln((shape-1)!)
        ln_fact_m1: f64,
    },
    HyperExp2 {
        p1: f64,
        p2: f64,
        l1: f64,
        l2: f64,
    },
    Lognormal {
        mu: f64,
        sigma: f64,
    },
    Deterministic {
        value: f64,
    },
}

/// A distribution with mutually consistent CDF, survival, density, quantile,
/// moment, and sampling evaluators. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Distribution {
    spec: DistributionSpec,
    params: Params,
}

/// Behavior of a patience CDF at zero: the smallest `k` with a nonvanishing
/// `k`-th derivative, the derivative value, and the derived exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroExpansion {
    /// Order of the first nonvanishing CDF derivative at 0.
    pub k: u32,
    /// Value of `F^(k)(0)`.
    pub coeff: f64,
    /// `F^(k)(0) / k!`.
    pub beta: f64,
    /// Scaling exponent `k / (k + 1)`.
    pub h: f64,
}

/// Validates a spec and builds the evaluator bundle.
pub fn make_distribution(spec: &DistributionSpec) -> Result<Distribution> {
    let mean = spec.mean();
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "mean must be positive and finite, got {mean}"
        )));
    }
    let params = match *spec {
        DistributionSpec::Exponential { .. } => Params::Exponential { rate: 1.0 / mean },
        DistributionSpec::Erlang { shape, .. } => {
            if shape < 1 || shape > 170 {
                return Err(Error::InvalidParameter(format!(
                    "Erlang shape must be in 1..=170, got {shape}"
                )));
            }
            let ln_fact_m1 = (1..shape).map(|j| (j as f64).ln()).sum();
            Params::Erlang {
                shape,
                rate: shape as f64 / mean,
                ln_fact_m1,
            }
        }
        DistributionSpec::HyperExp2Balanced { scv, .. } => {
            if !(scv > 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "balanced hyperexponential requires scv > 1, got {scv}"
                )));
            }
            // Balanced means: p1/l1 = p2/l2 = mean/2.
            let p1 = 0.5 * (1.0 + ((scv - 1.0) / (scv + 1.0)).sqrt());
            let p2 = 1.0 - p1;
            Params::HyperExp2 {
                p1,
                p2,
                l1: 2.0 * p1 / mean,
                l2: 2.0 * p2 / mean,
            }
        }
        DistributionSpec::Lognormal { scv, .. } => {
            if !(scv > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "lognormal requires scv > 0, got {scv}"
                )));
            }
            let sigma2 = (1.0 + scv).ln();
            Params::Lognormal {
                mu: mean.ln() - 0.5 * sigma2,
                sigma: sigma2.sqrt(),
            }
        }
        DistributionSpec::Deterministic { .. } => Params::Deterministic { value: mean },
    };
    Ok(Distribution {
        spec: spec.clone(),
        params,
    })
}

impl Distribution {
    /// The spec this distribution was built from.
    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    pub(crate) fn params(&self) -> &Params {
        &self.params
    }

    /// Mean.
    pub fn mean(&self) -> f64 {
        self.spec.mean()
    }

    /// Squared coefficient of variation.
    pub fn scv(&self) -> f64 {
        match self.params {
            Params::Exponential { .. } => 1.0,
            Params::Erlang { shape, .. } => 1.0 / shape as f64,
            Params::HyperExp2 { p1, p2, l1, l2 } => {
                let m2 = 2.0 * (p1 / (l1 * l1) + p2 / (l2 * l2));
                m2 / (self.mean() * self.mean()) - 1.0
            }
            Params::Lognormal { sigma, .. } => (sigma * sigma).exp_m1(),
            Params::Deterministic { .. } => 0.0,
        }
    }

    /// Second moment `E[X^2]`.
    pub fn moment2(&self) -> f64 {
        self.mean() * self.mean() * (1.0 + self.scv())
    }

    /// CDF at `x` (0 for negative arguments).
    pub fn cdf(&self, x: f64) -> f64 {
        // Right-continuous CDF; all families here have F(0) = 0.
        if x <= 0.0 {
            return 0.0;
        }
        match self.params {
            Params::Exponential { rate } => -(-rate * x).exp_m1(),
            Params::Erlang { shape, rate, .. } => erlang_cdf(shape, rate * x),
            Params::HyperExp2 { p1, p2, l1, l2 } => {
                -(p1 * (-l1 * x).exp_m1() + p2 * (-l2 * x).exp_m1())
            }
            Params::Lognormal { mu, sigma } => {
                crate::num::special::normal_cdf((x.ln() - mu) / sigma)
            }
            Params::Deterministic { value } => {
                if x >= value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Survival function `1 - F(x)`, computed without cancellation in the
    /// upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 1.0;
        }
        match self.params {
            Params::Exponential { rate } => (-rate * x).exp(),
            Params::Erlang { shape, rate, .. } => erlang_sf(shape, rate * x),
            Params::HyperExp2 { p1, p2, l1, l2 } => p1 * (-l1 * x).exp() + p2 * (-l2 * x).exp(),
            Params::Lognormal { mu, sigma } => {
                crate::num::special::normal_sf((x.ln() - mu) / sigma)
            }
            Params::Deterministic { value } => {
                if x >= value {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Density at `x`. The deterministic family has no density and returns 0.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self.params {
            Params::Exponential { rate } => rate * (-rate * x).exp(),
            Params::Erlang {
                shape,
                rate,
                ln_fact_m1,
            } => {
                let y = rate * x;
                if y == 0.0 {
                    return if shape == 1 { rate } else { 0.0 };
                }
                rate * ((shape as f64 - 1.0) * y.ln() - y - ln_fact_m1).exp()
            }
            Params::HyperExp2 { p1, p2, l1, l2 } => {
                p1 * l1 * (-l1 * x).exp() + p2 * l2 * (-l2 * x).exp()
            }
            Params::Lognormal { mu, sigma } => {
                if x == 0.0 {
                    0.0
                } else {
                    let z = (x.ln() - mu) / sigma;
                    crate::num::special::normal_pdf(z) / (sigma * x)
                }
            }
            Params::Deterministic { .. } => 0.0,
        }
    }

    /// Smallest `x >= 0` with `F(x) >= p`. Requires `p` in `[0, 1)`.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&p) {
            return Err(Error::Domain(format!("quantile requires p in [0,1), got {p}")));
        }
        if p == 0.0 {
            return Ok(0.0);
        }
        Ok(match self.params {
            Params::Exponential { rate } => -(-p).ln_1p() / rate,
            Params::Lognormal { mu, sigma } => (mu + sigma * normal_quantile(p)).exp(),
            Params::Deterministic { value } => value,
            _ => {
                // Closed-form CDFs; invert by bracketed bisection.
                let mut hi = self.mean();
                while self.cdf(hi) < p {
                    hi *= 2.0;
                    if hi > 1e300 {
                        return Err(Error::Numerical("quantile bracket overflow".into()));
                    }
                }
                let mut lo = 0.0;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if hi - lo <= 1e-14 * hi.max(1.0) {
                        break;
                    }
                    if self.cdf(mid) >= p {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        })
    }

    /// Draws one value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.params {
            Params::Exponential { rate } => sample_exp(rng, rate),
            Params::Erlang { shape, rate, .. } => {
                // Sum of exponential stages; exact and allocation-free.
                let mut acc = 0.0;
                for _ in 0..shape {
                    acc += sample_exp(rng, rate);
                }
                acc
            }
            Params::HyperExp2 { p1, l1, l2, .. } => {
                let l = if rng.random::<f64>() < p1 { l1 } else { l2 };
                sample_exp(rng, l)
            }
            Params::Lognormal { mu, sigma } => {
                let n: f64 = rand_distr::StandardNormal.sample(rng);
                (mu + sigma * n).exp()
            }
            Params::Deterministic { value } => value,
        }
    }

    /// Draws one value from the stationary-excess (equilibrium) distribution
    /// with density `sf(x) / mean`, used to initialize stationary renewal
    /// processes.
    pub fn sample_excess<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.params {
            // Memoryless: excess equals the original.
            Params::Exponential { rate } => sample_exp(rng, rate),
            Params::Erlang { shape, rate, .. } => {
                // Equilibrium Erlang is a uniform mixture over stage counts.
                let j = 1 + (rng.random::<f64>() * shape as f64) as u32;
                let j = j.min(shape);
                let mut acc = 0.0;
                for _ in 0..j {
                    acc += sample_exp(rng, rate);
                }
                acc
            }
            Params::HyperExp2 { p1, l1, l2, .. } => {
                // Branch weights rebalance by branch mean.
                let q1 = p1 / l1 / self.mean();
                let l = if rng.random::<f64>() < q1 { l1 } else { l2 };
                sample_exp(rng, l)
            }
            Params::Lognormal { mu, sigma } => {
                // U times a size-biased draw; the size-biased lognormal
                // shifts mu by sigma^2.
                let n: f64 = rand_distr::StandardNormal.sample(rng);
                rng.random::<f64>() * (mu + sigma * sigma + sigma * n).exp()
            }
            Params::Deterministic { value } => rng.random::<f64>() * value,
        }
    }
}

fn sample_exp<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    let u: f64 = rng.random();
    // ln_1p(-u) is safe: u in [0, 1).
    -(-u).ln_1p() / rate
}

/// Lower regularized incomplete gamma at integer shape: `P(m, y)`.
///
/// Uses the convergent series in whichever tail avoids cancellation.
fn erlang_cdf(m: u32, y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    if y < m as f64 + 2.0 {
        erlang_cdf_series(m, y)
    } else {
        1.0 - erlang_sf(m, y)
    }
}

/// Upper tail `1 - P(m, y) = e^{-y} sum_{j<m} y^j/j!`.
fn erlang_sf(m: u32, y: f64) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    if y >= m as f64 + 2.0 || y > 650.0 {
        let e = (-y).exp();
        let mut term = 1.0;
        let mut acc = 1.0;
        for j in 1..m {
            term *= y / j as f64;
            acc += term;
        }
        e * acc
    } else {
        1.0 - erlang_cdf_series(m, y)
    }
}

/// `P(m, y) = e^{-y} sum_{j>=m} y^j/j!`, accurate for small `y`.
fn erlang_cdf_series(m: u32, y: f64) -> f64 {
    let mut term = 1.0;
    for j in 1..=m {
        term *= y / j as f64;
    }
    let mut acc = term;
    let mut j = m as f64;
    loop {
        j += 1.0;
        term *= y / j;
        acc += term;
        if term <= 1e-18 * acc {
            break;
        }
    }
    (-y).exp() * acc
}

/// Analytic behavior of the CDF at zero for the supported patience families.
///
/// Errs for families whose CDF vanishes to all orders at zero (lognormal) or
/// has no density (deterministic).
pub fn zero_expansion(dist: &Distribution) -> Result<ZeroExpansion> {
    let (k, coeff) = match dist.params {
        Params::Exponential { rate } => (1u32, rate),
        Params::Erlang { shape, rate, .. } => (shape, rate.powi(shape as i32)),
        Params::HyperExp2 { p1, p2, l1, l2 } => (1, p1 * l1 + p2 * l2),
        Params::Lognormal { .. } => {
            return Err(Error::UnsupportedPatience(
                "lognormal CDF vanishes to all orders at 0".into(),
            ))
        }
        Params::Deterministic { .. } => {
            return Err(Error::UnsupportedPatience(
                "deterministic patience has no CDF expansion at 0".into(),
            ))
        }
    };
    let kf = k as f64;
    let mut fact = 1.0;
    for j in 2..=k {
        fact *= j as f64;
    }
    Ok(ZeroExpansion {
        k,
        coeff,
        beta: coeff / fact,
        h: kf / (kf + 1.0),
    })
}
