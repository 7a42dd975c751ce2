//! Index of dispersion for counts of stationary renewal processes, computed
//! from phase-type matrix exponentials or Monte Carlo, and the index of
//! dispersion for work built on it.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::dist::{Distribution, DistributionSpec, Params};
use crate::error::{Error, Result};
use crate::num::interp::Pchip;

/// How an [`IdcCurve`]'s values were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdcSource {
    ClosedForm,
    PhaseType,
    Tabulated,
    MonteCarlo,
}

#[derive(Debug, Clone)]
enum Repr {
    /// Flat curve; the stationary Poisson process has value 1.
    Constant(f64),
    /// Deterministic interrenewal gaps at the given rate:
    /// `I(t) = frac(rate*t) (1 - frac(rate*t)) / (rate*t)`.
    DeterministicGaps { rate: f64 },
    /// Monotone-cubic interpolation in log time between tabulated knots.
    /// Below the first knot the curve blends linearly in `t` toward the
    /// renewal limit `I(0+) = 1`; above the last knot it clamps to
    /// `limit_c2`.
    Table {
        values: Pchip,
        stderr: Option<Pchip>,
        t_first: f64,
        v_first: f64,
        t_last: f64,
    },
    /// Time-varying convex blend of two curves, used for departure
    /// processes: `w(t) I_a(t) + (1 - w(t)) I_s(t)` with
    /// `w(t) = wstar(coef * t)`.
    Blend {
        coef: f64,
        arrival: Box<IdcCurve>,
        service: Box<IdcCurve>,
    },
}

/// Index of dispersion for counts of a stationary point process:
/// `I(t) = Var(A(t)) / (lambda t)`.
///
/// Evaluation is deterministic given the source data. The deterministic-gaps
/// closed form touches zero at integer multiples of the interrenewal time;
/// every other constructor produces strictly positive curves.
#[derive(Debug, Clone)]
pub struct IdcCurve {
    repr: Repr,
    limit_c2: f64,
    source: IdcSource,
}

impl IdcCurve {
    /// Flat curve at `value` for all times, e.g. 1 for Poisson arrivals.
    pub fn constant(value: f64) -> Self {
        IdcCurve {
            repr: Repr::Constant(value),
            limit_c2: value,
            source: IdcSource::ClosedForm,
        }
    }

    /// Exact curve for deterministic interrenewal gaps at `rate`.
    pub fn deterministic_gaps(rate: f64) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "deterministic-gaps rate must be positive, got {rate}"
            )));
        }
        Ok(IdcCurve {
            repr: Repr::DeterministicGaps { rate },
            limit_c2: 0.0,
            source: IdcSource::ClosedForm,
        })
    }

    /// Curve from tabulated `(t, value)` rows with optional standard errors.
    pub fn tabulated(
        rows: &[(f64, f64)],
        stderr: Option<&[f64]>,
        limit_c2: f64,
        source: IdcSource,
    ) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::InvalidParameter(
                "tabulated IDC needs at least 2 rows".into(),
            ));
        }
        if let Some(se) = stderr {
            if se.len() != rows.len() {
                return Err(Error::InvalidParameter(
                    "stderr column length must match row count".into(),
                ));
            }
        }
        let log_t: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
        let vals: Vec<f64> = rows.iter().map(|r| r.1).collect();
        if rows.iter().any(|r| !(r.0 > 0.0)) {
            return Err(Error::InvalidParameter("IDC times must be positive".into()));
        }
        if vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Numerical(
                "IDC values must be positive and finite".into(),
            ));
        }
        if !(limit_c2 >= 0.0) || !limit_c2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "limit_c2 must be nonnegative, got {limit_c2}"
            )));
        }
        let values = Pchip::new(log_t.clone(), vals)?;
        let stderr = match stderr {
            Some(se) => Some(Pchip::new(log_t, se.to_vec())?),
            None => None,
        };
        Ok(IdcCurve {
            repr: Repr::Table {
                values,
                stderr,
                t_first: rows[0].0,
                v_first: rows[0].1,
                t_last: rows[rows.len() - 1].0,
            },
            limit_c2,
            source,
        })
    }

    /// Time-varying convex blend of an arrival and a service curve with
    /// weight `wstar(coef * t)` on the arrival curve. The limit is the
    /// arrival curve's limit because the weight tends to 1.
    pub fn departure_blend(coef: f64, arrival: IdcCurve, service: IdcCurve) -> Result<Self> {
        if !(coef > 0.0) || !coef.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "blend coefficient must be positive, got {coef}"
            )));
        }
        let limit_c2 = arrival.limit_c2;
        Ok(IdcCurve {
            repr: Repr::Blend {
                coef,
                arrival: Box::new(arrival),
                service: Box::new(service),
            },
            limit_c2,
            source: IdcSource::Tabulated,
        })
    }

    /// Long-time limit `I(infinity)`, the arrival SCV.
    pub fn limit_c2(&self) -> f64 {
        self.limit_c2
    }

    /// Provenance of the curve data.
    pub fn source(&self) -> IdcSource {
        self.source
    }

    /// True exactly for the constant curve `I(t) = 1`, the Poisson process
    /// signature.
    pub fn is_constant_one(&self) -> bool {
        matches!(self.repr, Repr::Constant(v) if v == 1.0)
    }

    /// Evaluates `I(t)`. Arguments `t <= 0` return the renewal short-time
    /// limit `I(0+) = 1`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        match &self.repr {
            Repr::Constant(v) => *v,
            Repr::DeterministicGaps { rate } => {
                let x = rate * t;
                let f = x.fract();
                f * (1.0 - f) / x
            }
            Repr::Table {
                values,
                t_first,
                v_first,
                t_last,
                ..
            } => {
                if t < *t_first {
                    1.0 + (v_first - 1.0) * (t / t_first)
                } else if t > *t_last {
                    self.limit_c2
                } else {
                    values.eval(t.ln())
                }
            }
            Repr::Blend {
                coef,
                arrival,
                service,
            } => {
                let w = crate::num::special::wstar(coef * t);
                w * arrival.eval(t) + (1.0 - w) * service.eval(t)
            }
        }
    }

    /// Monte Carlo standard error of `I(t)`, when the curve carries one.
    pub fn stderr(&self, t: f64) -> Option<f64> {
        match &self.repr {
            Repr::Table {
                stderr: Some(se), ..
            } => Some(se.eval(t.ln().clamp(se.x_min(), se.x_max()))),
            _ => None,
        }
    }

    /// Tabulated `(t, value, stderr)` rows, when the curve is a table.
    pub fn rows(&self) -> Option<Vec<(f64, f64, Option<f64>)>> {
        match &self.repr {
            Repr::Table { values, stderr, .. } => Some(
                values
                    .knots()
                    .map(|(lt, v)| {
                        let se = stderr.as_ref().map(|s| s.eval(lt));
                        (lt.exp(), v, se)
                    })
                    .collect(),
            ),
            _ => None,
        }
    }
}

/// Index of dispersion for work: an affine transform of an arrival IDC,
/// `I_w(t) = scale * I_a(t) + shift`.
#[derive(Debug, Clone)]
pub struct IdwCurve {
    idc: IdcCurve,
    scale: f64,
    shift: f64,
}

impl IdwCurve {
    /// Evaluates `I_w(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        self.scale * self.idc.eval(t) + self.shift
    }

    /// Long-time limit `c_x^2`.
    pub fn limit_cx2(&self) -> f64 {
        self.scale * self.idc.limit_c2() + self.shift
    }

    /// The arrival IDC this curve wraps.
    pub fn idc(&self) -> &IdcCurve {
        &self.idc
    }
}

/// IDW of a compound stationary renewal-reward input:
/// `I_w(t) = I_a(t) + c_s2`.
pub fn idw_from_idc(idc: &IdcCurve, c_s2: f64) -> Result<IdwCurve> {
    if !(c_s2 >= 0.0) || !c_s2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "service SCV must be nonnegative, got {c_s2}"
        )));
    }
    Ok(IdwCurve {
        idc: idc.clone(),
        scale: 1.0,
        shift: c_s2,
    })
}

/// Overload-adjusted IDW surrogate:
/// `I_w(t) = I_a(t)/(rho v 1) + (1 - 1/(rho v 1)) + c_s2`.
///
/// The arrival part is a convex combination of `I_a(t)` and 1, so it lies
/// between them pointwise; for `rho <= 1` this reduces to [`idw_from_idc`].
pub fn effective_idw_surrogate(idc: &IdcCurve, rho: f64, c_s2: f64) -> Result<IdwCurve> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "traffic intensity must be positive, got {rho}"
        )));
    }
    if !(c_s2 >= 0.0) || !c_s2.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "service SCV must be nonnegative, got {c_s2}"
        )));
    }
    let inv = 1.0 / rho.max(1.0);
    Ok(IdwCurve {
        idc: idc.clone(),
        scale: inv,
        shift: (1.0 - inv) + c_s2,
    })
}

/// Phase-type representation: sub-generator rows `s_rows` and initial
/// probabilities `beta`.
struct PhaseRep {
    beta: Vec<f64>,
    s: DMatrix<f64>,
}

fn phase_rep(dist: &Distribution) -> Option<PhaseRep> {
    match *dist.params() {
        Params::Exponential { rate } => Some(PhaseRep {
            beta: vec![1.0],
            s: DMatrix::from_element(1, 1, -rate),
        }),
        Params::Erlang { shape, rate, .. } => {
            let m = shape as usize;
            let mut s = DMatrix::zeros(m, m);
            for i in 0..m {
                s[(i, i)] = -rate;
                if i + 1 < m {
                    s[(i, i + 1)] = rate;
                }
            }
            let mut beta = vec![0.0; m];
            beta[0] = 1.0;
            Some(PhaseRep { beta, s })
        }
        Params::HyperExp2 { p1, p2, l1, l2 } => {
            let mut s = DMatrix::zeros(2, 2);
            s[(0, 0)] = -l1;
            s[(1, 1)] = -l2;
            Some(PhaseRep {
                beta: vec![p1, p2],
                s,
            })
        }
        _ => None,
    }
}

/// `I(t)` for the stationary phase-type renewal process at one time point.
///
/// Uses `Var(A(t)) = lambda t - (lambda t)^2 + 2 lambda int_0^t m(u) du`
/// with `m` the ordinary renewal function, and evaluates the double
/// integral of `exp(Q u)` as the upper-right block of one augmented matrix
/// exponential.
fn phase_type_idc_at(rep: &PhaseRep, lambda: f64, t: f64) -> f64 {
    let m = rep.beta.len();
    let exit: Vec<f64> = (0..m).map(|i| -rep.s.row(i).sum()).collect();
    let mut q = rep.s.clone();
    for i in 0..m {
        for j in 0..m {
            q[(i, j)] += exit[i] * rep.beta[j];
        }
    }
    let mut aug = DMatrix::zeros(3 * m, 3 * m);
    for i in 0..m {
        for j in 0..m {
            aug[(i, j)] = q[(i, j)];
        }
        aug[(i, m + i)] = 1.0;
        aug[(m + i, 2 * m + i)] = 1.0;
    }
    let e = (aug * t).exp();
    // beta' * J2 * s with J2 the (1,3) block.
    let mut acc = 0.0;
    for i in 0..m {
        for j in 0..m {
            acc += rep.beta[i] * e[(i, 2 * m + j)] * exit[j];
        }
    }
    1.0 - lambda * t + 2.0 * acc / t
}

fn validate_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("t_grid must be nonempty".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter(
            "t_grid entries must be positive and finite".into(),
        ));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "t_grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// IDC of the stationary renewal process with the given interarrival
/// distribution, for phase-type families.
///
/// Exponential interarrivals short-circuit to the flat Poisson curve. For
/// Erlang and balanced hyperexponential families the curve is tabulated on
/// `t_grid`, extended past its last point (doubling, up to `t = 1e7`) until
/// the tail is within 1% of the SCV limit.
pub fn idc_phase_type(interarrival: &DistributionSpec, t_grid: &[f64]) -> Result<IdcCurve> {
    validate_t_grid(t_grid)?;
    let dist = crate::dist::make_distribution(interarrival)?;
    match interarrival {
        DistributionSpec::Exponential { .. } => return Ok(IdcCurve::constant(1.0)),
        DistributionSpec::Erlang { .. } | DistributionSpec::HyperExp2Balanced { .. } => {}
        other => {
            return Err(Error::UnsupportedFamily(format!(
                "{} is not phase-type; use idc_monte_carlo",
                other.family_name()
            )))
        }
    }
    let rep = phase_rep(&dist).expect("family checked above");
    let lambda = 1.0 / dist.mean();
    let limit = dist.scv();

    let mut knots: Vec<f64> = t_grid.to_vec();
    if knots.len() == 1 {
        knots.push(2.0 * knots[0]);
    }
    let mut vals: Vec<f64> = knots
        .iter()
        .map(|&t| phase_type_idc_at(&rep, lambda, t))
        .collect();
    loop {
        let tail = *vals.last().expect("nonempty");
        if (tail - limit).abs() <= 0.01 * limit {
            break;
        }
        let next_t = 2.0 * knots.last().expect("nonempty");
        if next_t > 1e7 {
            return Err(Error::Numerical(format!(
                "IDC tail has not reached its limit {limit} by t = 1e7 (last value {tail})"
            )));
        }
        knots.push(next_t);
        vals.push(phase_type_idc_at(&rep, lambda, next_t));
    }
    if vals.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::Numerical(
            "phase-type IDC produced a nonpositive or nonfinite value".into(),
        ));
    }
    let rows: Vec<(f64, f64)> = knots.into_iter().zip(vals).collect();
    IdcCurve::tabulated(&rows, None, limit, IdcSource::PhaseType)
}

/// Interarrival sampler with enough structure to initialize the renewal
/// process in its stationary version.
pub trait InterarrivalSampler: Sync {
    /// Mean interarrival time.
    fn mean(&self) -> f64;
    /// Ordinary interarrival draw.
    fn sample(&self, rng: &mut ChaCha12Rng) -> f64;
    /// Stationary-excess draw for the delay to the first arrival.
    fn sample_excess(&self, rng: &mut ChaCha12Rng) -> f64;
    /// Known SCV limit of the IDC, if any.
    fn limit_scv(&self) -> Option<f64> {
        None
    }
}

impl InterarrivalSampler for Distribution {
    fn mean(&self) -> f64 {
        Distribution::mean(self)
    }
    fn sample(&self, rng: &mut ChaCha12Rng) -> f64 {
        Distribution::sample(self, rng)
    }
    fn sample_excess(&self, rng: &mut ChaCha12Rng) -> f64 {
        Distribution::sample_excess(self, rng)
    }
    fn limit_scv(&self) -> Option<f64> {
        Some(self.scv())
    }
}

/// Monte Carlo IDC of a stationary renewal process: simulates `n_paths`
/// equilibrium-delayed paths and reports the per-time count variance over
/// rate times `t`, with standard errors.
///
/// Each path uses an independent, scheduling-independent RNG stream, so the
/// result is reproducible for a given seed.
pub fn idc_monte_carlo<S: InterarrivalSampler + ?Sized>(
    sampler: &S,
    t_grid: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<IdcCurve> {
    validate_t_grid(t_grid)?;
    if n_paths < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "n_paths = {n_paths} is too small for stable count variances; need at least 10000"
        )));
    }
    if t_grid.len() < 2 {
        return Err(Error::InvalidParameter(
            "Monte Carlo IDC needs at least 2 grid times".into(),
        ));
    }
    let n_grid = t_grid.len();
    if n_paths.saturating_mul(n_grid) > 200_000_000 {
        return Err(Error::InvalidParameter(
            "n_paths * t_grid.len() exceeds the 2e8 count-matrix budget".into(),
        ));
    }
    let t_max = t_grid[n_grid - 1];
    let mut counts = vec![0u32; n_paths * n_grid];
    counts
        .par_chunks_mut(n_grid)
        .enumerate()
        .for_each(|(path, row)| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(path as u64);
            let mut arrival = sampler.sample_excess(&mut rng);
            let mut n: u32 = 0;
            for (j, &t) in t_grid.iter().enumerate() {
                while arrival <= t {
                    n += 1;
                    arrival += sampler.sample(&mut rng);
                    if arrival > t_max && n == u32::MAX {
                        break;
                    }
                }
                row[j] = n;
            }
        });

    let lambda = 1.0 / sampler.mean();
    let nf = n_paths as f64;
    let mut rows = Vec::with_capacity(n_grid);
    let mut ses = Vec::with_capacity(n_grid);
    for j in 0..n_grid {
        let mean = counts[j..]
            .iter()
            .step_by(n_grid)
            .map(|&c| c as f64)
            .sum::<f64>()
            / nf;
        let mut m2 = 0.0;
        let mut m4 = 0.0;
        for c in counts[j..].iter().step_by(n_grid) {
            let d = *c as f64 - mean;
            let d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        let var = m2 / (nf - 1.0);
        m4 /= nf;
        let denom = lambda * t_grid[j];
        let idc = var / denom;
        let se = ((m4 - var * var).max(0.0) / nf).sqrt() / denom;
        if !(idc > 0.0) || !idc.is_finite() {
            return Err(Error::Numerical(format!(
                "Monte Carlo IDC at t = {} is {idc}; increase n_paths",
                t_grid[j]
            )));
        }
        rows.push((t_grid[j], idc));
        ses.push(se);
    }
    let limit = sampler.limit_scv().unwrap_or(rows[n_grid - 1].1);
    IdcCurve::tabulated(&rows, Some(&ses), limit, IdcSource::MonteCarlo)
}
