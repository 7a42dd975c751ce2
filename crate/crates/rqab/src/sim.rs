//! Discrete-event simulation of GI/GI/1+GI queues: mean virtual waiting
//! time, abandonment probability, served-customer waits, effective-IDW
//! curve estimation, and two-station tandems.
//!
//! All randomness flows through counter-mode substreams (arrivals, services,
//! patience), so runs with a shared seed are coupled draw-for-draw and
//! estimates are bit-identical across repeats and thread schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::model::QueueModel;
use crate::num::special::student_t_quantile;

/// Substream ids: one block per replication.
const STREAMS_PER_REP: u64 = 8;
const ARRIVAL_STREAM: u64 = 0;
const SERVICE_STREAM: u64 = 1;
const PATIENCE_STREAM: u64 = 2;
const UPSTREAM_ARRIVAL_STREAM: u64 = 3;
const UPSTREAM_SERVICE_STREAM: u64 = 4;

/// Simulation run parameters. The horizon of one replication is
/// `warmup_time + run_time`; statistics cover `[warmup_time, horizon)` split
/// into `n_batches` equal-duration batches.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: QueueModel,
    pub warmup_time: f64,
    pub run_time: f64,
    pub n_batches: u32,
    pub seed: u64,
    pub replications: u32,
}

impl SimConfig {
    /// Config with the default warm-up, 20 batches, and one replication.
    pub fn new(model: QueueModel, run_time: f64, seed: u64) -> Self {
        let warmup_time = default_warmup(model.lambda(), run_time);
        SimConfig {
            model,
            warmup_time,
            run_time,
            n_batches: 20,
            seed,
            replications: 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.run_time > 0.0) || !self.run_time.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "run_time must be positive, got {}",
                self.run_time
            )));
        }
        if !(self.warmup_time >= 0.0) || !self.warmup_time.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "warmup_time must be nonnegative, got {}",
                self.warmup_time
            )));
        }
        if self.n_batches < 10 {
            return Err(Error::InvalidParameter(format!(
                "n_batches must be at least 10, got {}",
                self.n_batches
            )));
        }
        if self.replications < 1 {
            return Err(Error::InvalidParameter(
                "replications must be at least 1".into(),
            ));
        }
        if self.run_time < 10.0 * self.warmup_time {
            log::warn!(
                "run_time = {} is below the recommended 10x warmup_time = {}",
                self.run_time,
                self.warmup_time
            );
        }
        Ok(())
    }
}

/// Default warm-up: 10% of the run or the expected time of 10^4 arrivals,
/// whichever is longer.
pub fn default_warmup(lambda: f64, run_time: f64) -> f64 {
    (0.1 * run_time).max(1e4 / lambda)
}

/// Point estimates with 95% confidence half-widths. With one replication
/// the half-widths come from batch means (Student t over the post-merge
/// batches); with several they come from between-replication variation.
/// A half-width is infinite when fewer than two units support it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean_virtual_wait: f64,
    pub ci_halfwidth: f64,
    pub p_abandon: f64,
    pub p_abandon_halfwidth: f64,
    pub mean_wait_served: f64,
    pub mean_wait_served_halfwidth: f64,
    pub n_arrivals: u64,
    pub n_batches_used: u32,
}

/// Per-batch statistics for external analysis.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchStat {
    pub replication: u32,
    pub index: u32,
    pub start: f64,
    pub duration: f64,
    pub mean_virtual_wait: f64,
    pub n_arrivals: u64,
    pub n_abandoned: u64,
    pub mean_wait_served: f64,
}

/// One point of the estimated effective-IDW curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveIdwPoint {
    pub t: f64,
    pub value: f64,
    pub stderr: f64,
    pub n_windows: u64,
    /// False when fewer than 30 windows (or no effective input) back the
    /// point.
    pub reliable: bool,
}

/// One processed arrival: epoch, offered wait, drawn service requirement,
/// and whether the customer is eventually served.
#[derive(Debug, Clone, Copy)]
struct Arrival {
    t: f64,
    wait: f64,
    service: f64,
    served: bool,
}

/// Linear piece of the virtual-wait path: level `z` at `a`, slope -1 floored
/// at zero, ending at `b`.
#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    z: f64,
}

trait PathVisitor {
    fn arrival(&mut self, a: &Arrival);
    fn segment(&mut self, s: &Segment);
}

/// Runs the offered-wait recursion `W_{n+1} = max(0, W_n + V_n 1{D_n > W_n}
/// - U_{n+1})` from an empty system until `t_end`, reporting every arrival
/// and every linear piece of the virtual-wait path. `next_gap` supplies
/// interarrival gaps (`None` ends the arrival stream early); services and
/// patience draws come from their own streams so runs that share a seed are
/// coupled arrival-for-arrival.
fn run_path<G, V>(
    mut next_gap: G,
    service: &Distribution,
    patience: Option<(&Distribution, f64)>,
    rng_service: &mut ChaCha12Rng,
    rng_patience: &mut ChaCha12Rng,
    t_end: f64,
    visitor: &mut V,
) where
    G: FnMut() -> Option<f64>,
    V: PathVisitor,
{
    let mut t = 0.0_f64;
    let mut z = 0.0_f64;
    loop {
        let Some(gap) = next_gap() else {
            visitor.segment(&Segment { a: t, b: t_end, z });
            return;
        };
        debug_assert!(gap >= 0.0);
        let t_next = t + gap;
        if t_next >= t_end {
            visitor.segment(&Segment { a: t, b: t_end, z });
            return;
        }
        visitor.segment(&Segment {
            a: t,
            b: t_next,
            z,
        });
        let wait = (z - gap).max(0.0);
        let svc = service.sample(rng_service);
        let served = match patience {
            Some((base, alpha)) => base.sample(rng_patience) / alpha > wait,
            None => true,
        };
        z = wait + if served { svc } else { 0.0 };
        t = t_next;
        visitor.arrival(&Arrival {
            t,
            wait,
            service: svc,
            served,
        });
    }
}

/// Area under `max(0, z - s)` for `s` in `[s0, s1]`.
fn wedge(z: f64, s0: f64, s1: f64) -> f64 {
    let cap = |s: f64| {
        let s = s.min(z);
        z * s - 0.5 * s * s
    };
    cap(s1) - cap(s0)
}

#[derive(Debug, Clone, Default)]
struct RawBatch {
    start: f64,
    duration: f64,
    area: f64,
    n_arrivals: u64,
    n_abandoned: u64,
    wait_served_sum: f64,
    n_served: u64,
}

impl RawBatch {
    fn absorb(&mut self, other: &RawBatch) {
        self.start = self.start.min(other.start);
        self.duration += other.duration;
        self.area += other.area;
        self.n_arrivals += other.n_arrivals;
        self.n_abandoned += other.n_abandoned;
        self.wait_served_sum += other.wait_served_sum;
        self.n_served += other.n_served;
    }
}

/// Accumulates the post-warmup path into equal-duration batches.
struct BatchCollector {
    warmup: f64,
    dur: f64,
    batches: Vec<RawBatch>,
}

impl BatchCollector {
    fn new(warmup: f64, run_time: f64, n_batches: u32) -> Self {
        let dur = run_time / n_batches as f64;
        let batches = (0..n_batches)
            .map(|i| RawBatch {
                start: warmup + i as f64 * dur,
                duration: dur,
                ..RawBatch::default()
            })
            .collect();
        BatchCollector {
            warmup,
            dur,
            batches,
        }
    }

    fn batch_index(&self, t: f64) -> usize {
        (((t - self.warmup) / self.dur) as usize).min(self.batches.len() - 1)
    }

    /// Post-merge batches and the number of empty batches folded away.
    fn finish(self) -> (Vec<RawBatch>, usize) {
        let mut out: Vec<RawBatch> = Vec::with_capacity(self.batches.len());
        let mut merged = 0;
        for b in self.batches {
            if b.n_arrivals == 0 {
                if let Some(last) = out.last_mut() {
                    last.absorb(&b);
                    merged += 1;
                    continue;
                }
            }
            out.push(b);
        }
        // A leading empty batch folds forward into its successor.
        while out.len() > 1 && out[0].n_arrivals == 0 {
            let b = out.remove(0);
            out[0].absorb(&b);
            merged += 1;
        }
        (out, merged)
    }
}

impl PathVisitor for BatchCollector {
    fn arrival(&mut self, a: &Arrival) {
        if a.t < self.warmup {
            return;
        }
        let idx = self.batch_index(a.t);
        let b = &mut self.batches[idx];
        b.n_arrivals += 1;
        if a.served {
            b.n_served += 1;
            b.wait_served_sum += a.wait;
        } else {
            b.n_abandoned += 1;
        }
    }

    fn segment(&mut self, s: &Segment) {
        let mut cur = s.a.max(self.warmup);
        while cur < s.b {
            let idx = self.batch_index(cur);
            let end = if idx + 1 == self.batches.len() {
                s.b
            } else {
                (self.warmup + (idx as f64 + 1.0) * self.dur).min(s.b)
            };
            self.batches[idx].area += wedge(s.z, cur - s.a, end - s.a);
            cur = end;
        }
    }
}

struct RepOutput {
    batches: Vec<RawBatch>,
    merged: usize,
}

impl RepOutput {
    fn totals(&self) -> RawBatch {
        let mut t = RawBatch {
            start: f64::INFINITY,
            ..RawBatch::default()
        };
        for b in &self.batches {
            t.absorb(b);
        }
        t
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mean of the samples and the 95% Student-t half-width; infinite
/// half-width when fewer than two samples exist.
fn halfwidth(samples: &[f64]) -> f64 {
    let n = samples.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    let mean = samples.iter().sum::<f64>() / nf;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
    student_t_quantile(0.975, nf - 1.0) * (var / nf).sqrt()
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn combine(config: &SimConfig, reps: &[RepOutput]) -> (SimEstimate, Vec<BatchStat>) {
    let mut totals = RawBatch::default();
    let mut stats = Vec::new();
    for (r, rep) in reps.iter().enumerate() {
        for (i, b) in rep.batches.iter().enumerate() {
            totals.absorb(b);
            stats.push(BatchStat {
                replication: r as u32,
                index: i as u32,
                start: b.start,
                duration: b.duration,
                mean_virtual_wait: b.area / b.duration,
                n_arrivals: b.n_arrivals,
                n_abandoned: b.n_abandoned,
                mean_wait_served: if b.n_served > 0 {
                    b.wait_served_sum / b.n_served as f64
                } else {
                    0.0
                },
            });
        }
    }

    // CI units: batches for a single replication, replication totals
    // otherwise.
    let units: Vec<RawBatch> = if config.replications == 1 {
        reps[0].batches.clone()
    } else {
        reps.iter().map(|r| r.totals()).collect()
    };
    let mvw_units: Vec<f64> = units.iter().map(|b| b.area / b.duration).collect();
    let p_units: Vec<f64> = units
        .iter()
        .filter(|b| b.n_arrivals > 0)
        .map(|b| ratio(b.n_abandoned, b.n_arrivals))
        .collect();
    let ws_units: Vec<f64> = units
        .iter()
        .filter(|b| b.n_served > 0)
        .map(|b| b.wait_served_sum / b.n_served as f64)
        .collect();

    let estimate = SimEstimate {
        mean_virtual_wait: totals.area / totals.duration,
        ci_halfwidth: halfwidth(&mvw_units),
        p_abandon: ratio(totals.n_abandoned, totals.n_arrivals),
        p_abandon_halfwidth: halfwidth(&p_units),
        mean_wait_served: if totals.n_served > 0 {
            totals.wait_served_sum / totals.n_served as f64
        } else {
            0.0
        },
        mean_wait_served_halfwidth: halfwidth(&ws_units),
        n_arrivals: totals.n_arrivals,
        n_batches_used: units.len() as u32,
    };
    (estimate, stats)
}

fn warn_merged(reps: &[RepOutput]) {
    let merged: usize = reps.iter().map(|r| r.merged).sum();
    if merged > 0 {
        log::warn!("merged {merged} empty batches into their neighbors");
    }
}

/// Simulates the queue and returns pooled estimates.
pub fn simulate_queue(config: &SimConfig) -> Result<SimEstimate> {
    Ok(simulate_queue_batches(config)?.0)
}

/// Simulates the queue and returns the estimates together with per-batch
/// statistics (one row per batch per replication).
pub fn simulate_queue_batches(config: &SimConfig) -> Result<(SimEstimate, Vec<BatchStat>)> {
    config.validate()?;
    config.model.interarrival()?;
    let reps: Vec<RepOutput> = (0..config.replications)
        .into_par_iter()
        .map(|r| queue_replication(config, r as u64))
        .collect::<Result<Vec<_>>>()?;
    warn_merged(&reps);
    Ok(combine(config, &reps))
}

fn queue_replication(config: &SimConfig, rep: u64) -> Result<RepOutput> {
    let model = &config.model;
    let inter = model.interarrival()?;
    let mut rng_a = stream_rng(config.seed, STREAMS_PER_REP * rep + ARRIVAL_STREAM);
    let mut rng_s = stream_rng(config.seed, STREAMS_PER_REP * rep + SERVICE_STREAM);
    let mut rng_p = stream_rng(config.seed, STREAMS_PER_REP * rep + PATIENCE_STREAM);
    let t_end = config.warmup_time + config.run_time;
    let mut collector = BatchCollector::new(config.warmup_time, config.run_time, config.n_batches);
    run_path(
        || Some(inter.sample(&mut rng_a)),
        model.service(),
        Some((model.patience_base(), model.alpha())),
        &mut rng_s,
        &mut rng_p,
        t_end,
        &mut collector,
    );
    let (batches, merged) = collector.finish();
    Ok(RepOutput { batches, merged })
}

/// Served-arrival log for the effective-input windows.
struct EventLog {
    warmup: f64,
    events: Vec<(f64, f64)>,
}

impl PathVisitor for EventLog {
    fn arrival(&mut self, a: &Arrival) {
        if a.t >= self.warmup && a.served {
            self.events.push((a.t, a.service));
        }
    }

    fn segment(&mut self, _s: &Segment) {}
}

/// Estimates the effective IDW `mu Var(Y(t)) / E[Y(t)]` per grid time,
/// where `Y(t)` is the served work arriving in a window of length `t`.
/// Windows are non-overlapping and post-warmup; points backed by fewer
/// than 30 windows are flagged unreliable.
pub fn estimate_effective_idw(
    config: &SimConfig,
    t_grid: &[f64],
) -> Result<Vec<EffectiveIdwPoint>> {
    config.validate()?;
    config.model.interarrival()?;
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    for &t in t_grid {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window lengths must be positive, got {t}"
            )));
        }
    }
    let logs: Vec<EventLog> = (0..config.replications)
        .into_par_iter()
        .map(|r| -> Result<EventLog> {
            let rep = r as u64;
            let model = &config.model;
            let inter = model.interarrival()?;
            let mut rng_a = stream_rng(config.seed, STREAMS_PER_REP * rep + ARRIVAL_STREAM);
            let mut rng_s = stream_rng(config.seed, STREAMS_PER_REP * rep + SERVICE_STREAM);
            let mut rng_p = stream_rng(config.seed, STREAMS_PER_REP * rep + PATIENCE_STREAM);
            let mut log = EventLog {
                warmup: config.warmup_time,
                events: Vec::new(),
            };
            run_path(
                || Some(inter.sample(&mut rng_a)),
                model.service(),
                Some((model.patience_base(), model.alpha())),
                &mut rng_s,
                &mut rng_p,
                config.warmup_time + config.run_time,
                &mut log,
            );
            Ok(log)
        })
        .collect::<Result<Vec<_>>>()?;

    let mu = config.model.mu();
    let mut curve = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let per_rep = (config.run_time / t) as usize;
        let mut samples = Vec::with_capacity(per_rep * logs.len());
        for log in &logs {
            let mut sums = vec![0.0_f64; per_rep];
            for &(ti, y) in &log.events {
                let idx = ((ti - config.warmup_time) / t) as usize;
                if idx < per_rep {
                    sums[idx] += y;
                }
            }
            samples.extend_from_slice(&sums);
        }
        let (value, stderr) = window_ratio(&samples, mu);
        curve.push(EffectiveIdwPoint {
            t,
            value,
            stderr,
            n_windows: samples.len() as u64,
            reliable: samples.len() >= 30 && value.is_finite(),
        });
    }
    Ok(curve)
}

/// `mu Var / Mean` over window sums plus a jackknife standard error.
fn window_ratio(samples: &[f64], mu: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return (f64::NAN, f64::NAN);
    }
    let s1: f64 = samples.iter().sum();
    let s2: f64 = samples.iter().map(|y| y * y).sum();
    let mean = s1 / n;
    if !(mean > 0.0) {
        return (f64::NAN, f64::NAN);
    }
    let var = (s2 - s1 * s1 / n) / (n - 1.0);
    let r = mu * var / mean;
    if samples.len() < 3 {
        return (r, f64::NAN);
    }
    // Leave-one-out ratios from the sufficient statistics.
    let n1 = n - 1.0;
    let mut loo = Vec::with_capacity(samples.len());
    for &y in samples {
        let s1p = s1 - y;
        let s2p = s2 - y * y;
        let m = s1p / n1;
        if m > 0.0 {
            let v = (s2p - s1p * s1p / n1) / (n1 - 1.0);
            loo.push(mu * v / m);
        } else {
            loo.push(r);
        }
    }
    let lmean = loo.iter().sum::<f64>() / n;
    let ss: f64 = loo.iter().map(|x| (x - lmean) * (x - lmean)).sum();
    (r, (n1 / n * ss).sqrt())
}

/// Departure epochs of a FIFO queue.
struct DepartureLog {
    deps: Vec<f64>,
}

impl PathVisitor for DepartureLog {
    fn arrival(&mut self, a: &Arrival) {
        self.deps.push(a.t + a.wait + a.service);
    }

    fn segment(&mut self, _s: &Segment) {}
}

/// Estimates the departure IDC `Var(D(t)) / E[D(t)]` of `config.model`
/// run as a FIFO queue without abandonment (its patience spec is ignored),
/// where `D(t)` counts departures in non-overlapping post-warmup windows
/// of length `t`. Points backed by fewer than 30 windows are flagged
/// unreliable.
pub fn estimate_departure_idc(
    config: &SimConfig,
    t_grid: &[f64],
) -> Result<Vec<EffectiveIdwPoint>> {
    config.validate()?;
    config.model.interarrival()?;
    if !(config.model.rho() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "utilization must be below one for stationary departures, got {}",
            config.model.rho()
        )));
    }
    if t_grid.is_empty() {
        return Err(Error::InvalidParameter("empty time grid".into()));
    }
    for &t in t_grid {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "window lengths must be positive, got {t}"
            )));
        }
    }
    let logs: Vec<Vec<f64>> = (0..config.replications)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let rep = r as u64;
            let inter = config.model.interarrival()?;
            let mut rng_a = stream_rng(config.seed, STREAMS_PER_REP * rep + ARRIVAL_STREAM);
            let mut rng_s = stream_rng(config.seed, STREAMS_PER_REP * rep + SERVICE_STREAM);
            let mut rng_unused = stream_rng(config.seed, STREAMS_PER_REP * rep + SERVICE_STREAM);
            let mut log = DepartureLog { deps: Vec::new() };
            run_path(
                || Some(inter.sample(&mut rng_a)),
                config.model.service(),
                None,
                &mut rng_s,
                &mut rng_unused,
                config.warmup_time + config.run_time,
                &mut log,
            );
            Ok(log.deps)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut curve = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let per_rep = (config.run_time / t) as usize;
        let mut samples = Vec::with_capacity(per_rep * logs.len());
        for deps in &logs {
            let mut counts = vec![0.0_f64; per_rep];
            for &e in deps {
                if e >= config.warmup_time {
                    let idx = ((e - config.warmup_time) / t) as usize;
                    if idx < per_rep {
                        counts[idx] += 1.0;
                    }
                }
            }
            samples.extend_from_slice(&counts);
        }
        let (value, stderr) = window_ratio(&samples, 1.0);
        curve.push(EffectiveIdwPoint {
            t,
            value,
            stderr,
            n_windows: samples.len() as u64,
            reliable: samples.len() >= 30 && value.is_finite(),
        });
    }
    Ok(curve)
}

/// Simulates a two-station series: `queue1` as a FIFO GI/GI/1 without
/// abandonment (its patience spec, if any, is ignored), whose departures
/// feed `config.model` as the second station. The second model's own
/// interarrival spec is unused. Returns the second station's estimates.
pub fn simulate_tandem(queue1: &QueueModel, config: &SimConfig) -> Result<SimEstimate> {
    Ok(simulate_tandem_batches(queue1, config)?.0)
}

/// Tandem counterpart of [`simulate_queue_batches`].
pub fn simulate_tandem_batches(
    queue1: &QueueModel,
    config: &SimConfig,
) -> Result<(SimEstimate, Vec<BatchStat>)> {
    config.validate()?;
    if !(queue1.rho() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "upstream utilization must be below one, got {}",
            queue1.rho()
        )));
    }
    queue1.interarrival()?;
    let reps: Vec<RepOutput> = (0..config.replications)
        .into_par_iter()
        .map(|r| tandem_replication(queue1, config, r as u64))
        .collect::<Result<Vec<_>>>()?;
    warn_merged(&reps);
    Ok(combine(config, &reps))
}

fn tandem_replication(queue1: &QueueModel, config: &SimConfig, rep: u64) -> Result<RepOutput> {
    let t_end = config.warmup_time + config.run_time;
    let inter1 = queue1.interarrival()?;
    let mut rng_a1 = stream_rng(config.seed, STREAMS_PER_REP * rep + UPSTREAM_ARRIVAL_STREAM);
    let mut rng_s1 = stream_rng(config.seed, STREAMS_PER_REP * rep + UPSTREAM_SERVICE_STREAM);
    // The no-abandonment branch draws no patience, but the signature needs a
    // stream; reuse the service stream's sibling without consuming it.
    let mut rng_unused = stream_rng(config.seed, STREAMS_PER_REP * rep + UPSTREAM_SERVICE_STREAM);
    let mut log = DepartureLog { deps: Vec::new() };
    run_path(
        || Some(inter1.sample(&mut rng_a1)),
        queue1.service(),
        None,
        &mut rng_s1,
        &mut rng_unused,
        t_end,
        &mut log,
    );
    // FIFO departures are already ordered; sort defensively against ties.
    log.deps.sort_unstable_by(f64::total_cmp);

    let model2 = &config.model;
    let mut rng_s2 = stream_rng(config.seed, STREAMS_PER_REP * rep + SERVICE_STREAM);
    let mut rng_p2 = stream_rng(config.seed, STREAMS_PER_REP * rep + PATIENCE_STREAM);
    let mut collector = BatchCollector::new(config.warmup_time, config.run_time, config.n_batches);
    let mut it = log.deps.iter();
    let mut last = 0.0_f64;
    run_path(
        || {
            it.next().map(|&e| {
                let gap = (e - last).max(0.0);
                last = e;
                gap
            })
        },
        model2.service(),
        Some((model2.patience_base(), model2.alpha())),
        &mut rng_s2,
        &mut rng_p2,
        t_end,
        &mut collector,
    );
    let (batches, merged) = collector.finish();
    Ok(RepOutput { batches, merged })
}
