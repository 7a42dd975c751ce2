//! Experiment grid: every `(lambda, alpha)` cell of a template model is
//! solved by the requested methods and compared against a truth column,
//! producing one flat CSV row per `(lambda, alpha, method)` plus a
//! wall-clock sidecar.
//!
//! Cells are independent: each builds its own model, truth, and
//! calibration, and failures mark rows inapplicable instead of aborting
//! the grid. Only a truth failure aborts, since every row of the cell
//! would be meaningless. Given equal seeds the main CSV is byte-identical
//! across runs; wall-clock readings live in the sidecar, and the only
//! machine-dependent escape hatch, the simulation time cap, records
//! itself in the `truth_capped` column when it fires.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use rqab::benchmarks::{exact_mm1_gi, hazard_rate_approx, hg_approx, wg_approx};
use rqab::dist::{make_distribution, zero_expansion, DistributionSpec};
use rqab::model::{PatienceSpec, QueueModel};
use rqab::renewal::idw_from_idc;
use rqab::rq::{solve_first_rq, solve_refined_rq};
use rqab::sim::{default_warmup, simulate_queue, SimConfig};
use rqab::wck::WckSurface;
use rqab::{Error, Result};

use crate::config::{GridConfig, MethodChoice, SimBudget, TruthChoice};
use crate::output::{fmt_f64, fmt_opt, sanitize_note, write_csv};
use crate::runners::{first_b, refined_b};

/// One output row of the grid.
#[derive(Debug, Clone, Serialize)]
pub struct GridRow {
    pub lambda: f64,
    pub alpha: f64,
    pub method: MethodChoice,
    /// Whether the method itself applies to the cell's model.
    pub applicable: bool,
    /// True when the value comes from the designated substitute method.
    pub substituted: bool,
    pub value: Option<f64>,
    pub truth: f64,
    /// `formula` or `simulation`.
    pub truth_source: &'static str,
    /// Seed of the truth simulation; absent for formula truth.
    pub truth_seed: Option<u64>,
    /// Confidence half-width of the truth simulation.
    pub truth_halfwidth: Option<f64>,
    /// Final model-time run length of the truth simulation.
    pub truth_run_time: Option<f64>,
    /// True when the wall-clock cap stopped further escalation.
    pub truth_capped: bool,
    /// Signed `(value - truth) / truth`.
    pub rel_err: Option<f64>,
    /// `rel_err` saturated at the configured clip.
    pub clipped_err: Option<f64>,
    pub note: String,
}

/// Wall-clock seconds spent on one unit of grid work.
#[derive(Debug, Clone, Serialize)]
pub struct TimingRow {
    pub lambda: f64,
    pub alpha: f64,
    /// A method name, or `truth` for the truth computation.
    pub stage: String,
    pub seconds: f64,
}

/// Result of a grid run: rows in `(lambda, alpha, method)` order.
#[derive(Debug)]
pub struct GridOutcome {
    pub rows: Vec<GridRow>,
    pub timings: Vec<TimingRow>,
    pub truth_choice: TruthChoice,
}

/// Truth of one cell.
struct CellTruth {
    value: f64,
    source: &'static str,
    seed: Option<u64>,
    halfwidth: Option<f64>,
    run_time: Option<f64>,
    capped: bool,
}

/// Outcome of one method on one cell, before truth comparison.
struct MethodOutcome {
    applicable: bool,
    substituted: bool,
    value: Option<f64>,
    note: String,
}

impl MethodOutcome {
    fn ok(value: f64) -> Self {
        MethodOutcome {
            applicable: true,
            substituted: false,
            value: Some(value),
            note: String::new(),
        }
    }

    fn out(note: String) -> Self {
        MethodOutcome {
            applicable: false,
            substituted: false,
            value: None,
            note,
        }
    }
}

/// Runs the whole grid. The surface is loaded once when any refined
/// solve needs it; truth failures abort, method failures only mark their
/// rows.
pub fn run_grid(cfg: &GridConfig) -> Result<GridOutcome> {
    validate_grid(cfg)?;
    let truth_choice = match cfg.truth {
        Some(t) => t,
        None => auto_truth(cfg),
    };
    let needs_surface = cfg.methods.contains(&MethodChoice::RqRefined);
    let surface = if needs_surface {
        match patience_order(&cfg.template.patience_base) {
            Ok(k) => Some(cfg.surface.load(k)?),
            // No zero order: refined rows will explain themselves.
            Err(_) => None,
        }
    } else {
        None
    };

    let n_alpha = cfg.alpha_values.len();
    let cells: Vec<(usize, f64, f64)> = cfg
        .lambda_values
        .iter()
        .enumerate()
        .flat_map(|(i, &l)| {
            cfg.alpha_values
                .iter()
                .enumerate()
                .map(move |(j, &a)| (i * n_alpha + j, l, a))
        })
        .collect();

    let per_cell: Vec<(Vec<GridRow>, Vec<TimingRow>)> = cells
        .par_iter()
        .map(|&(index, lambda, alpha)| {
            eval_cell(cfg, truth_choice, surface.as_ref(), index, lambda, alpha)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(per_cell.len() * cfg.methods.len());
    let mut timings = Vec::new();
    for (cell_rows, cell_timings) in per_cell {
        rows.extend(cell_rows);
        timings.extend(cell_timings);
    }
    Ok(GridOutcome {
        rows,
        timings,
        truth_choice,
    })
}

fn validate_grid(cfg: &GridConfig) -> Result<()> {
    let positive = |vals: &[f64], what: &str| -> Result<()> {
        if vals.is_empty() {
            return Err(Error::InvalidParameter(format!("{what} must be nonempty")));
        }
        if let Some(&bad) = vals.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{what} must be positive and finite, got {bad}"
            )));
        }
        Ok(())
    };
    positive(&cfg.lambda_values, "lambda_values")?;
    positive(&cfg.alpha_values, "alpha_values")?;
    if cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("methods must be nonempty".into()));
    }
    if !(cfg.clip > 0.0) || !cfg.clip.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "clip must be positive, got {}",
            cfg.clip
        )));
    }
    Ok(())
}

/// Formula truth exactly when the template is Poisson-in,
/// exponential-service; everything else simulates.
fn auto_truth(cfg: &GridConfig) -> TruthChoice {
    let poisson = matches!(
        cfg.template.interarrival,
        DistributionSpec::Exponential { .. }
    );
    let exp_service = matches!(cfg.template.service, DistributionSpec::Exponential { .. });
    if poisson && exp_service {
        TruthChoice::ExactMm1Gi
    } else {
        TruthChoice::Simulation
    }
}

/// Zero order of the template's base patience CDF.
fn patience_order(base: &DistributionSpec) -> Result<u32> {
    Ok(zero_expansion(&make_distribution(base)?)?.k)
}

fn eval_cell(
    cfg: &GridConfig,
    truth_choice: TruthChoice,
    surface: Option<&WckSurface>,
    index: usize,
    lambda: f64,
    alpha: f64,
) -> Result<(Vec<GridRow>, Vec<TimingRow>)> {
    let model = QueueModel::from_renewal(
        &cfg.template.interarrival.with_mean(1.0 / lambda),
        &cfg.template.service,
        &PatienceSpec {
            base: cfg.template.patience_base.clone(),
            alpha,
        },
    )?;
    let seed = cfg.seed.wrapping_add(index as u64);

    let mut timings = Vec::new();
    let t0 = Instant::now();
    let truth = match truth_choice {
        TruthChoice::ExactMm1Gi => CellTruth {
            value: exact_mm1_gi(&model)?,
            source: "formula",
            seed: None,
            halfwidth: None,
            run_time: None,
            capped: false,
        },
        TruthChoice::Simulation => simulation_truth(&model, &cfg.sim, seed)?,
    };
    timings.push(TimingRow {
        lambda,
        alpha,
        stage: "truth".into(),
        seconds: t0.elapsed().as_secs_f64(),
    });

    let mut outcomes: Vec<(MethodChoice, MethodOutcome)> = Vec::new();
    for &method in &cfg.methods {
        let t1 = Instant::now();
        let outcome = eval_method(method, &model, surface, cfg);
        timings.push(TimingRow {
            lambda,
            alpha,
            stage: method.name().into(),
            seconds: t1.elapsed().as_secs_f64(),
        });
        outcomes.push((method, outcome));
    }

    // The Ward-Glynn expansion needs a positive patience density at zero;
    // where it has none, the hazard-rate value stands in when available.
    if cfg.substitute_wg {
        let hr = outcomes
            .iter()
            .find(|(m, o)| *m == MethodChoice::HazardRate && o.value.is_some())
            .map(|(_, o)| o.value)
            .unwrap_or_else(|| hazard_rate_approx(&model).value);
        if let Some(hr_value) = hr {
            for (m, o) in &mut outcomes {
                if *m == MethodChoice::Wg && !o.applicable && o.value.is_none() {
                    o.value = Some(hr_value);
                    o.substituted = true;
                    o.note = format!("{}; hazard-rate value substituted", o.note);
                }
            }
        }
    }

    let rows = outcomes
        .into_iter()
        .map(|(method, o)| {
            let rel_err = o
                .value
                .filter(|_| truth.value > 0.0 && truth.value.is_finite())
                .map(|v| (v - truth.value) / truth.value);
            GridRow {
                lambda,
                alpha,
                method,
                applicable: o.applicable,
                substituted: o.substituted,
                value: o.value,
                truth: truth.value,
                truth_source: truth.source,
                truth_seed: truth.seed,
                truth_halfwidth: truth.halfwidth,
                truth_run_time: truth.run_time,
                truth_capped: truth.capped,
                rel_err,
                clipped_err: rel_err.map(|e| e.clamp(-cfg.clip, cfg.clip)),
                note: o.note,
            }
        })
        .collect();
    Ok((rows, timings))
}

/// Simulation truth with deterministic escalation: the run length doubles
/// until the relative half-width target holds or the doubling budget is
/// spent. The wall-clock cap is checked between runs and only stops
/// further escalation.
fn simulation_truth(model: &QueueModel, budget: &SimBudget, seed: u64) -> Result<CellTruth> {
    let start = Instant::now();
    let mut run_time = budget.initial_run_time;
    let mut doublings = 0;
    let mut capped = false;
    loop {
        let sim_cfg = SimConfig {
            model: model.clone(),
            warmup_time: default_warmup(model.lambda(), run_time),
            run_time,
            n_batches: budget.n_batches,
            seed,
            replications: budget.replications,
        };
        let est = simulate_queue(&sim_cfg)?;
        let rel = est.ci_halfwidth / est.mean_virtual_wait.abs().max(f64::MIN_POSITIVE);
        let met = rel <= budget.ci_target;
        if !met && doublings < budget.max_doublings {
            if start.elapsed().as_secs_f64() > budget.time_cap_secs {
                capped = true;
            } else {
                run_time *= 2.0;
                doublings += 1;
                continue;
            }
        }
        return Ok(CellTruth {
            value: est.mean_virtual_wait,
            source: "simulation",
            seed: Some(seed),
            halfwidth: Some(est.ci_halfwidth),
            run_time: Some(run_time),
            capped,
        });
    }
}

fn eval_method(
    method: MethodChoice,
    model: &QueueModel,
    surface: Option<&WckSurface>,
    cfg: &GridConfig,
) -> MethodOutcome {
    match method {
        MethodChoice::RqFirst => {
            let solve = || -> Result<f64> {
                let idw = idw_from_idc(model.arrival_idc(), model.c_s2())?;
                let (b, _) = first_b(model, cfg.b)?;
                Ok(solve_first_rq(model, &idw, b)?.z)
            };
            match solve() {
                Ok(z) => MethodOutcome::ok(z),
                Err(e) => MethodOutcome::out(e.to_string()),
            }
        }
        MethodChoice::RqRefined => {
            let Some(wck) = surface else {
                return MethodOutcome::out(
                    "patience CDF has no zero order, refined solve unavailable".into(),
                );
            };
            let solve = || -> Result<f64> {
                let (b, _) = refined_b(model, wck, cfg.b)?;
                Ok(solve_refined_rq(model, wck, b)?.z)
            };
            match solve() {
                Ok(z) => MethodOutcome::ok(z),
                Err(e) => MethodOutcome::out(e.to_string()),
            }
        }
        MethodChoice::Wg => from_benchmark(wg_approx(model)),
        MethodChoice::HazardRate => from_benchmark(hazard_rate_approx(model)),
        MethodChoice::Hg => from_benchmark(hg_approx(model, false)),
        MethodChoice::HgModified => from_benchmark(hg_approx(model, true)),
    }
}

fn from_benchmark(r: rqab::benchmarks::BenchmarkResult) -> MethodOutcome {
    MethodOutcome {
        applicable: r.applicable,
        substituted: false,
        value: r.value,
        note: r.note,
    }
}

/// Header of the main grid CSV.
pub const GRID_HEADER: [&str; 15] = [
    "lambda",
    "alpha",
    "method",
    "applicable",
    "substituted",
    "value",
    "truth",
    "truth_source",
    "truth_seed",
    "truth_halfwidth",
    "truth_run_time",
    "truth_capped",
    "rel_err",
    "clipped_err",
    "note",
];

/// Writes the main grid CSV (schema `rqab.grid.v1`).
pub fn write_grid_csv(out: &Path, outcome: &GridOutcome) -> Result<()> {
    let rows: Vec<Vec<String>> = outcome
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.lambda),
                fmt_f64(r.alpha),
                r.method.name().to_string(),
                r.applicable.to_string(),
                r.substituted.to_string(),
                fmt_opt(r.value),
                fmt_f64(r.truth),
                r.truth_source.to_string(),
                r.truth_seed.map(|s| s.to_string()).unwrap_or_default(),
                fmt_opt(r.truth_halfwidth),
                fmt_opt(r.truth_run_time),
                r.truth_capped.to_string(),
                fmt_opt(r.rel_err),
                fmt_opt(r.clipped_err),
                sanitize_note(&r.note),
            ]
        })
        .collect();
    write_csv(out, "grid.v1", &GRID_HEADER, &rows)
}

/// Sidecar path of a grid CSV: `<out>.timing.csv` with the extension
/// replaced.
pub fn timing_path(out: &Path) -> PathBuf {
    out.with_extension("timing.csv")
}

/// Writes the wall-clock sidecar (schema `rqab.timing.v1`). Not expected
/// to be reproducible across runs.
pub fn write_timing_csv(out: &Path, outcome: &GridOutcome) -> Result<()> {
    let rows: Vec<Vec<String>> = outcome
        .timings
        .iter()
        .map(|t| {
            vec![
                fmt_f64(t.lambda),
                fmt_f64(t.alpha),
                t.stage.clone(),
                fmt_f64(t.seconds),
            ]
        })
        .collect();
    write_csv(
        out,
        "timing.v1",
        &["lambda", "alpha", "stage", "seconds"],
        &rows,
    )
}
