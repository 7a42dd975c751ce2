//! Single-model subcommands: fixed-point solves, closed-form benchmarks,
//! simulation, the tandem pipeline, and table exports.

use std::path::Path;

use serde::Serialize;

use rqab::benchmarks::{exact_mm1_gi, hazard_rate_approx, hg_approx, wg_approx, BenchmarkResult, Method};
use rqab::model::QueueModel;
use rqab::renewal::{idc_monte_carlo, idc_phase_type, idw_from_idc, IdcCurve};
use rqab::rq::{
    calibrate_b_first, calibrate_b_refined, derived_measures, solve_first_rq, solve_refined_rq,
    DerivedMeasures, RqSolution,
};
use rqab::sim::{estimate_effective_idw, simulate_queue_batches, SimEstimate};
use rqab::tandem::{departure_idc_rows, solve_tandem_rq};
use rqab::wck::{scale_map, ParameterTuple, WckSurface};
use rqab::{Error, Result};

use crate::config::{
    default_idc_tabulation_grid, AlgorithmChoice, BenchmarkConfig, IdcConfig, IdcMethod,
    SimulateConfig, SolveConfig, TandemConfig, WckConfig,
};
use crate::output::{fmt_f64, sanitize_note, write_csv};

/// How a robustness parameter was obtained.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BSource {
    /// Supplied in the configuration.
    Given,
    /// Calibrated at the model's drift.
    Calibrated,
    /// Calibrated at a drift clamped into the covered range; the string
    /// records the drift actually used.
    CalibratedClamped(String),
}

/// Robustness parameter for the first fixed point: the override when
/// given, otherwise first-order calibration at the model's drift.
pub fn first_b(model: &QueueModel, b_override: Option<f64>) -> Result<(f64, BSource)> {
    if let Some(b) = b_override {
        return Ok((b, BSource::Given));
    }
    let ze = model.zero_exp()?;
    let c = model.alpha().powf(-ze.h) * (model.rho() - 1.0);
    Ok((calibrate_b_first(c, ze.k, ze.coeff)?, BSource::Calibrated))
}

/// Robustness parameter for the refined fixed point: the override when
/// given, otherwise surface-matched calibration at the model's drift.
///
/// The drift is clamped into the surface-covered range first; when the
/// matching bracket fails (strong overload makes the matched solution
/// insensitive to `b` and pushes it below the bracket), calibration
/// retries at the critical drift 0, where matching is well posed.
pub fn refined_b(
    model: &QueueModel,
    wck: &WckSurface,
    b_override: Option<f64>,
) -> Result<(f64, BSource)> {
    if let Some(b) = b_override {
        return Ok((b, BSource::Given));
    }
    let ze = model.zero_exp()?;
    let c = model.alpha().powf(-ze.h) * (model.rho() - 1.0);
    let fk0 = if ze.k == 1 {
        1.0
    } else {
        (ze.k as f64).powi(ze.k as i32)
    };
    // c_tilde is linear in c, so the covered drift range is the grid
    // range divided by the slope.
    let (slope, _) = scale_map(&ParameterTuple {
        c: 1.0,
        k: ze.k,
        mu: 1.0,
        c_a2: 1.0,
        c_s2: 1.0,
        fk0,
    })?;
    let lo = wck.c_grid[0] / slope;
    let hi = *wck.c_grid.last().expect("nonempty") / slope;
    let margin = 1e-9 * (hi - lo);
    let cc = c.clamp(lo + margin, hi - margin);
    match calibrate_b_refined(cc, ze.k, wck) {
        Ok(b) if cc == c => Ok((b, BSource::Calibrated)),
        Ok(b) => Ok((b, BSource::CalibratedClamped(format!("drift {c} clamped to {cc}")))),
        Err(Error::Numerical(_)) | Err(Error::Bracket(_)) => {
            let c0 = cc.min(0.0);
            let b = calibrate_b_refined(c0, ze.k, wck)?;
            Ok((
                b,
                BSource::CalibratedClamped(format!(
                    "matching at drift {cc} lacks a bracket; calibrated at {c0}"
                )),
            ))
        }
        Err(e) => Err(e),
    }
}

/// `solve` output.
#[derive(Debug, Serialize)]
pub struct SolveReport {
    pub lambda: f64,
    pub mu: f64,
    pub rho: f64,
    pub alpha: f64,
    pub b_source: BSource,
    pub solution: RqSolution,
    pub derived: DerivedMeasures,
}

/// Solves one model with the configured fixed point.
pub fn run_solve(cfg: &SolveConfig) -> Result<SolveReport> {
    let model = cfg.model.build()?;
    let (solution, b_source) = match cfg.algorithm {
        AlgorithmChoice::First => {
            let idw = idw_from_idc(model.arrival_idc(), model.c_s2())?;
            let (b, src) = first_b(&model, cfg.b)?;
            (solve_first_rq(&model, &idw, b)?, src)
        }
        AlgorithmChoice::Refined => {
            let k = model.zero_exp()?.k;
            let wck = cfg.surface.load(k)?;
            let (b, src) = refined_b(&model, &wck, cfg.b)?;
            (solve_refined_rq(&model, &wck, b)?, src)
        }
    };
    let derived = derived_measures(&solution, &model);
    Ok(SolveReport {
        lambda: model.lambda(),
        mu: model.mu(),
        rho: model.rho(),
        alpha: model.alpha(),
        b_source,
        solution,
        derived,
    })
}

/// `benchmark` output: the exact formula plus every closed-form baseline,
/// inapplicable methods flagged rather than dropped.
#[derive(Debug, Serialize)]
pub struct BenchmarkReport {
    pub lambda: f64,
    pub rho: f64,
    pub alpha: f64,
    pub rows: Vec<BenchmarkResult>,
}

/// Stable lowercase name of a benchmark method.
pub fn method_name(m: Method) -> &'static str {
    match m {
        Method::ExactMm1Gi => "exact_mm1_gi",
        Method::Wg => "wg",
        Method::HazardRate => "hazard_rate",
        Method::Hg => "hg",
        Method::HgModified => "hg_modified",
    }
}

/// Evaluates all benchmark methods on one model; writes a CSV when `out`
/// is given.
pub fn run_benchmark(cfg: &BenchmarkConfig, out: Option<&Path>) -> Result<BenchmarkReport> {
    let model = cfg.model.build()?;
    let mut rows = Vec::new();
    match exact_mm1_gi(&model) {
        Ok(v) => rows.push(BenchmarkResult {
            method: Method::ExactMm1Gi,
            value: Some(v),
            applicable: true,
            note: String::new(),
        }),
        Err(Error::UnsupportedFamily(msg)) => rows.push(BenchmarkResult {
            method: Method::ExactMm1Gi,
            value: None,
            applicable: false,
            note: msg,
        }),
        Err(e) => return Err(e),
    }
    rows.push(wg_approx(&model));
    rows.push(hazard_rate_approx(&model));
    rows.push(hg_approx(&model, false));
    rows.push(hg_approx(&model, true));

    if let Some(path) = out {
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                vec![
                    method_name(r.method).to_string(),
                    r.applicable.to_string(),
                    r.value.map(fmt_f64).unwrap_or_default(),
                    sanitize_note(&r.note),
                ]
            })
            .collect();
        write_csv(
            path,
            "benchmark.v1",
            &["method", "applicable", "value", "note"],
            &csv_rows,
        )?;
    }
    Ok(BenchmarkReport {
        lambda: model.lambda(),
        rho: model.rho(),
        alpha: model.alpha(),
        rows,
    })
}

/// `simulate` output.
#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub lambda: f64,
    pub rho: f64,
    pub alpha: f64,
    pub seed: u64,
    pub estimate: SimEstimate,
    /// Path of the effective-IDW export, when one was requested.
    pub idw_out: Option<String>,
}

/// Runs the simulator; batch statistics go to `out`, and a nonempty
/// `idw_grid` additionally writes `<out stem>.idw.csv`.
pub fn run_simulate(cfg: &SimulateConfig, out: &Path) -> Result<SimulateReport> {
    let sim_cfg = cfg.to_sim_config()?;
    let (estimate, batches) = simulate_queue_batches(&sim_cfg)?;
    let rows: Vec<Vec<String>> = batches
        .iter()
        .map(|b| {
            vec![
                b.replication.to_string(),
                b.index.to_string(),
                fmt_f64(b.start),
                fmt_f64(b.duration),
                fmt_f64(b.mean_virtual_wait),
                b.n_arrivals.to_string(),
                b.n_abandoned.to_string(),
                fmt_f64(b.mean_wait_served),
            ]
        })
        .collect();
    write_csv(
        out,
        "sim.v1",
        &[
            "replication",
            "batch",
            "start",
            "duration",
            "mean_virtual_wait",
            "n_arrivals",
            "n_abandoned",
            "mean_wait_served",
        ],
        &rows,
    )?;

    let mut idw_out = None;
    if !cfg.idw_grid.is_empty() {
        let path = out.with_extension("idw.csv");
        let points = estimate_effective_idw(&sim_cfg, &cfg.idw_grid)?;
        let rows: Vec<Vec<String>> = points
            .iter()
            .map(|p| {
                vec![
                    fmt_f64(p.t),
                    fmt_f64(p.value),
                    fmt_f64(p.stderr),
                    p.n_windows.to_string(),
                    p.reliable.to_string(),
                ]
            })
            .collect();
        write_csv(
            &path,
            "idw.v1",
            &["t", "value", "stderr", "n_windows", "reliable"],
            &rows,
        )?;
        idw_out = Some(path.display().to_string());
    }
    Ok(SimulateReport {
        lambda: sim_cfg.model.lambda(),
        rho: sim_cfg.model.rho(),
        alpha: sim_cfg.model.alpha(),
        seed: cfg.seed,
        estimate,
        idw_out,
    })
}

/// `tandem` output.
#[derive(Debug, Serialize)]
pub struct TandemReport {
    pub lambda: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub alpha: f64,
    pub b_source: BSource,
    pub solution: RqSolution,
    pub derived: DerivedMeasures,
    /// Path of the departure-IDC export, when one was requested.
    pub idc_out: Option<String>,
}

/// Solves the downstream queue of a two-station tandem; optionally
/// exports the blended departure IDC.
pub fn run_tandem(cfg: &TandemConfig, idc_out: Option<&Path>) -> Result<TandemReport> {
    let spec = cfg.build_spec()?;
    let k = spec.queue2.zero_exp()?.k;
    let wck = cfg.surface.load(k)?;
    let (b, b_source) = refined_b(&spec.queue2, &wck, cfg.b)?;
    let solution = solve_tandem_rq(&spec, &wck, b)?;
    let derived = derived_measures(&solution, &spec.queue2);

    let mut idc_path = None;
    if let Some(path) = idc_out {
        let grid = if cfg.idc_grid.is_empty() {
            default_idc_tabulation_grid()
        } else {
            cfg.idc_grid.clone()
        };
        let rows = departure_idc_rows(&spec, &grid)?;
        let csv_rows: Vec<Vec<String>> = rows
            .iter()
            .map(|&(t, v)| vec![fmt_f64(t), fmt_f64(v)])
            .collect();
        write_csv(path, "idc.v1", &["t", "value"], &csv_rows)?;
        idc_path = Some(path.display().to_string());
    }
    Ok(TandemReport {
        lambda: spec.queue2.lambda(),
        rho1: spec.queue1.rho1,
        rho2: spec.queue2.rho(),
        alpha: spec.queue2.alpha(),
        b_source,
        solution,
        derived,
        idc_out: idc_path,
    })
}

/// `wck` output.
#[derive(Debug, Serialize)]
pub struct WckReport {
    pub k: u32,
    pub n_c: usize,
    pub n_t: usize,
    pub cache_path: Option<String>,
}

/// Exports the weight surface for order `k` as a long table.
pub fn run_wck(cfg: &WckConfig, out: &Path) -> Result<WckReport> {
    let surface = cfg.surface.load(cfg.k)?;
    let mut rows = Vec::with_capacity(surface.c_grid.len() * surface.t_grid.len());
    for (i, &c) in surface.c_grid.iter().enumerate() {
        for (j, &t) in surface.t_grid.iter().enumerate() {
            rows.push(vec![
                fmt_f64(c),
                fmt_f64(t),
                fmt_f64(surface.values[i][j]),
                fmt_f64(surface.w_inf[i]),
            ]);
        }
    }
    write_csv(out, "wck.v1", &["c", "t", "value", "w_inf"], &rows)?;
    Ok(WckReport {
        k: surface.k,
        n_c: surface.c_grid.len(),
        n_t: surface.t_grid.len(),
        cache_path: surface.cache_path.as_ref().map(|p| p.display().to_string()),
    })
}

/// `idc` output.
#[derive(Debug, Serialize)]
pub struct IdcReport {
    pub family: String,
    pub n_points: usize,
    pub limit_c2: f64,
}

/// Tabulates the dispersion curve of one interarrival distribution.
pub fn run_idc(cfg: &IdcConfig, out: &Path) -> Result<IdcReport> {
    let grid = cfg
        .t_grid
        .clone()
        .unwrap_or_else(default_idc_tabulation_grid);
    let curve: IdcCurve = match cfg.method {
        IdcMethod::PhaseType => idc_phase_type(&cfg.distribution, &grid)?,
        IdcMethod::MonteCarlo => {
            let dist = rqab::dist::make_distribution(&cfg.distribution)?;
            idc_monte_carlo(&dist, &grid, cfg.n_paths, cfg.seed)?
        }
    };
    let rows: Vec<Vec<String>> = grid
        .iter()
        .map(|&t| vec![fmt_f64(t), fmt_f64(curve.eval(t))])
        .collect();
    write_csv(out, "idc.v1", &["t", "value"], &rows)?;
    Ok(IdcReport {
        family: cfg.distribution.family_name().to_string(),
        n_points: grid.len(),
        limit_c2: curve.limit_c2(),
    })
}
