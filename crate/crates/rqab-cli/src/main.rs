//! `rqab` binary: dispatches the subcommands, maps errors to exit codes
//! (0 success, 2 configuration error, 3 numerical failure), and prints
//! each command's report as JSON on stdout.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use rqab::{Error, Result};
use rqab_cli::config::{
    full_alpha_values, full_lambda_values, BenchmarkConfig, GridConfig, IdcConfig, SimulateConfig,
    SolveConfig, TandemConfig, WckConfig,
};
use rqab_cli::grid::{run_grid, timing_path, write_grid_csv, write_timing_csv};
use rqab_cli::heatmap::emit_heatmap_data;
use rqab_cli::{exit_code_for, runners};

#[derive(Parser)]
#[command(
    name = "rqab",
    version,
    about = "Steady-state waiting-time approximations for single-server queues \
             with abandonment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one model with a robust fixed point
    Solve {
        /// JSON configuration file
        #[arg(long)]
        config: PathBuf,
        /// Also write the JSON report here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the exact formula and the closed-form baselines
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        /// Also write the rows as CSV here
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate one model and write batch statistics
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Batch CSV; a nonempty idw_grid adds `<out stem>.idw.csv`
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the downstream queue of a two-station tandem
    Tandem {
        #[arg(long)]
        config: PathBuf,
        /// Write the blended departure dispersion curve here
        #[arg(long)]
        idc_out: Option<PathBuf>,
    },
    /// Export a weight surface as a long (c, t, value, w_inf) table
    Wck {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the dispersion curve of one interarrival distribution
    Idc {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the experiment grid: one CSV row per (lambda, alpha, method)
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Main CSV; wall-clock timings go to `<out stem>.timing.csv`
        #[arg(long)]
        out: PathBuf,
        /// Replace the configured axes with the published full grid
        #[arg(long)]
        full: bool,
    },
    /// Pivot a grid CSV into per-method error matrices and an SVG
    Heatmap {
        /// Grid CSV produced by the grid subcommand
        #[arg(long)]
        csv: PathBuf,
        /// Output files are `<prefix>.<method>.csv`, `<prefix>.gaps.csv`,
        /// `<prefix>.svg`
        #[arg(long)]
        out_prefix: PathBuf,
        /// Saturation bound for the rendered errors
        #[arg(long, default_value_t = 0.30)]
        clip: f64,
        /// Skip the SVG rendering
        #[arg(long)]
        no_svg: bool,
    },
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::other(format!(
            "cannot read {}: {e}",
            path.display()
        )))
    })?;
    serde_json::from_str(&text)
        .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize");
    if let Some(path) = out {
        std::fs::write(path, text.as_bytes())?;
    }
    println!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct GridReport {
    n_rows: usize,
    truth: &'static str,
    out: String,
    timing_out: String,
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Solve { config, out } => {
            let cfg: SolveConfig = load_config(&config)?;
            let report = runners::run_solve(&cfg)?;
            emit_json(&report, out.as_deref())
        }
        Command::Benchmark { config, out } => {
            let cfg: BenchmarkConfig = load_config(&config)?;
            let report = runners::run_benchmark(&cfg, out.as_deref())?;
            emit_json(&report, None)
        }
        Command::Simulate { config, out } => {
            let cfg: SimulateConfig = load_config(&config)?;
            let report = runners::run_simulate(&cfg, &out)?;
            emit_json(&report, None)
        }
        Command::Tandem { config, idc_out } => {
            let cfg: TandemConfig = load_config(&config)?;
            let report = runners::run_tandem(&cfg, idc_out.as_deref())?;
            emit_json(&report, None)
        }
        Command::Wck { config, out } => {
            let cfg: WckConfig = load_config(&config)?;
            let report = runners::run_wck(&cfg, &out)?;
            emit_json(&report, None)
        }
        Command::Idc { config, out } => {
            let cfg: IdcConfig = load_config(&config)?;
            let report = runners::run_idc(&cfg, &out)?;
            emit_json(&report, None)
        }
        Command::Grid { config, out, full } => {
            let mut cfg: GridConfig = load_config(&config)?;
            if full {
                cfg.lambda_values = full_lambda_values();
                cfg.alpha_values = full_alpha_values();
            }
            let outcome = run_grid(&cfg)?;
            write_grid_csv(&out, &outcome)?;
            let t_path = timing_path(&out);
            write_timing_csv(&t_path, &outcome)?;
            emit_json(
                &GridReport {
                    n_rows: outcome.rows.len(),
                    truth: match outcome.truth_choice {
                        rqab_cli::config::TruthChoice::ExactMm1Gi => "formula",
                        rqab_cli::config::TruthChoice::Simulation => "simulation",
                    },
                    out: out.display().to_string(),
                    timing_out: t_path.display().to_string(),
                },
                None,
            )
        }
        Command::Heatmap {
            csv,
            out_prefix,
            clip,
            no_svg,
        } => {
            let summary = emit_heatmap_data(&csv, &out_prefix, clip, !no_svg)?;
            emit_json(&summary, None)
        }
    }
}
