//! Command-line front end for the queue-approximation library: single
//! solves, closed-form benchmarks, simulation, tandem pipelines, weight
//! and dispersion tables, the experiment grid, and heatmap emission.
//!
//! All commands read one JSON configuration document (see [`config`])
//! and write CSV files carrying a `# schema: rqab.<kind>.v<n>` first
//! line (see [`output`]).

pub mod config;
pub mod grid;
pub mod heatmap;
pub mod output;
pub mod runners;

use rqab::Error;

/// Process exit code for an error: 2 for configuration and input
/// problems, 3 for numerical failures on valid inputs.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_)
        | Error::UnsupportedPatience(_)
        | Error::UnsupportedFamily(_)
        | Error::Domain(_)
        | Error::Io(_) => 2,
        Error::GridRefinement(_)
        | Error::Bracket(_)
        | Error::SurfaceCoverage(_)
        | Error::Numerical(_) => 3,
    }
}
