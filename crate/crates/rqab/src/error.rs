//! Error type shared by all modules of the library.

use thiserror::Error;

/// Library-wide error type.
///
/// Variants are grouped by how a caller should react: `InvalidParameter`,
/// `UnsupportedPatience`, `UnsupportedFamily`, and `Domain` indicate bad
/// inputs; the remaining variants indicate numerical or I/O failures on
/// valid inputs.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument violates a documented invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The distribution cannot serve as a patience distribution (its CDF
    /// vanishes to all orders at zero, or it has an atom).
    #[error("unsupported patience distribution: {0}")]
    UnsupportedPatience(String),

    /// The distribution family is outside what this operation supports.
    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    /// A scalar argument is outside the mathematical domain of the function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A PDE solve produced values outside the admissible band, indicating
    /// the grid must be refined.
    #[error("grid refinement needed: {0}")]
    GridRefinement(String),

    /// A bracketing or bisection step failed to enclose a root or supremum.
    #[error("bracket failure: {0}")]
    Bracket(String),

    /// The requested (c, k) point is not covered by the supplied surface.
    #[error("surface coverage: {0}")]
    SurfaceCoverage(String),

    /// A numerical routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Filesystem failure while reading or writing a cache or output file.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
