//! Shared numerical building blocks: special functions, quadrature,
//! monotone interpolation, tridiagonal solves, and scalar optimization.

pub mod interp;
pub mod opt;
pub mod quad;
pub mod special;
pub mod tridiag;
