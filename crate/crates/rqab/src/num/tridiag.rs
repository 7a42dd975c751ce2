//! Tridiagonal (Thomas) solver with a reusable factorization.

use crate::error::{Error, Result};

/// LU-style factorization of a tridiagonal matrix.
///
/// The factorization is computed once and then applied to many right-hand
/// sides, which is the access pattern of an implicit time stepper with a
/// time-independent operator.
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    /// Modified superdiagonal `c'_i`.
    cp: Vec<f64>,
    /// Reciprocal of the eliminated diagonal.
    inv_diag: Vec<f64>,
    /// Original subdiagonal; `lower[i]` multiplies `x[i-1]` (entry 0 unused).
    lower: Vec<f64>,
}

impl TridiagFactor {
    /// Factorizes the matrix with the given diagonals. `lower[0]` and
    /// `upper[n-1]` are ignored.
    pub fn new(lower: &[f64], diag: &[f64], upper: &[f64]) -> Result<Self> {
        let n = diag.len();
        if lower.len() != n || upper.len() != n || n == 0 {
            return Err(Error::InvalidParameter(
                "tridiagonal bands must have equal nonzero length".into(),
            ));
        }
        let mut cp = vec![0.0; n];
        let mut inv_diag = vec![0.0; n];
        let mut denom = diag[0];
        if denom == 0.0 {
            return Err(Error::Numerical("tridiagonal pivot is zero".into()));
        }
        inv_diag[0] = 1.0 / denom;
        cp[0] = upper[0] * inv_diag[0];
        for i in 1..n {
            denom = diag[i] - lower[i] * cp[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::Numerical(format!(
                    "tridiagonal pivot failed at row {i}"
                )));
            }
            inv_diag[i] = 1.0 / denom;
            if i + 1 < n {
                cp[i] = upper[i] * inv_diag[i];
            }
        }
        Ok(Self {
            cp,
            inv_diag,
            lower: lower.to_vec(),
        })
    }

    /// Solves `A x = rhs` in place.
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        debug_assert_eq!(n, self.inv_diag.len());
        rhs[0] *= self.inv_diag[0];
        for i in 1..n {
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) * self.inv_diag[i];
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= self.cp[i] * rhs[i + 1];
        }
    }
}
