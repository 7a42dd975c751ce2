//! Monotone cubic (PCHIP) interpolation.

use crate::error::{Error, Result};

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes.
///
/// Preserves monotonicity of the data and never overshoots. Evaluation
/// outside the knot range clamps to the end values; extrapolation policy
/// beyond that is the caller's concern.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// Builds the interpolant. Requires at least two strictly increasing
    /// knots.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidParameter(
                "pchip needs >= 2 knots with matching values".into(),
            ));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter(
                "pchip knots must be strictly increasing".into(),
            ));
        }
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        d[0] = edge_slope(h[0], delta[0], h.get(1).copied(), delta.get(1).copied());
        d[n - 1] = edge_slope(
            h[n - 2],
            delta[n - 2],
            if n >= 3 { Some(h[n - 3]) } else { None },
            if n >= 3 { Some(delta[n - 3]) } else { None },
        );
        Ok(Self { x, y, d })
    }

    /// First knot.
    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    /// Last knot.
    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    /// Value at the first knot.
    pub fn y_first(&self) -> f64 {
        self.y[0]
    }

    /// Value at the last knot.
    pub fn y_last(&self) -> f64 {
        *self.y.last().unwrap()
    }

    /// Iterates over `(x, y)` knot pairs in order.
    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.x.iter().copied().zip(self.y.iter().copied())
    }

    /// Evaluates the interpolant, clamping to the end values outside the
    /// knot range.
    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0];
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1];
        }
        // Index of the last knot <= xq.
        let i = match self.x.partition_point(|&v| v <= xq) {
            0 => 0,
            j => j - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// One-sided three-point end slope with the standard monotonicity clamps.
fn edge_slope(h0: f64, d0: f64, h1: Option<f64>, d1: Option<f64>) -> f64 {
    match (h1, d1) {
        (Some(h1), Some(d1)) => {
            let mut d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
            if d * d0 <= 0.0 {
                d = 0.0;
            } else if d0 * d1 < 0.0 && d.abs() > 3.0 * d0.abs() {
                d = 3.0 * d0;
            }
            d
        }
        _ => d0,
    }
}
