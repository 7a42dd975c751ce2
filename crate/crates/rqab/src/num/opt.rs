//! Scalar root finding and supremum search over the positive half-line.

use crate::error::{Error, Result};

/// Bisection for a root of `f` on `[lo, hi]`, requiring a sign change.
///
/// Stops when the bracket width drops below `x_tol` and returns the
/// midpoint. Exact zeros at either endpoint are returned immediately.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, x_tol: f64, max_iter: u32) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Bracket(format!(
            "no sign change on [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}"
        )));
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo < x_tol {
            return Ok(mid);
        }
        let fmid = f(mid);
        if fmid == 0.0 {
            return Ok(mid);
        }
        if fmid.signum() == flo.signum() {
            lo = mid;
            flo = fmid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Location and value of a supremum over `u > 0`.
#[derive(Debug, Clone, Copy)]
pub struct SupResult {
    /// Maximizing argument (`f64::INFINITY` when the search diverged).
    pub arg: f64,
    /// Supremum value (`f64::INFINITY` when unbounded above).
    pub value: f64,
}

/// Supremum of `f` over `u > 0` for objectives that are concave-like on a
/// log scale (linear drift plus a concave square-root term).
///
/// Strategy: evaluate on a doubling ladder from `1e-8`, stopping after the
/// value has decreased three times in a row past the running maximum;
/// golden-section in `log u` between the ladder neighbors of the maximum;
/// then a log-spaced local grid scan around the optimum guards against the
/// rare multimodal case, re-polishing if the scan finds a better point.
/// A ladder still rising at `u = 1e18` is reported as unbounded.
pub fn sup_positive<F: Fn(f64) -> f64>(f: F, rel_tol: f64) -> SupResult {
    let g = |u: f64| {
        let v = f(u);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    // Doubling ladder.
    let mut us: Vec<f64> = Vec::with_capacity(96);
    let mut vs: Vec<f64> = Vec::with_capacity(96);
    let mut u = 1e-8;
    let mut best = f64::NEG_INFINITY;
    let mut decreases = 0u32;
    loop {
        let v = g(u);
        us.push(u);
        vs.push(v);
        if v > best {
            best = v;
            decreases = 0;
        } else {
            decreases += 1;
        }
        if decreases >= 3 {
            break;
        }
        if u > 1e18 {
            return SupResult {
                arg: f64::INFINITY,
                value: f64::INFINITY,
            };
        }
        u *= 2.0;
    }

    let i_max = vs
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let lo = if i_max == 0 { us[0] / 16.0 } else { us[i_max - 1] };
    let hi = if i_max + 1 < us.len() {
        us[i_max + 1]
    } else {
        us[i_max] * 2.0
    };
    let (mut u_star, mut v_star) = golden_max_log(&g, lo, hi, rel_tol);

    // Guard scan around the optimum.
    let mut scan_best: Option<(f64, f64)> = None;
    for j in 0..81 {
        let uj = u_star * 2f64.powf(-3.0 + 6.0 * j as f64 / 80.0);
        let vj = g(uj);
        if scan_best.map_or(true, |(_, vb)| vj > vb) {
            scan_best = Some((uj, vj));
        }
    }
    if let Some((ub, vb)) = scan_best {
        if vb > v_star {
            let (u2, v2) = golden_max_log(&g, ub / 2.0, ub * 2.0, rel_tol);
            if v2 > v_star {
                u_star = u2;
                v_star = v2;
            }
        }
    }

    SupResult {
        arg: u_star,
        value: v_star,
    }
}

/// Golden-section maximization of `g` over `[lo, hi]` in log coordinates.
fn golden_max_log<G: Fn(f64) -> f64>(g: &G, lo: f64, hi: f64, rel_tol: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo.ln();
    let mut b = hi.ln();
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = g(x1.exp());
    let mut f2 = g(x2.exp());
    for _ in 0..200 {
        if b - a < rel_tol {
            break;
        }
        if f1 >= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = g(x1.exp());
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = g(x2.exp());
        }
    }
    let xm = 0.5 * (a + b);
    let um = xm.exp();
    let fm = g(um);
    if f1 >= f2 && f1 >= fm {
        (x1.exp(), f1)
    } else if f2 >= f1 && f2 >= fm {
        (x2.exp(), f2)
    } else {
        (um, fm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12, 200).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-11);
    }

    #[test]
    fn bisect_rejects_missing_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_err());
    }

    #[test]
    fn sup_positive_matches_closed_form() {
        // f(u) = -a u + b sqrt(u) peaks at u* = (b/2a)^2, value b^2/(4a).
        let a = 0.5;
        let b = std::f64::consts::SQRT_2;
        let r = sup_positive(|u| -a * u + b * u.sqrt(), 1e-12);
        assert!((r.value - b * b / (4.0 * a)).abs() < 1e-9, "value {}", r.value);
        assert!((r.arg - (b / (2.0 * a)).powi(2)).abs() < 1e-6, "arg {}", r.arg);
    }

    #[test]
    fn sup_positive_detects_unbounded_objective() {
        let r = sup_positive(|u| 0.1 * u, 1e-10);
        assert!(r.value.is_infinite());
    }

    #[test]
    fn sup_positive_handles_decreasing_objective() {
        // Supremum approached at u -> 0+ with value 0.
        let r = sup_positive(|u| -u, 1e-10);
        assert!(r.value <= 0.0 && r.value > -1e-7);
    }
}
