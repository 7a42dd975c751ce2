//! One-dimensional quadrature: adaptive Simpson and a fixed 7-point
//! Gauss-Legendre panel rule.

/// Abscissae of the 7-point Gauss-Legendre rule on [-1, 1].
const GL7_X: [f64; 7] = [
    -0.949_107_912_342_758_5,
    -0.741_531_185_599_394_4,
    -0.405_845_151_377_397_17,
    0.0,
    0.405_845_151_377_397_17,
    0.741_531_185_599_394_4,
    0.949_107_912_342_758_5,
];

/// Weights of the 7-point Gauss-Legendre rule on [-1, 1].
const GL7_W: [f64; 7] = [
    0.129_484_966_168_869_93,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_94,
    0.279_705_391_489_276_7,
    0.129_484_966_168_869_93,
];

/// 7-point Gauss-Legendre quadrature of `f` over `[a, b]`.
///
/// Exact for polynomials up to degree 13; intended as a panel rule where the
/// caller controls panel sizes.
pub fn gauss7<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for i in 0..7 {
        acc += GL7_W[i] * f(mid + half * GL7_X[i]);
    }
    acc * half
}

/// Nodes and weights of the 7-point Gauss-Legendre rule mapped to `[a, b]`.
pub fn gauss7_points(a: f64, b: f64) -> [(f64, f64); 7] {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    std::array::from_fn(|i| (mid + half * GL7_X[i], half * GL7_W[i]))
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// Subdivides until the local Richardson error estimate is below the
/// interval's share of `tol` (absolute), with a depth cap of 48 after which
/// the refined estimate is accepted.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= 15.0 * tol {
        left + right + err / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}
