//! The variance-reduction function `w_{c,k}(t)`, its stationary density and
//! long-run value, the parabolic PDEs behind it, the `(c_tilde, tau)` scale
//! map, and the cached `(c, t)` surface.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::tridiag::TridiagFactor;

/// Cache format version; bump when the numerical scheme changes.
pub const SURFACE_FORMAT_VERSION: u32 = 1;

/// Largest supported patience zero-order.
const K_MAX: u32 = 4;

fn validate_k(k: u32) -> Result<()> {
    if !(1..=K_MAX).contains(&k) {
        return Err(Error::InvalidParameter(format!(
            "k must be in 1..={K_MAX}, got {k}"
        )));
    }
    Ok(())
}

/// Log of the unnormalized stationary density: `c x - x^{k+1}/(k+1)`.
fn log_potential(c: f64, k: u32, x: f64) -> f64 {
    c * x - x.powi(k as i32 + 1) / (k as f64 + 1.0)
}

/// Mode of the potential on `x >= 0`.
fn potential_peak(c: f64, k: u32) -> f64 {
    if c > 0.0 {
        c.powf(1.0 / k as f64)
    } else {
        0.0
    }
}

/// Smallest domain edge whose log-density is 700 below the peak, so the
/// truncated tail mass is far below every quadrature tolerance.
fn domain_edge(c: f64, k: u32) -> f64 {
    let xs = potential_peak(c, k);
    let target = log_potential(c, k, xs) - 700.0;
    let mut x = xs + 10.0;
    while log_potential(c, k, x) >= target {
        x *= 2.0;
    }
    x
}

const DENSITY_NODES: usize = 200_001;

/// Stationary density `pi_{c,k}(x) = exp(cx - x^{k+1}/(k+1)) / G` on
/// `x >= 0`, with its normalizer and `k`-th moment.
#[derive(Debug, Clone)]
pub struct StationaryDensity {
    c: f64,
    k: u32,
    g: f64,
    ln_norm: f64,
    m_k: f64,
    x_edge: f64,
    h: f64,
    cum: Vec<f64>,
}

/// Builds the stationary density by composite Simpson quadrature on a fine
/// uniform grid over a truncated domain holding tail mass below 1e-12.
pub fn stationary_density(c: f64, k: u32) -> Result<StationaryDensity> {
    validate_k(k)?;
    if !c.is_finite() {
        return Err(Error::InvalidParameter(format!("c must be finite, got {c}")));
    }
    let x_edge = domain_edge(c, k);
    let n = DENSITY_NODES;
    let h = x_edge / (n - 1) as f64;
    let peak = log_potential(c, k, potential_peak(c, k));
    let phi: Vec<f64> = (0..n)
        .map(|i| (log_potential(c, k, i as f64 * h) - peak).exp())
        .collect();
    let mut g_tilde = 0.0;
    let mut mk_num = 0.0;
    for i in 0..n {
        let w = simpson_coeff(i, n);
        let x = i as f64 * h;
        g_tilde += w * phi[i];
        mk_num += w * phi[i] * x.powi(k as i32);
    }
    g_tilde *= h / 3.0;
    mk_num *= h / 3.0;
    // Cumulative trapezoid of phi, for quantiles.
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    cum.push(0.0);
    for i in 1..n {
        acc += 0.5 * h * (phi[i - 1] + phi[i]);
        cum.push(acc);
    }
    let ln_norm = peak + g_tilde.ln();
    Ok(StationaryDensity {
        c,
        k,
        g: ln_norm.exp(),
        ln_norm,
        m_k: mk_num / g_tilde,
        x_edge,
        h,
        cum,
    })
}

fn simpson_coeff(i: usize, n: usize) -> f64 {
    if i == 0 || i == n - 1 {
        1.0
    } else if i % 2 == 1 {
        4.0
    } else {
        2.0
    }
}

impl StationaryDensity {
    /// Density value at `x`.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        (log_potential(self.c, self.k, x) - self.ln_norm).exp()
    }

    /// Normalizer `G = int_0^inf exp(cx - x^{k+1}/(k+1)) dx`.
    pub fn normalizer(&self) -> f64 {
        self.g
    }

    /// `k`-th moment `E[Z^k]`; equals `c + ...` drift balance in general.
    pub fn m_k(&self) -> f64 {
        self.m_k
    }

    /// Drift parameter.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Patience zero-order.
    pub fn k(&self) -> u32 {
        self.k
    }

    /// Truncation edge of the internal grid.
    pub fn x_edge(&self) -> f64 {
        self.x_edge
    }

    /// Quantile of the density, by inverse lookup on the cumulative grid.
    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&q) {
            return Err(Error::Domain(format!("quantile requires q in [0,1), got {q}")));
        }
        let total = *self.cum.last().expect("nonempty");
        let target = q * total;
        let idx = self.cum.partition_point(|&v| v < target);
        if idx == 0 {
            return Ok(0.0);
        }
        let (c0, c1) = (self.cum[idx - 1], self.cum[idx]);
        let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
        Ok(self.h * ((idx - 1) as f64 + frac))
    }
}

/// Long-run value `w_{c,k}(infinity)` by the integrating-factor formula:
/// `u'(x) = (1/pi(x)) int_0^x pi(y)(y^k - m_k) dy`, then
/// `w_inf = E_pi[(1 + u')^2]`.
///
/// The inner integral is accumulated from the left before the density mode
/// and from the right after it, avoiding cancellation in the tails; nodes
/// with negligible density are skipped.
pub fn wck_infinity(c: f64, k: u32) -> Result<f64> {
    let d = stationary_density(c, k)?;
    let n = DENSITY_NODES;
    let h = d.h;
    let peak_x = potential_peak(c, k);
    let ln_peak = log_potential(c, k, peak_x);
    let phi = |i: usize| (log_potential(c, k, i as f64 * h) - ln_peak).exp();

    // Running integrals of phi(y) (y^k - m_k) dy from both ends.
    let integrand = |i: usize| {
        let x = i as f64 * h;
        phi(i) * (x.powi(k as i32) - d.m_k)
    };
    let mut left = vec![0.0; n];
    for i in 1..n {
        left[i] = left[i - 1] + 0.5 * h * (integrand(i - 1) + integrand(i));
    }
    let mut right = vec![0.0; n];
    for i in (0..n - 1).rev() {
        right[i] = right[i + 1] + 0.5 * h * (integrand(i) + integrand(i + 1));
    }

    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let p = phi(i);
        let w = simpson_coeff(i, n) * p;
        den += w;
        if p < 1e-280 {
            continue;
        }
        let x = i as f64 * h;
        let inner = if x <= peak_x { left[i] } else { -right[i] };
        let u_prime = inner / p;
        let one_plus = 1.0 + u_prime;
        num += w * one_plus * one_plus;
    }
    let w_inf = num / den;
    if !w_inf.is_finite() {
        return Err(Error::Numerical(format!(
            "w_infinity({c}, {k}) quadrature produced {w_inf}"
        )));
    }
    Ok(w_inf.clamp(0.0, 1.0))
}

/// Discretization controls for the parabolic solves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    /// Spatial nodes on the graded mesh.
    pub n_x: usize,
    /// Time-step ceiling; the effective step is
    /// `min(dt_max, t_max / 5000)`, subdivided to land on output times.
    pub dt_max: f64,
    /// Domain edge override; default max(pi-quantile at 1 - 1e-10,
    /// 2 (|c|+1)^{1/k} + 10).
    pub x_max: Option<f64>,
}

impl Default for PdeConfig {
    fn default() -> Self {
        PdeConfig {
            n_x: 2000,
            dt_max: 1e-3,
            x_max: None,
        }
    }
}

/// Space-time table of a PDE solution; `values[i]` is the solution at
/// `t[i]` over the `x` mesh, with `t[0] = 0` holding the initial data.
#[derive(Debug, Clone)]
pub struct PdeTable {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, PartialEq)]
enum PdeKind {
    Psi,
    H,
}

/// Graded mesh denser near 0: `x_i = X (i/(n-1))^2`.
fn graded_mesh(x_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let r = i as f64 / (n - 1) as f64;
            x_max * r * r
        })
        .collect()
}

fn default_domain(c: f64, k: u32, density: &StationaryDensity) -> Result<f64> {
    let q = density.quantile(1.0 - 1e-10)?;
    Ok(q.max(2.0 * (c.abs() + 1.0).powf(1.0 / k as f64) + 10.0))
}

/// Spatial operator rows for `L u = u'' + (c - x^k) u' [- k x^{k-1} u]`
/// on the graded mesh, with a mirrored-ghost Neumann row at the outer edge.
/// Row 0 is overwritten by the caller according to the PDE's boundary.
struct Operator {
    lo: Vec<f64>,
    di: Vec<f64>,
    up: Vec<f64>,
}

fn assemble_operator(x: &[f64], c: f64, k: u32, kind: PdeKind) -> Operator {
    let n = x.len();
    let mut lo = vec![0.0; n];
    let mut di = vec![0.0; n];
    let mut up = vec![0.0; n];
    for i in 1..n - 1 {
        let hm = x[i] - x[i - 1];
        let hp = x[i + 1] - x[i];
        let drift = c - x[i].powi(k as i32);
        lo[i] = 2.0 / (hm * (hm + hp)) - drift * hp / (hm * (hm + hp));
        di[i] = -2.0 / (hm * hp) + drift * (hp - hm) / (hm * hp);
        up[i] = 2.0 / (hp * (hm + hp)) + drift * hm / (hp * (hm + hp));
        if kind == PdeKind::Psi {
            di[i] -= k as f64 * x[i].powi(k as i32 - 1);
        }
    }
    // Outer edge: mirrored ghost makes the central first derivative vanish.
    let he = x[n - 1] - x[n - 2];
    lo[n - 1] = 2.0 / (he * he);
    di[n - 1] = -2.0 / (he * he);
    if kind == PdeKind::Psi {
        di[n - 1] -= k as f64 * x[n - 1].powi(k as i32 - 1);
    }
    Operator { lo, di, up }
}

/// Crank-Nicolson march of one PDE over segments ending at each knot, with
/// Rannacher startup (two backward-Euler half-steps) smoothing the
/// nonsmooth initial data. `visit` sees every accepted step, flagged when
/// the time is an output knot; it also sees the initial data at `t = 0`.
fn march_pde<F>(
    kind: PdeKind,
    c: f64,
    k: u32,
    x: &[f64],
    knots: &[f64],
    dt_ceiling: f64,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(f64, &[f64], bool),
{
    let n = x.len();
    let op = assemble_operator(x, c, k, kind);
    let source: Vec<f64> = match kind {
        PdeKind::Psi => vec![0.0; n],
        PdeKind::H => x.iter().map(|&xi| xi.powi(k as i32)).collect(),
    };
    let mut u = match kind {
        PdeKind::Psi => vec![1.0; n],
        PdeKind::H => vec![0.0; n],
    };
    visit(0.0, &u, false);

    let t_max = *knots.last().expect("nonempty knots");
    let dt_target = dt_ceiling.min(t_max / 5000.0);
    let mut rannacher = true;
    let mut rhs = vec![0.0; n];
    let mut t_prev = 0.0;
    for &t_knot in knots {
        let span = t_knot - t_prev;
        let m = (span / dt_target).ceil().max(1.0) as usize;
        let dt = span / m as f64;
        let hdt = 0.5 * dt;
        // M1 = I - (dt/2) L, M2 = I + (dt/2) L, with boundary row patches.
        // Bands are row-aligned: lo[i] multiplies u[i-1], up[i] u[i+1].
        let m1_lo: Vec<f64> = op.lo.iter().map(|v| -hdt * v).collect();
        let mut m1_di: Vec<f64> = op.di.iter().map(|v| 1.0 - hdt * v).collect();
        let mut m1_up: Vec<f64> = op.up.iter().map(|v| -hdt * v).collect();
        let m2_lo: Vec<f64> = op.lo.iter().map(|v| hdt * v).collect();
        let mut m2_di: Vec<f64> = op.di.iter().map(|v| 1.0 + hdt * v).collect();
        let mut m2_up: Vec<f64> = op.up.iter().map(|v| hdt * v).collect();
        match kind {
            PdeKind::Psi => {
                // Dirichlet psi(t, 0) = 1.
                m1_di[0] = 1.0;
                m1_up[0] = 0.0;
                m2_di[0] = 1.0;
                m2_up[0] = 0.0;
            }
            PdeKind::H => {
                // Discrete Neumann on the microscopic first cell: h0 = h1.
                m1_di[0] = 1.0;
                m1_up[0] = -1.0;
                m2_di[0] = 0.0;
                m2_up[0] = 0.0;
            }
        }
        let factor = TridiagFactor::new(&m1_lo, &m1_di, &m1_up)?;
        for step in 0..m {
            if rannacher {
                // Two backward-Euler steps of dt/2 with the same matrix.
                for _ in 0..2 {
                    for i in 0..n {
                        rhs[i] = u[i] + hdt * source[i];
                    }
                    patch_rhs(kind, &mut rhs);
                    factor.solve_in_place(&mut rhs);
                    std::mem::swap(&mut u, &mut rhs);
                }
                rannacher = false;
            } else {
                rhs[0] = m2_di[0] * u[0] + m2_up[0] * u[1];
                for i in 1..n - 1 {
                    rhs[i] = m2_lo[i] * u[i - 1] + m2_di[i] * u[i] + m2_up[i] * u[i + 1]
                        + dt * source[i];
                }
                rhs[n - 1] = m2_lo[n - 1] * u[n - 2] + m2_di[n - 1] * u[n - 1]
                    + dt * source[n - 1];
                patch_rhs(kind, &mut rhs);
                factor.solve_in_place(&mut rhs);
                std::mem::swap(&mut u, &mut rhs);
            }
            let t_now = if step + 1 == m {
                t_knot
            } else {
                t_prev + (step + 1) as f64 * dt
            };
            check_and_clip(kind, &mut u, t_now)?;
            visit(t_now, &u, step + 1 == m);
        }
        t_prev = t_knot;
    }
    Ok(())
}

fn patch_rhs(kind: PdeKind, rhs: &mut [f64]) {
    rhs[0] = match kind {
        PdeKind::Psi => 1.0,
        PdeKind::H => 0.0,
    };
}

fn check_and_clip(kind: PdeKind, u: &mut [f64], t: f64) -> Result<()> {
    match kind {
        PdeKind::Psi => {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &v in u.iter() {
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if !(lo >= -1e-6 && hi <= 1.0 + 1e-6) {
                return Err(Error::GridRefinement(format!(
                    "survival-factor solution left [0,1] at t = {t} (range [{lo}, {hi}]); \
                     refine the space/time grid"
                )));
            }
            for v in u.iter_mut() {
                *v = v.clamp(0.0, 1.0);
            }
        }
        PdeKind::H => {
            if u.iter().any(|v| !v.is_finite()) {
                return Err(Error::GridRefinement(format!(
                    "centering-function solution became nonfinite at t = {t}; \
                     refine the space/time grid"
                )));
            }
        }
    }
    Ok(())
}

fn validate_out_times(t_out: &[f64]) -> Result<()> {
    if t_out.is_empty() {
        return Err(Error::InvalidParameter("output times must be nonempty".into()));
    }
    if t_out.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
        return Err(Error::InvalidParameter(
            "output times must be positive and finite".into(),
        ));
    }
    if t_out.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "output times must be strictly increasing".into(),
        ));
    }
    Ok(())
}

fn pde_mesh(c: f64, k: u32, cfg: &PdeConfig) -> Result<(StationaryDensity, Vec<f64>)> {
    validate_k(k)?;
    if cfg.n_x < 50 {
        return Err(Error::InvalidParameter(format!(
            "n_x = {} is too coarse; need at least 50 nodes",
            cfg.n_x
        )));
    }
    if !(cfg.dt_max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "dt_max must be positive, got {}",
            cfg.dt_max
        )));
    }
    let density = stationary_density(c, k)?;
    let x_max = match cfg.x_max {
        Some(x) => {
            if !(x > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "x_max must be positive, got {x}"
                )));
            }
            x
        }
        None => default_domain(c, k, &density)?,
    };
    Ok((density, graded_mesh(x_max, cfg.n_x)))
}

/// Survival-factor PDE
/// `d_t psi = psi'' + (c - x^k) psi' - k x^{k-1} psi`, `psi(0, .) = 1`,
/// `psi(t, 0) = 1`, outflow Neumann at the outer edge; values in [0,1].
pub fn solve_psi_pde(c: f64, k: u32, t_out: &[f64], cfg: &PdeConfig) -> Result<PdeTable> {
    validate_out_times(t_out)?;
    let (_, x) = pde_mesh(c, k, cfg)?;
    let mut t = Vec::with_capacity(t_out.len() + 1);
    let mut values = Vec::with_capacity(t_out.len() + 1);
    march_pde(PdeKind::Psi, c, k, &x, t_out, cfg.dt_max, |tn, u, is_knot| {
        if tn == 0.0 || is_knot {
            t.push(tn);
            values.push(u.to_vec());
        }
    })?;
    Ok(PdeTable { x, t, values })
}

/// Centering-function PDE
/// `d_t h = h'' + (c - x^k) h' + x^k`, `h(0, .) = 0`, `h'(t, 0) = 0`,
/// outflow Neumann at the outer edge; `h(t, x)/t -> m_k` for large `t`.
pub fn solve_h_pde(c: f64, k: u32, t_out: &[f64], cfg: &PdeConfig) -> Result<PdeTable> {
    validate_out_times(t_out)?;
    let (_, x) = pde_mesh(c, k, cfg)?;
    let mut t = Vec::with_capacity(t_out.len() + 1);
    let mut values = Vec::with_capacity(t_out.len() + 1);
    march_pde(PdeKind::H, c, k, &x, t_out, cfg.dt_max, |tn, u, is_knot| {
        if tn == 0.0 || is_knot {
            t.push(tn);
            values.push(u.to_vec());
        }
    })?;
    Ok(PdeTable { x, t, values })
}

/// Normalized stationary weights on the PDE mesh (trapezoid cells times the
/// density), so `sum(w_i f_i)` approximates `E_pi[f(Z)]` with `E[1] = 1`.
fn stationary_weights(density: &StationaryDensity, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut w = vec![0.0; n];
    for i in 0..n {
        let cell = if i == 0 {
            0.5 * (x[1] - x[0])
        } else if i == n - 1 {
            0.5 * (x[n - 1] - x[n - 2])
        } else {
            0.5 * (x[i + 1] - x[i - 1])
        };
        w[i] = cell * density.pdf(x[i]);
    }
    let total: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= total;
    }
    w
}

/// Values of `w_{c,k}` on `t_grid`:
/// `w(t) = (1/t) int_0^t E_pi[psi(u,Z)^2] du + Var_pi(h(t,Z)) / (2t)`,
/// using every time step of the marches for the outer integral.
pub fn wck_curve(c: f64, k: u32, t_grid: &[f64]) -> Result<Vec<f64>> {
    wck_curve_with(c, k, t_grid, &PdeConfig::default())
}

/// [`wck_curve`] with explicit discretization controls.
pub fn wck_curve_with(c: f64, k: u32, t_grid: &[f64], cfg: &PdeConfig) -> Result<Vec<f64>> {
    validate_out_times(t_grid)?;
    let (density, x) = pde_mesh(c, k, cfg)?;
    let weights = stationary_weights(&density, &x);

    // First term: running trapezoid of S(u) = E_pi[psi(u, Z)^2].
    let mut first = Vec::with_capacity(t_grid.len());
    {
        let mut acc = 0.0;
        let mut prev_t = 0.0;
        let mut prev_s = 1.0;
        march_pde(PdeKind::Psi, c, k, &x, t_grid, cfg.dt_max, |tn, u, is_knot| {
            if tn > 0.0 {
                let s: f64 = weights
                    .iter()
                    .zip(u.iter())
                    .map(|(w, v)| w * v * v)
                    .sum();
                acc += 0.5 * (tn - prev_t) * (prev_s + s);
                prev_t = tn;
                prev_s = s;
                if is_knot {
                    first.push(acc / tn);
                }
            }
        })?;
    }

    // Second term: Var_pi(h(t, Z)) / (2t) at the output knots.
    let mut second = Vec::with_capacity(t_grid.len());
    march_pde(PdeKind::H, c, k, &x, t_grid, cfg.dt_max, |tn, u, is_knot| {
        if is_knot {
            let mean: f64 = weights.iter().zip(u.iter()).map(|(w, v)| w * v).sum();
            let var: f64 = weights
                .iter()
                .zip(u.iter())
                .map(|(w, v)| w * (v - mean) * (v - mean))
                .sum();
            second.push(var / (2.0 * tn));
        }
    })?;

    Ok(first
        .iter()
        .zip(second.iter())
        .map(|(a, b)| (a + b).clamp(0.0, 1.0))
        .collect())
}

/// Parameter tuple of a critically-loaded model, the input of [`scale_map`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterTuple {
    /// Scaled drift.
    pub c: f64,
    /// Patience zero-order.
    pub k: u32,
    /// Service rate.
    pub mu: f64,
    /// Arrival variability `c_a^2`.
    pub c_a2: f64,
    /// Service variability `c_s^2`.
    pub c_s2: f64,
    /// `F^(k)(0)` of the base patience CDF.
    pub fk0: f64,
}

impl ParameterTuple {
    /// Total input variability `c_x^2 = c_a^2 + c_s^2`.
    pub fn c_x2(&self) -> f64 {
        self.c_a2 + self.c_s2
    }
}

/// Base-coordinate map: returns `(c_tilde, tau)` such that the variance
/// function of the tuple is `v(t) = (c_x^2/mu) t w_{c_tilde,k}(tau t)`,
/// with `beta = F^(k)(0)/k!`,
/// `tau = (c_x^2/2mu)^{(k-1)/(k+1)} beta^{2/(k+1)}` and
/// `c_tilde = c (c_x^2/2mu)^{-k/(k+1)} beta^{-1/(k+1)}`.
pub fn scale_map(xi: &ParameterTuple) -> Result<(f64, f64)> {
    validate_k(xi.k)?;
    if !(xi.fk0 > 0.0) || !xi.fk0.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "F^(k)(0) must be positive, got {}",
            xi.fk0
        )));
    }
    if !(xi.mu > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu must be positive, got {}",
            xi.mu
        )));
    }
    if !(xi.c_x2() > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "c_x^2 = c_a^2 + c_s^2 must be positive, got {}",
            xi.c_x2()
        )));
    }
    let kf = xi.k as f64;
    let mut fact = 1.0;
    for j in 2..=xi.k {
        fact *= j as f64;
    }
    let beta = xi.fk0 / fact;
    let a = xi.c_x2() / (2.0 * xi.mu);
    let tau = a.powf((kf - 1.0) / (kf + 1.0)) * beta.powf(2.0 / (kf + 1.0));
    let c_tilde = xi.c * a.powf(-kf / (kf + 1.0)) * beta.powf(-1.0 / (kf + 1.0));
    Ok((c_tilde, tau))
}

/// Cached table of `w_{c,k}(t)` over a `(c, t)` grid plus the `w_inf(c)`
/// column, with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WckSurface {
    pub version: u32,
    pub k: u32,
    pub c_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    /// `values[i][j] = w(c_grid[i], t_grid[j])`.
    pub values: Vec<Vec<f64>>,
    pub w_inf: Vec<f64>,
    pub n_x: usize,
    pub dt_max: f64,
    #[serde(skip)]
    pub cache_path: Option<PathBuf>,
}

/// Default drift grid: 41 points on [-10, 10].
pub fn default_c_grid() -> Vec<f64> {
    (0..41).map(|i| -10.0 + 0.5 * i as f64).collect()
}

/// Default time grid: 60 log-spaced points on [1e-3, 100].
pub fn default_t_grid() -> Vec<f64> {
    let (lo, hi) = (1e-3f64.ln(), 100f64.ln());
    (0..60)
        .map(|i| (lo + (hi - lo) * i as f64 / 59.0).exp())
        .collect()
}

impl WckSurface {
    /// Whether `c` lies inside the covered drift range.
    pub fn covers(&self, c: f64) -> bool {
        c >= self.c_grid[0] && c <= *self.c_grid.last().expect("nonempty")
    }

    /// Surface value at `(c, t)` plus a flag set when `c` was clamped to
    /// the grid edge.
    ///
    /// Within the grid the value is linear in `c` and linear in `log t`;
    /// below the first time knot it blends linearly in `t` toward
    /// `w(0) = 1`; beyond the last knot it relaxes hyperbolically to
    /// `w_inf(c)`, matching the `O(1/t)` tail of the second term.
    pub fn eval_diag(&self, c: f64, t: f64) -> (f64, bool) {
        let c_lo = self.c_grid[0];
        let c_hi = *self.c_grid.last().expect("nonempty");
        let clamped = c < c_lo || c > c_hi;
        let cc = c.clamp(c_lo, c_hi);
        let (i0, i1, th) = bracket(&self.c_grid, cc);
        let v0 = self.row_value(i0, t);
        let v1 = self.row_value(i1, t);
        ((1.0 - th) * v0 + th * v1, clamped)
    }

    /// Surface value at `(c, t)`; out-of-range `c` clamps silently.
    pub fn eval(&self, c: f64, t: f64) -> f64 {
        self.eval_diag(c, t).0
    }

    /// Long-run value `w_inf(c)`, linear in `c`, clamped at the edges.
    pub fn w_inf_at(&self, c: f64) -> f64 {
        let cc = c.clamp(self.c_grid[0], *self.c_grid.last().expect("nonempty"));
        let (i0, i1, th) = bracket(&self.c_grid, cc);
        (1.0 - th) * self.w_inf[i0] + th * self.w_inf[i1]
    }

    fn row_value(&self, ci: usize, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let tg = &self.t_grid;
        let row = &self.values[ci];
        let t_first = tg[0];
        let t_last = *tg.last().expect("nonempty");
        if t < t_first {
            1.0 + (row[0] - 1.0) * (t / t_first)
        } else if t > t_last {
            let winf = self.w_inf[ci];
            winf + (row[row.len() - 1] - winf) * (t_last / t)
        } else {
            let lt = t.ln();
            let (j0, j1, th) = bracket_ln(tg, lt);
            (1.0 - th) * row[j0] + th * row[j1]
        }
    }

    fn validate(&self) -> Result<()> {
        if self.values.len() != self.c_grid.len()
            || self.w_inf.len() != self.c_grid.len()
            || self.values.iter().any(|r| r.len() != self.t_grid.len())
        {
            return Err(Error::Numerical("surface shape mismatch".into()));
        }
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Numerical(format!(
                        "surface value {v} at c = {}, t = {} outside [0,1]",
                        self.c_grid[i], self.t_grid[j]
                    )));
                }
            }
            for w in row.windows(2) {
                if w[1] > w[0] + 1e-3 {
                    return Err(Error::Numerical(format!(
                        "surface row at c = {} is not nonincreasing in t \
                         (slack 1e-3): {} -> {}",
                        self.c_grid[i], w[0], w[1]
                    )));
                }
            }
        }
        for w in self.w_inf.windows(2) {
            if w[1] > w[0] + 1e-9 {
                return Err(Error::Numerical(format!(
                    "w_inf column is not nonincreasing in c: {} -> {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

/// Interpolation bracket: indices and fraction for `v` in sorted `grid`.
fn bracket(grid: &[f64], v: f64) -> (usize, usize, f64) {
    let n = grid.len();
    if n == 1 {
        return (0, 0, 0.0);
    }
    let j = grid.partition_point(|&g| g < v).clamp(1, n - 1);
    let (a, b) = (grid[j - 1], grid[j]);
    let th = if b > a { ((v - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
    (j - 1, j, th)
}

fn bracket_ln(grid: &[f64], lv: f64) -> (usize, usize, f64) {
    let n = grid.len();
    let j = grid.partition_point(|&g| g.ln() < lv).clamp(1, n - 1);
    let (a, b) = (grid[j - 1].ln(), grid[j].ln());
    let th = if b > a { ((lv - a) / (b - a)).clamp(0.0, 1.0) } else { 0.0 };
    (j - 1, j, th)
}

fn surface_file_name(k: u32, c_grid: &[f64], t_grid: &[f64], cfg: &PdeConfig) -> String {
    format!(
        "wck_v{}_k{}_c{}_{:.6e}_{:.6e}_t{}_{:.6e}_{:.6e}_nx{}_dt{:.2e}.json",
        SURFACE_FORMAT_VERSION,
        k,
        c_grid.len(),
        c_grid[0],
        c_grid.last().expect("nonempty"),
        t_grid.len(),
        t_grid[0],
        t_grid.last().expect("nonempty"),
        cfg.n_x,
        cfg.dt_max
    )
}

/// Loads the surface for `(k, c_grid, t_grid)` from `cache_dir`, or builds
/// it (PDE solves parallel across `c`) and persists it atomically. A
/// corrupt or mismatched cache file triggers a rebuild with a warning.
pub fn load_or_build_surface(
    k: u32,
    c_grid: &[f64],
    t_grid: &[f64],
    cache_dir: &Path,
) -> Result<WckSurface> {
    load_or_build_surface_with(k, c_grid, t_grid, cache_dir, &PdeConfig::default())
}

/// [`load_or_build_surface`] with explicit discretization controls.
pub fn load_or_build_surface_with(
    k: u32,
    c_grid: &[f64],
    t_grid: &[f64],
    cache_dir: &Path,
    cfg: &PdeConfig,
) -> Result<WckSurface> {
    validate_k(k)?;
    validate_out_times(t_grid)?;
    if c_grid.is_empty() || c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "c_grid must be nonempty and strictly increasing".into(),
        ));
    }
    std::fs::create_dir_all(cache_dir)?;
    let path = cache_dir.join(surface_file_name(k, c_grid, t_grid, cfg));
    if let Ok(bytes) = std::fs::read(&path) {
        match serde_json::from_slice::<WckSurface>(&bytes) {
            Ok(mut s)
                if s.version == SURFACE_FORMAT_VERSION
                    && s.k == k
                    && s.c_grid == c_grid
                    && s.t_grid == t_grid
                    && s.n_x == cfg.n_x
                    && s.dt_max == cfg.dt_max
                    && s.validate().is_ok() =>
            {
                s.cache_path = Some(path);
                return Ok(s);
            }
            Ok(_) => log::warn!(
                "surface cache {} does not match requested parameters; rebuilding",
                path.display()
            ),
            Err(e) => log::warn!(
                "surface cache {} is corrupt ({e}); rebuilding",
                path.display()
            ),
        }
    }

    let built: Result<Vec<(Vec<f64>, f64)>> = c_grid
        .par_iter()
        .map(|&c| Ok((wck_curve_with(c, k, t_grid, cfg)?, wck_infinity(c, k)?)))
        .collect();
    let built = built?;
    let surface = WckSurface {
        version: SURFACE_FORMAT_VERSION,
        k,
        c_grid: c_grid.to_vec(),
        t_grid: t_grid.to_vec(),
        values: built.iter().map(|(v, _)| v.clone()).collect(),
        w_inf: built.iter().map(|(_, w)| *w).collect(),
        n_x: cfg.n_x,
        dt_max: cfg.dt_max,
        cache_path: None,
    };
    surface.validate()?;

    let tmp = tempfile::NamedTempFile::new_in(cache_dir)?;
    serde_json::to_writer(tmp.as_file(), &surface)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    tmp.persist(&path)
        .map_err(|e| Error::Io(std::io::Error::other(e)))?;
    Ok(WckSurface {
        cache_path: Some(path),
        ..surface
    })
}
