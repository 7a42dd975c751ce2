//! Shared unit-test fixtures: cached coarse `w` surfaces and common models.

use std::sync::OnceLock;

use crate::dist::DistributionSpec;
use crate::model::{PatienceSpec, QueueModel};
use crate::wck::{load_or_build_surface_with, PdeConfig, WckSurface, SURFACE_FORMAT_VERSION};

/// M/M/1+M model with unit-mean base patience scaled by `alpha`.
pub(crate) fn mm1m(lambda: f64, mu: f64, alpha: f64) -> QueueModel {
    QueueModel::from_renewal(
        &DistributionSpec::Exponential { mean: 1.0 / lambda },
        &DistributionSpec::Exponential { mean: 1.0 / mu },
        &PatienceSpec::exponential(alpha),
    )
    .unwrap()
}

/// Coarse real surface shared by the tests that need one; built once per
/// test process and cached on disk across runs.
pub(crate) fn shared_surface() -> &'static WckSurface {
    static SURFACE: OnceLock<WckSurface> = OnceLock::new();
    SURFACE.get_or_init(|| {
        let dir = std::env::temp_dir().join("rqab-unit-surface");
        let cfg = PdeConfig {
            n_x: 300,
            ..PdeConfig::default()
        };
        let c_grid: Vec<f64> = (-3..=3).map(|i| i as f64).collect();
        let t_grid: Vec<f64> = {
            let (lo, hi) = (1e-3f64.ln(), 20f64.ln());
            (0..40)
                .map(|i| (lo + (hi - lo) * i as f64 / 39.0).exp())
                .collect()
        };
        load_or_build_surface_with(1, &c_grid, &t_grid, &dir, &cfg).unwrap()
    })
}

/// Surface that is identically 1, turning the refined fixed point into the
/// first one at matched arguments.
pub(crate) fn unit_surface(k: u32) -> WckSurface {
    WckSurface {
        version: SURFACE_FORMAT_VERSION,
        k,
        c_grid: vec![-100.0, 100.0],
        t_grid: vec![1e-9, 1e9],
        values: vec![vec![1.0; 2]; 2],
        w_inf: vec![1.0; 2],
        n_x: 0,
        dt_max: 0.0,
        cache_path: None,
    }
}
