use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::em::field::{add_noise, deterministic_axis, FieldSamples, SnapshotSeries};
use crate::em::grid::{discrete_grid, NodeGrid};
use crate::em::scene::{ApertureConfig, Scene};
use crate::em::CMat;
use crate::error::{Error, Result};
use crate::music::{DoaEstimate, DoaOptions, SpectrumGrid};

/// Half-wavelength planar array covering the aperture footprint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpdaConfig {
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
    /// Effective element area λ²/4π.
    pub effective_area: f64,
}

impl SpdaConfig {
    pub fn for_aperture(ap: &ApertureConfig) -> Self {
        let spacing = ap.wavelength() / 2.0;
        let count = |l: f64| ((l / spacing) - 1e-9).ceil().max(1.0) as usize;
        SpdaConfig {
            spacing,
            nx: count(ap.lx()),
            ny: count(ap.ly()),
            effective_area: ap.wavelength().powi(2) / (4.0 * PI),
        }
    }

    pub fn elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Element coordinates (n−1)l_d − L/2 along each axis.
    pub fn positions(&self, ap: &ApertureConfig) -> (Vec<f64>, Vec<f64>) {
        let xs = (0..self.nx).map(|i| i as f64 * self.spacing - ap.lx() / 2.0).collect();
        let ys = (0..self.ny).map(|i| i as f64 * self.spacing - ap.ly() / 2.0).collect();
        (xs, ys)
    }

    pub fn grid(&self, ap: &ApertureConfig) -> NodeGrid {
        let (xs, ys) = self.positions(ap);
        discrete_grid(ap, xs, ys, self.spacing, self.effective_area)
    }
}

/// x-axis field sampled at the array elements; the y and z channels are left empty.
pub fn spda_field(scene: &Scene, snapshots: &SnapshotSeries) -> Result<FieldSamples> {
    if snapshots.sources() != scene.source_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} sources", scene.source_count()),
            actual: format!("{} sources", snapshots.sources()),
        });
    }
    let grid = Arc::new(SpdaConfig::for_aperture(&scene.aperture).grid(&scene.aperture));
    let mut x = deterministic_axis(scene, &grid, snapshots, 0);
    add_noise(scene, &grid, &mut [(0, &mut x)]);
    let zero = CMat::zeros(snapshots.len(), grid.len());
    FieldSamples::from_parts(grid, [x, zero.clone(), zero], scene.noise_power, scene.seed)
}

/// Sample-covariance MUSIC over the discrete array.
pub fn spda_music(scene: &Scene, snapshots: &SnapshotSeries, opts: &DoaOptions) -> Result<DoaEstimate> {
    Ok(spda_with_grid(scene, snapshots, opts)?.0)
}

pub fn spda_with_grid(scene: &Scene, snapshots: &SnapshotSeries, opts: &DoaOptions) -> Result<(DoaEstimate, SpectrumGrid)> {
    let field = spda_field(scene, snapshots)?;
    super::singlepol_with_grid(&field, scene.source_count(), opts)
}
