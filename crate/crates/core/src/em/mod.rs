//! Geometry, aperture sampling and field synthesis.

pub mod field;
pub mod geometry;
pub mod grid;
pub mod quadrature;
pub mod scene;

pub use field::{
    draw_currents, scene_snapshots, snapshot_signals, synthesize_field, CMat, FieldSamples, SnapshotSeries,
};
pub use geometry::{
    doa_from_position, polarization_vector, wave_vector, RealVec3, UnitVec3,
};
pub use grid::{build_node_grid, steering_sample, uniform_grid, NodeGrid, C64};
pub use quadrature::{gauss_legendre_rule, QuadratureRule};
pub use scene::{ApertureConfig, CurrentModel, NoiseModel, Scene, Target};
