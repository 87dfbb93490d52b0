//! Reference geometries used by tests, examples and the harness.

use crate::em::{ApertureConfig, Scene, Target};
use crate::error::Result;

/// 2 m × 2 m aperture at λ = 0.1 m.
pub fn reference_aperture() -> ApertureConfig {
    ApertureConfig::square(2.0, 0.1).expect("valid aperture")
}

/// The two reference dipoles. Attitudes are normalized on construction.
pub fn reference_targets() -> Vec<Target> {
    vec![
        Target::from_arrays([-16.0, -10.0, 50.0], [0.8, 0.6, 0.0]).expect("valid target"),
        Target::from_arrays([16.0, -38.0, 40.0], [-0.1, 0.7, 0.7071]).expect("valid target"),
    ]
}

pub fn reference_scene(noise_power: f64, snapshots: usize, seed: u64) -> Result<Scene> {
    Scene::new(reference_aperture(), reference_targets(), noise_power, snapshots, seed)
}

/// Third dipole of the multi-target study.
pub fn third_target() -> Target {
    Target::from_arrays([18.0, 7.5, 18.0], [-0.8, 0.2, -0.57]).expect("valid target")
}

/// The first `count` of the three reference dipoles.
pub fn reference_targets_up_to(count: usize) -> Vec<Target> {
    let mut all = reference_targets();
    all.push(third_target());
    all.truncate(count);
    all
}
