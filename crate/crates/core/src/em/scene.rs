use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use super::geometry::{doa_from_position, polarization_vector, RealVec3, UnitVec3};
use crate::error::{Error, Result};

pub const DEFAULT_DIPOLE_LENGTH: f64 = 0.01;
pub const FREE_SPACE_IMPEDANCE: f64 = 120.0 * PI;

/// Rectangular aperture centred at the origin of the z = 0 plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ApertureFile", into = "ApertureFile")]
pub struct ApertureConfig {
    lx: f64,
    ly: f64,
    wavelength: f64,
    impedance: f64,
}

#[derive(Serialize, Deserialize)]
struct ApertureFile {
    #[serde(rename = "Lx")]
    lx: f64,
    #[serde(rename = "Ly")]
    ly: f64,
    lambda: f64,
    #[serde(default = "default_eta")]
    eta: f64,
}

fn default_eta() -> f64 {
    FREE_SPACE_IMPEDANCE
}

impl TryFrom<ApertureFile> for ApertureConfig {
    type Error = Error;
    fn try_from(f: ApertureFile) -> Result<Self> {
        ApertureConfig::new(f.lx, f.ly, f.lambda, f.eta)
    }
}

impl From<ApertureConfig> for ApertureFile {
    fn from(a: ApertureConfig) -> Self {
        ApertureFile { lx: a.lx, ly: a.ly, lambda: a.wavelength, eta: a.impedance }
    }
}

impl ApertureConfig {
    pub fn new(lx: f64, ly: f64, wavelength: f64, impedance: f64) -> Result<Self> {
        for (name, v) in [("Lx", lx), ("Ly", ly), ("lambda", wavelength), ("eta", impedance)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(ApertureConfig { lx, ly, wavelength, impedance })
    }

    /// Square aperture with free-space impedance.
    pub fn square(side: f64, wavelength: f64) -> Result<Self> {
        Self::new(side, side, wavelength, FREE_SPACE_IMPEDANCE)
    }

    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }
    pub fn impedance(&self) -> f64 {
        self.impedance
    }
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }
    pub fn diagonal(&self) -> f64 {
        self.lx.hypot(self.ly)
    }
    /// Fraunhofer distance 2D²/λ.
    pub fn far_field_distance(&self) -> f64 {
        2.0 * self.diagonal().powi(2) / self.wavelength
    }

    pub fn with_sides(&self, lx: f64, ly: f64) -> Result<Self> {
        Self::new(lx, ly, self.wavelength, self.impedance)
    }
}

/// A Hertzian dipole target.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TargetFile", into = "TargetFile")]
pub struct Target {
    position: RealVec3,
    attitude: UnitVec3,
    length: f64,
}

#[derive(Serialize, Deserialize)]
struct TargetFile {
    position: [f64; 3],
    attitude: [f64; 3],
    #[serde(default = "default_length")]
    length: f64,
}

fn default_length() -> f64 {
    DEFAULT_DIPOLE_LENGTH
}

impl TryFrom<TargetFile> for Target {
    type Error = Error;
    fn try_from(f: TargetFile) -> Result<Self> {
        let q = UnitVec3::try_from(f.attitude)
            .map_err(|_| Error::InvalidInput("target attitude must be nonzero".into()))?;
        Target::new(RealVec3::from(f.position), q, f.length)
    }
}

impl From<Target> for TargetFile {
    fn from(t: Target) -> Self {
        TargetFile { position: t.position.into(), attitude: t.attitude.into(), length: t.length }
    }
}

impl Target {
    pub fn new(position: RealVec3, attitude: UnitVec3, length: f64) -> Result<Self> {
        if !position.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("target position must be finite".into()));
        }
        if position.z <= 0.0 {
            return Err(Error::InvalidInput(format!("target must lie above the aperture (p_z = {})", position.z)));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidInput(format!("dipole length must be positive, got {length}")));
        }
        Ok(Target { position, attitude, length })
    }

    /// Target with the default dipole length; the attitude is normalized.
    pub fn from_arrays(position: [f64; 3], attitude: [f64; 3]) -> Result<Self> {
        Self::new(RealVec3::from(position), UnitVec3::try_from(attitude)?, DEFAULT_DIPOLE_LENGTH)
    }

    pub fn position(&self) -> &RealVec3 {
        &self.position
    }
    pub fn attitude(&self) -> &UnitVec3 {
        &self.attitude
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn range(&self) -> f64 {
        self.position.norm()
    }
    /// Unit propagation direction z̄ = p/‖p‖.
    pub fn direction(&self) -> UnitVec3 {
        UnitVec3::normalize(self.position).expect("p_z > 0 keeps the position nonzero")
    }
    pub fn doa(&self) -> (f64, f64) {
        doa_from_position(&self.position).expect("p_z > 0 keeps the position nonzero")
    }
    pub fn polarization(&self) -> RealVec3 {
        polarization_vector(&self.attitude, &self.direction())
    }
    pub fn is_far_field(&self, aperture: &ApertureConfig) -> bool {
        self.range() > aperture.far_field_distance()
    }

    pub fn with_attitude(&self, attitude: UnitVec3) -> Target {
        Target { attitude, ..*self }
    }
}

/// Statistics of the dipole currents I_m(t).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurrentModel {
    /// Unit magnitude, uniform random phase.
    #[default]
    UnitPhase,
    /// Circular complex Gaussian with unit variance.
    ComplexGaussian,
}

/// How the white field noise of power σ² is discretized at a sample point.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// A sample standing for aperture area A gets variance σ²/A, so
    /// weighted sums over the aperture converge to the continuous integral.
    #[default]
    Continuum,
    /// Every sample gets variance σ² regardless of its area.
    PerSample,
}

/// Ground-truth description of one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneFile", into = "SceneFile")]
pub struct Scene {
    pub aperture: ApertureConfig,
    pub targets: Vec<Target>,
    pub noise_power: f64,
    pub snapshots: usize,
    pub seed: u64,
    pub currents: CurrentModel,
    pub noise_model: NoiseModel,
}

#[derive(Serialize, Deserialize)]
struct SceneFile {
    aperture: ApertureConfig,
    targets: Vec<Target>,
    noise_power: f64,
    snapshots: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    currents: CurrentModel,
    #[serde(default)]
    noise_model: NoiseModel,
}

impl TryFrom<SceneFile> for Scene {
    type Error = Error;
    fn try_from(f: SceneFile) -> Result<Self> {
        let s = Scene {
            aperture: f.aperture,
            targets: f.targets,
            noise_power: f.noise_power,
            snapshots: f.snapshots,
            seed: f.seed,
            currents: f.currents,
            noise_model: f.noise_model,
        };
        s.validate()?;
        Ok(s)
    }
}

impl From<Scene> for SceneFile {
    fn from(s: Scene) -> Self {
        SceneFile {
            aperture: s.aperture,
            targets: s.targets,
            noise_power: s.noise_power,
            snapshots: s.snapshots,
            seed: s.seed,
            currents: s.currents,
            noise_model: s.noise_model,
        }
    }
}

impl Scene {
    pub fn new(aperture: ApertureConfig, targets: Vec<Target>, noise_power: f64, snapshots: usize, seed: u64) -> Result<Self> {
        let s = Scene {
            aperture,
            targets,
            noise_power,
            snapshots,
            seed,
            currents: CurrentModel::default(),
            noise_model: NoiseModel::default(),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(Error::InvalidInput(format!("noise power must be nonnegative, got {}", self.noise_power)));
        }
        if self.snapshots == 0 {
            return Err(Error::InvalidInput("snapshot count must be positive".into()));
        }
        if self.snapshots < self.targets.len() {
            return Err(Error::InvalidInput(format!(
                "need at least as many snapshots as targets ({} < {})",
                self.snapshots,
                self.targets.len()
            )));
        }
        Ok(())
    }

    pub fn source_count(&self) -> usize {
        self.targets.len()
    }

    pub fn wavenumber(&self) -> f64 {
        self.aperture.wavenumber()
    }

    /// Ground-truth DOAs in target order.
    pub fn doas(&self) -> Vec<(f64, f64)> {
        self.targets.iter().map(Target::doa).collect()
    }

    pub fn warn_near_field(&self) {
        for (i, t) in self.targets.iter().enumerate() {
            if !t.is_far_field(&self.aperture) {
                log::warn!(
                    "target {} at range {:.2} m is inside the Fraunhofer distance {:.2} m",
                    i,
                    t.range(),
                    self.aperture.far_field_distance()
                );
            }
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aperture_validation() {
        assert!(ApertureConfig::new(0.0, 1.0, 0.1, 1.0).is_err());
        let a = ApertureConfig::square(2.0, 0.1).unwrap();
        assert!((a.wavenumber() - 20.0 * PI).abs() < 1e-12);
        assert!((a.far_field_distance() - 160.0).abs() < 1e-9);
    }

    #[test]
    fn target_validation() {
        assert!(Target::from_arrays([0.0, 0.0, -1.0], [1.0, 0.0, 0.0]).is_err());
        assert!(Target::from_arrays([0.0, 0.0, 1.0], [0.0, 0.0, 0.0]).is_err());
        let t = Target::from_arrays([0.0, 0.0, 200.0], [1.0, 0.0, 0.0]).unwrap();
        assert!(t.is_far_field(&ApertureConfig::square(2.0, 0.1).unwrap()));
    }

    #[test]
    fn scene_json_roundtrip() {
        let text = r#"{
            "aperture": {"Lx": 2, "Ly": 2, "lambda": 0.1, "eta": 376.99},
            "targets": [{"position": [-16, -10, 50], "attitude": [0.8, 0.6, 0], "length": 0.01}],
            "noise_power": 0.001, "snapshots": 500, "seed": 9
        }"#;
        let s = Scene::from_json(text).unwrap();
        assert_eq!(s.snapshots, 500);
        assert_eq!(s.noise_model, NoiseModel::Continuum);
        let back = Scene::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn scene_rejects_too_few_snapshots() {
        let t = Target::from_arrays([0.0, 0.0, 50.0], [1.0, 0.0, 0.0]).unwrap();
        let a = ApertureConfig::square(2.0, 0.1).unwrap();
        assert!(Scene::new(a, vec![t, t], 0.0, 1, 0).is_err());
        assert!(Scene::new(a, vec![t], -1.0, 1, 0).is_err());
    }
}
