use std::path::Path;

use capa_core::attitude::AttitudeOptions;
use capa_core::em::Scene;
use capa_core::music::DoaOptions;
use capa_core::presets::{reference_aperture, reference_targets};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    NoisePower,
    Snapshots,
    QuadratureOrder,
    ApertureSide,
    TargetCount,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::NoisePower => "noise_power",
            SweepVariable::Snapshots => "snapshots",
            SweepVariable::QuadratureOrder => "quadrature_order",
            SweepVariable::ApertureSide => "aperture_side",
            SweepVariable::TargetCount => "target_count",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepVariable::Snapshots | SweepVariable::QuadratureOrder | SweepVariable::TargetCount)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Tri,
    Singlepol,
    Spda,
    Crlb,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tri => "tri",
            Method::Singlepol => "singlepol",
            Method::Spda => "spda",
            Method::Crlb => "crlb",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeSetting {
    Blind,
    Known,
    #[default]
    Off,
}

/// Where attitude estimation takes its directions from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoaSource {
    #[default]
    Estimated,
    Truth,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    /// Template; the swept quantity and the per-trial seed override it.
    /// For a target-count sweep the first n targets are used.
    pub scene: Scene,
    pub quadrature_order: usize,
    pub sweep: Sweep,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub attitude: AttitudeSetting,
    pub attitude_doas: DoaSource,
    pub doa: DoaOptions,
    pub attitude_options: AttitudeOptions,
    pub seed: u64,
    /// Reuse the same trial seeds at every sweep value.
    pub common_random_numbers: bool,
    /// Thread count; not serialized since results do not depend on it.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    /// Record wall-clock seconds (makes outputs run-dependent).
    pub timing: bool,
    pub output_prefix: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "experiment".into(),
            scene: Scene::new(reference_aperture(), reference_targets(), 1e-3, 500, 0).expect("reference scene"),
            quadrature_order: 16,
            sweep: Sweep { variable: SweepVariable::NoisePower, values: vec![1e-3] },
            trials: 100,
            methods: vec![Method::Tri],
            attitude: AttitudeSetting::Off,
            attitude_doas: DoaSource::Estimated,
            doa: DoaOptions::default(),
            attitude_options: AttitudeOptions::default(),
            seed: 0,
            common_random_numbers: true,
            workers: None,
            timing: false,
            output_prefix: String::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.sweep.values.is_empty() {
            return bad("sweep needs at least one value".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.methods.is_empty() && self.attitude == AttitudeSetting::Off {
            return bad("nothing to run: no methods and attitude off".into());
        }
        if self.quadrature_order == 0 {
            return bad("quadrature order must be positive".into());
        }
        let var = self.sweep.variable;
        for &v in &self.sweep.values {
            if !v.is_finite() || v < 0.0 {
                return bad(format!("{} value {v} is not a finite nonnegative number", var.name()));
            }
            if var.integral() && (v.fract() != 0.0 || v < 1.0) {
                return bad(format!("{} value {v} must be a positive integer", var.name()));
            }
            if var == SweepVariable::TargetCount && v as usize > self.scene.targets.len() {
                return bad(format!("target count {v} exceeds the {} template targets", self.scene.targets.len()));
            }
            if var == SweepVariable::ApertureSide && v == 0.0 {
                return bad("aperture side must be positive".into());
            }
        }
        for i in 0..self.sweep.values.len() {
            self.scene_at(i, 0).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        self.doa.grid.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    /// Seed of one trial; independent of the sweep index under common random numbers.
    pub fn trial_seed(&self, sweep_index: usize, trial: usize) -> u64 {
        use capa_core::rng::{derive_seed, STREAM_TRIAL};
        if self.common_random_numbers {
            derive_seed(self.seed, &[STREAM_TRIAL, trial as u64])
        } else {
            derive_seed(self.seed, &[STREAM_TRIAL, sweep_index as u64, trial as u64])
        }
    }

    pub fn quadrature_at(&self, sweep_index: usize) -> usize {
        match self.sweep.variable {
            SweepVariable::QuadratureOrder => self.sweep.values[sweep_index] as usize,
            _ => self.quadrature_order,
        }
    }

    pub fn scene_at(&self, sweep_index: usize, trial: usize) -> capa_core::Result<Scene> {
        let v = self.sweep.values[sweep_index];
        let mut s = self.scene.clone();
        match self.sweep.variable {
            SweepVariable::NoisePower => s.noise_power = v,
            SweepVariable::Snapshots => s.snapshots = v as usize,
            SweepVariable::QuadratureOrder => {}
            SweepVariable::ApertureSide => s.aperture = s.aperture.with_sides(v, v)?,
            SweepVariable::TargetCount => s.targets.truncate(v as usize),
        }
        s.seed = self.trial_seed(sweep_index, trial);
        s.validate()?;
        Ok(s)
    }

    pub fn runs(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }
}
