//! Ready-made studies on the reference scene.

use capa_core::em::Scene;
use capa_core::presets::{reference_aperture, reference_targets_up_to};

use crate::config::{AttitudeSetting, ExperimentConfig, Method, Sweep, SweepVariable};

pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> ExperimentConfig,
}

impl Preset {
    pub fn config(&self) -> ExperimentConfig {
        let mut c = (self.build)();
        c.name = self.name.into();
        c.output_prefix = format!("{}_", self.name);
        c
    }
}

fn base(targets: usize) -> ExperimentConfig {
    let scene = Scene::new(reference_aperture(), reference_targets_up_to(targets), 1e-3, 500, 0).expect("reference scene");
    ExperimentConfig { scene, ..ExperimentConfig::default() }
}

fn sweep(variable: SweepVariable, values: &[f64]) -> Sweep {
    Sweep { variable, values: values.to_vec() }
}

const NOISE: [f64; 5] = [1e-4, 3e-4, 1e-3, 3e-3, 1e-2];

pub const PRESETS: &[Preset] = &[
    Preset {
        name: "noise",
        description: "DOA MSE versus noise power for all methods with the CRLB",
        build: || ExperimentConfig {
            sweep: sweep(SweepVariable::NoisePower, &NOISE),
            methods: vec![Method::Tri, Method::Singlepol, Method::Spda, Method::Crlb],
            ..base(2)
        },
    },
    Preset {
        name: "snapshots",
        description: "DOA MSE versus snapshot count, T from 500 to 1500",
        build: || ExperimentConfig {
            sweep: sweep(SweepVariable::Snapshots, &[500.0, 750.0, 1000.0, 1250.0, 1500.0]),
            methods: vec![Method::Tri, Method::Singlepol, Method::Spda, Method::Crlb],
            ..base(2)
        },
    },
    Preset {
        name: "convergence",
        description: "DOA MSE versus quadrature order K from 5 to 20",
        build: || ExperimentConfig {
            sweep: sweep(SweepVariable::QuadratureOrder, &(5..=20).map(f64::from).collect::<Vec<_>>()),
            trials: 50,
            ..base(2)
        },
    },
    Preset {
        name: "aperture",
        description: "DOA MSE versus aperture side 0.5, 1 and 2 m",
        build: || ExperimentConfig { sweep: sweep(SweepVariable::ApertureSide, &[0.5, 1.0, 2.0]), ..base(2) },
    },
    Preset {
        name: "targets",
        description: "DOA MSE versus target count 1 to 3 with the CRLB",
        build: || ExperimentConfig {
            sweep: sweep(SweepVariable::TargetCount, &[1.0, 2.0, 3.0]),
            methods: vec![Method::Tri, Method::Crlb],
            ..base(3)
        },
    },
    Preset {
        name: "attitude",
        description: "Blind attitude MAE versus noise power",
        build: || ExperimentConfig {
            sweep: sweep(SweepVariable::NoisePower, &NOISE),
            attitude: AttitudeSetting::Blind,
            ..base(2)
        },
    },
    Preset {
        name: "attitude-known",
        description: "Known-snapshot attitude MAE and ambiguity versus noise power",
        build: || ExperimentConfig {
            sweep: sweep(SweepVariable::NoisePower, &NOISE),
            attitude: AttitudeSetting::Known,
            ..base(2)
        },
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}
