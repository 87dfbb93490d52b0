//! Monte Carlo execution of an experiment configuration.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use capa_core::attitude::{estimate_attitudes, AttitudeEstimate, AttitudeMode};
use capa_core::baselines::{crlb, singlepol_music, spda_music};
use capa_core::em::{build_node_grid, gauss_legendre_rule, scene_snapshots, synthesize_field, NodeGrid, UnitVec3};
use capa_core::music::estimate_doa;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{AttitudeSetting, DoaSource, ExperimentConfig, Method};
use crate::error::{HarnessError, Result};
use crate::metrics::{mae_metric, mse_metric, paired_estimates, Mae, Mse};

pub const RESULTS_SCHEMA: &str = "capa.results.v1";

/// Result of one estimator in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Failed { kind: String, message: String },
}

impl<T> Outcome<T> {
    fn from_result(r: capa_core::Result<T>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Failed { kind: error_kind(&e), message: e.to_string() },
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Failed { .. } => None,
        }
    }

    fn kind(&self) -> Option<&str> {
        match self {
            Outcome::Ok(_) => None,
            Outcome::Failed { kind, .. } => Some(kind),
        }
    }
}

/// Variant name of a core error in snake case.
pub fn error_kind(e: &capa_core::Error) -> String {
    let dbg = format!("{e:?}");
    let name = dbg.split(|c: char| !c.is_alphanumeric()).next().unwrap_or("error");
    let mut out = String::new();
    for (i, c) in name.chars().enumerate() {
        if c.is_uppercase() && i > 0 {
            out.push('_');
        }
        out.push(c.to_ascii_lowercase());
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrlbOutcome {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub seed: u64,
    /// (θ, φ) estimates in descending spectrum order.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub doa: BTreeMap<Method, Outcome<Vec<(f64, f64)>>>,
    /// One entry per target, in target order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attitude: Option<Outcome<Vec<Outcome<AttitudeEstimate>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crlb: Option<Outcome<CrlbOutcome>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRecord {
    pub method: Method,
    pub mse: Option<Mse>,
    pub failures: usize,
    pub failure_kinds: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrlbRecord {
    /// Per-target bounds averaged over trials (rad²).
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    /// Sums over targets, comparable with the MSE norms.
    pub sum_theta: f64,
    pub sum_phi: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttitudeRecord {
    pub mode: AttitudeSetting,
    pub mae: Option<Mae>,
    pub failures: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub sweep_value: f64,
    pub trials: usize,
    pub methods: Vec<MethodRecord>,
    pub crlb: Option<CrlbRecord>,
    pub attitude: Option<AttitudeRecord>,
    pub seconds: Option<f64>,
}

impl MetricRecord {
    pub fn method(&self, m: Method) -> Option<&MethodRecord> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn mse(&self, m: Method) -> Option<&Mse> {
        self.method(m).and_then(|r| r.mse.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub schema: String,
    pub config: ExperimentConfig,
    pub records: Vec<MetricRecord>,
    /// Seeds per sweep value and trial.
    pub trial_seeds: Vec<Vec<u64>>,
    #[serde(default)]
    pub outcomes: Vec<Vec<TrialOutcome>>,
}

fn doa_methods(cfg: &ExperimentConfig) -> Vec<Method> {
    cfg.methods.iter().copied().filter(|m| *m != Method::Crlb).collect()
}

/// One Monte Carlo trial at sweep index `idx`.
pub fn run_trial(cfg: &ExperimentConfig, idx: usize, trial: usize, grid: &Arc<NodeGrid>) -> capa_core::Result<TrialOutcome> {
    let scene = cfg.scene_at(idx, trial)?;
    let m = scene.source_count();
    let ss = scene_snapshots(&scene);
    let needs_tri = cfg.runs(Method::Tri) || (cfg.attitude != AttitudeSetting::Off && cfg.attitude_doas == DoaSource::Estimated);
    let needs_field = needs_tri || cfg.runs(Method::Singlepol) || cfg.attitude != AttitudeSetting::Off;
    let field = if needs_field { Some(synthesize_field(&scene, grid, &ss)?) } else { None };
    let mut out = TrialOutcome { seed: scene.seed, doa: BTreeMap::new(), attitude: None, crlb: None };
    if needs_tri {
        let r = estimate_doa(field.as_ref().expect("field"), m, &cfg.doa).map(|e| e.angles());
        out.doa.insert(Method::Tri, Outcome::from_result(r));
    }
    if cfg.runs(Method::Singlepol) {
        let r = singlepol_music(field.as_ref().expect("field"), m, &cfg.doa).map(|e| e.angles());
        out.doa.insert(Method::Singlepol, Outcome::from_result(r));
    }
    if cfg.runs(Method::Spda) {
        out.doa.insert(Method::Spda, Outcome::from_result(spda_music(&scene, &ss, &cfg.doa).map(|e| e.angles())));
    }
    if cfg.attitude != AttitudeSetting::Off {
        let truth = scene.doas();
        let doas = match cfg.attitude_doas {
            DoaSource::Truth => Some(truth.clone()),
            DoaSource::Estimated => match out.doa.get(&Method::Tri).and_then(|o| o.ok()) {
                Some(est) => paired_estimates(&truth, est),
                None => None,
            },
        };
        let mode = if cfg.attitude == AttitudeSetting::Blind { AttitudeMode::Blind } else { AttitudeMode::Known };
        out.attitude = Some(match doas {
            Some(d) => Outcome::from_result(
                estimate_attitudes(field.as_ref().expect("field"), &d, mode, Some(&ss), &cfg.attitude_options)
                    .map(|v| v.into_iter().map(Outcome::from_result).collect()),
            ),
            None => Outcome::Failed { kind: "missing_doa".into(), message: "no direction estimate for attitude".into() },
        });
    }
    if cfg.runs(Method::Crlb) {
        let r = crlb(&scene, grid, &ss).map(|c| CrlbOutcome { theta: (0..m).map(|i| c.theta(i)).collect(), phi: (0..m).map(|i| c.phi(i)).collect() });
        out.crlb = Some(Outcome::from_result(r));
    }
    Ok(out)
}

/// Aggregate trial outcomes of one sweep value.
pub fn aggregate(cfg: &ExperimentConfig, idx: usize, outcomes: &[TrialOutcome], seconds: Option<f64>) -> capa_core::Result<MetricRecord> {
    let scene = cfg.scene_at(idx, 0)?;
    let truth = scene.doas();
    let methods = doa_methods(cfg)
        .into_iter()
        .map(|method| {
            let per: Vec<Option<Vec<(f64, f64)>>> = outcomes.iter().map(|o| o.doa.get(&method).and_then(|r| r.ok()).cloned()).collect();
            let mut kinds = BTreeMap::new();
            for o in outcomes {
                if let Some(k) = o.doa.get(&method).and_then(|r| r.kind()) {
                    *kinds.entry(k.to_string()).or_insert(0) += 1;
                }
            }
            let mse = mse_metric(&truth, &per);
            let failures = mse.excluded;
            MethodRecord { method, mse: (mse.trials > 0).then_some(mse), failures, failure_kinds: kinds }
        })
        .collect();
    let crlb = cfg.runs(Method::Crlb).then(|| {
        let m = truth.len();
        let ok: Vec<&CrlbOutcome> = outcomes.iter().filter_map(|o| o.crlb.as_ref().and_then(|c| c.ok())).collect();
        let n = ok.len().max(1) as f64;
        let theta: Vec<f64> = (0..m).map(|i| ok.iter().map(|c| c.theta[i]).sum::<f64>() / n).collect();
        let phi: Vec<f64> = (0..m).map(|i| ok.iter().map(|c| c.phi[i]).sum::<f64>() / n).collect();
        CrlbRecord { sum_theta: theta.iter().sum(), sum_phi: phi.iter().sum(), theta, phi, trials: ok.len(), failures: outcomes.len() - ok.len() }
    });
    let attitude = (cfg.attitude != AttitudeSetting::Off).then(|| {
        let truth_q: Vec<UnitVec3> = scene.targets.iter().map(|t| *t.attitude()).collect();
        let mut failures = 0;
        let per: Vec<Vec<Option<AttitudeEstimate>>> = outcomes
            .iter()
            .map(|o| match o.attitude.as_ref().and_then(|a| a.ok()) {
                Some(v) => v.iter().map(|e| e.ok().cloned()).collect(),
                None => vec![None; truth_q.len()],
            })
            .collect();
        for row in &per {
            failures += row.iter().filter(|e| e.is_none()).count();
        }
        let mae = mae_metric(&truth_q, &per);
        AttitudeRecord { mode: cfg.attitude, mae: (mae.count > 0).then_some(mae), failures }
    });
    Ok(MetricRecord { sweep_value: cfg.sweep.values[idx], trials: outcomes.len(), methods, crlb, attitude, seconds })
}

fn grid_for(cfg: &ExperimentConfig, idx: usize) -> capa_core::Result<Arc<NodeGrid>> {
    let scene = cfg.scene_at(idx, 0)?;
    Ok(Arc::new(build_node_grid(&scene.aperture, &gauss_legendre_rule(cfg.quadrature_at(idx))?)))
}

/// Run every sweep value and trial. Estimator failures are recorded per
/// trial; only an invalid configuration aborts.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cfg.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut records = Vec::new();
    let mut outcomes = Vec::new();
    let mut seeds = Vec::new();
    for idx in 0..cfg.sweep.values.len() {
        let start = Instant::now();
        let grid = grid_for(cfg, idx).map_err(|e| HarnessError::Config(e.to_string()))?;
        let trials: Vec<TrialOutcome> = pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, idx, t, &grid))
                .collect::<capa_core::Result<Vec<_>>>()
        })
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        let seconds = cfg.timing.then(|| start.elapsed().as_secs_f64());
        let record = aggregate(cfg, idx, &trials, seconds).map_err(|e| HarnessError::Config(e.to_string()))?;
        log::info!("{} = {}: {} trials", cfg.sweep.variable.name(), cfg.sweep.values[idx], cfg.trials);
        seeds.push(trials.iter().map(|t| t.seed).collect());
        outcomes.push(trials);
        records.push(record);
    }
    Ok(ExperimentResult { schema: RESULTS_SCHEMA.into(), config: cfg.clone(), records, trial_seeds: seeds, outcomes })
}
