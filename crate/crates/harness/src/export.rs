//! CSV and JSON exports. Every file is listed with its schema version in
//! `manifest.json` next to it.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use capa_core::music::SpectrumGrid;
use serde::{Deserialize, Serialize};

use crate::config::{AttitudeSetting, ExperimentConfig, Method};
use crate::error::{HarnessError, Result};
use crate::runner::{ExperimentResult, MetricRecord};

pub const SWEEP_SCHEMA: &str = "capa.sweep.v1";
pub const SPECTRUM_SCHEMA: &str = "capa.spectrum.v1";
pub const MANIFEST_SCHEMA: &str = "capa.manifest.v1";

fn fmt(v: Option<f64>) -> String {
    match v {
        Some(x) if x.is_finite() => format!("{x:e}"),
        _ => String::new(),
    }
}

fn doa_methods(cfg: &ExperimentConfig) -> Vec<Method> {
    cfg.methods.iter().copied().filter(|m| *m != Method::Crlb).collect()
}

pub fn sweep_header(cfg: &ExperimentConfig) -> Vec<String> {
    let mut h = vec![cfg.sweep.variable.name().to_string(), "trials".into()];
    for m in doa_methods(cfg) {
        for col in ["mse_theta", "mse_phi", "failures"] {
            h.push(format!("{}_{col}", m.name()));
        }
    }
    if cfg.runs(Method::Crlb) {
        h.extend(["crlb_theta".into(), "crlb_phi".into()]);
    }
    if cfg.attitude != AttitudeSetting::Off {
        h.extend(["mae_best".into(), "mae_worst".into(), "ambiguity_rate".into(), "attitude_failures".into()]);
    }
    if cfg.timing {
        h.push("seconds".into());
    }
    h
}

fn sweep_row(cfg: &ExperimentConfig, r: &MetricRecord) -> Vec<String> {
    let mut row = vec![format!("{}", r.sweep_value), r.trials.to_string()];
    for m in doa_methods(cfg) {
        let rec = r.method(m);
        let mse = rec.and_then(|x| x.mse.as_ref());
        row.push(fmt(mse.map(|x| x.theta)));
        row.push(fmt(mse.map(|x| x.phi)));
        row.push(rec.map(|x| x.failures).unwrap_or(0).to_string());
    }
    if cfg.runs(Method::Crlb) {
        let c = r.crlb.as_ref().filter(|c| c.trials > 0);
        row.push(fmt(c.map(|c| c.sum_theta)));
        row.push(fmt(c.map(|c| c.sum_phi)));
    }
    if cfg.attitude != AttitudeSetting::Off {
        let a = r.attitude.as_ref();
        let mae = a.and_then(|a| a.mae.as_ref());
        row.push(fmt(mae.map(|m| m.best)));
        row.push(fmt(mae.map(|m| m.worst)));
        row.push(fmt(mae.map(|m| m.ambiguity_rate)));
        row.push(a.map(|a| a.failures).unwrap_or(0).to_string());
    }
    if cfg.timing {
        row.push(fmt(r.seconds));
    }
    row
}

/// One row per sweep value; one column group per configured method.
pub fn write_sweep_csv<W: Write>(cfg: &ExperimentConfig, records: &[MetricRecord], w: W) -> std::result::Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(sweep_header(cfg))?;
    for r in records {
        out.write_record(sweep_row(cfg, r))?;
    }
    out.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| HarnessError::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> HarnessError {
    HarnessError::io(path, std::io::Error::other(e.to_string()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| HarnessError::io(path, e))
}

pub fn read_results(path: &Path) -> Result<ExperimentResult> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
}

pub fn write_spectrum_csv(grid: &SpectrumGrid, path: &Path) -> Result<()> {
    let w = create(path)?;
    grid.write_csv(w).map_err(|e| HarnessError::io(path, std::io::Error::other(e.to_string())))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub schema: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub name: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

/// Write `<prefix>sweep.csv`, `<prefix>results.json` and `manifest.json` into `dir`.
pub fn export_results(result: &ExperimentResult, dir: &Path) -> Result<Vec<PathBuf>> {
    let prefix = &result.config.output_prefix;
    let sweep = dir.join(format!("{prefix}sweep.csv"));
    let json = dir.join(format!("{prefix}results.json"));
    {
        let mut w = create(&sweep)?;
        write_sweep_csv(&result.config, &result.records, &mut w).map_err(|e| csv_io(&sweep, e))?;
        w.flush().map_err(|e| HarnessError::io(&sweep, e))?;
    }
    write_json(result, &json)?;
    let manifest = dir.join("manifest.json");
    let mut files = vec![
        ManifestEntry { file: file_name(&sweep), schema: SWEEP_SCHEMA.into() },
        ManifestEntry { file: file_name(&json), schema: result.schema.clone() },
    ];
    merge_manifest(&manifest, &result.config.name, result.config.seed, &mut files)?;
    Ok(vec![sweep, json, manifest])
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Add entries to an existing manifest in `dir`, or start one.
pub fn merge_manifest(path: &Path, name: &str, seed: u64, entries: &mut Vec<ManifestEntry>) -> Result<()> {
    let mut manifest = match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str::<Manifest>(&text).unwrap_or(Manifest { schema: MANIFEST_SCHEMA.into(), name: name.into(), seed, files: vec![] }),
        Err(_) => Manifest { schema: MANIFEST_SCHEMA.into(), name: name.into(), seed, files: vec![] },
    };
    for e in entries.drain(..) {
        manifest.files.retain(|f| f.file != e.file);
        manifest.files.push(e);
    }
    manifest.files.sort_by(|a, b| a.file.cmp(&b.file));
    write_json(&manifest, path)
}
