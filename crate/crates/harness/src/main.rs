use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use capa_core::attitude::{attitude_report, estimate_attitudes, AttitudeMode};
use capa_core::baselines::{crlb, singlepol_with_grid, spda_with_grid};
use capa_core::em::{build_node_grid, gauss_legendre_rule, scene_snapshots, synthesize_field, uniform_grid, NodeGrid, Scene, UnitVec3};
use capa_core::music::{estimate_with_engine, DoaEstimate, GridSpec, MusicEngine, SpectrumGrid};
use capa_harness::config::ExperimentConfig;
use capa_harness::error::{HarnessError, Result};
use capa_harness::export::{export_results, merge_manifest, write_json, write_spectrum_csv, ManifestEntry, SPECTRUM_SCHEMA};
use capa_harness::metrics::paired_estimates;
use capa_harness::{presets, run_trials};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

#[derive(Parser)]
#[command(name = "capa", version, about = "Tri-polarized continuous-aperture DOA and attitude experiments")]
struct Cli {
    /// Experiment configuration (JSON). A bare scene document is accepted too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the scene seed (single runs) or the master seed (sweeps).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Report angles in degrees and read angle arguments in degrees.
    #[arg(long, global = true)]
    degrees: bool,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DoaMethod {
    Tri,
    Singlepol,
    Spda,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Blind,
    Known,
}

#[derive(Clone, Copy, ValueEnum)]
enum DumpFormat {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one field realization and dump it.
    Synth {
        #[arg(long, value_enum, default_value = "json")]
        format: DumpFormat,
        /// Sample on an n × n uniform grid instead of the quadrature nodes.
        #[arg(long)]
        uniform: Option<usize>,
    },
    /// Estimate directions of arrival for one realization.
    Doa {
        #[arg(long, value_enum, default_value = "tri")]
        method: DoaMethod,
    },
    /// Estimate target attitudes for one realization.
    Attitude {
        #[arg(long, value_enum, default_value = "blind")]
        mode: Mode,
        /// Use the true directions instead of the estimates.
        #[arg(long)]
        truth_doas: bool,
    },
    /// Scan the MUSIC spectrum and write it as CSV.
    Spectrum {
        #[arg(long, value_enum, default_value = "tri")]
        method: DoaMethod,
        /// Grid step (radians, or degrees with --degrees).
        #[arg(long)]
        step: Option<f64>,
    },
    /// Cramér-Rao bounds for one realization of the snapshots.
    Crlb,
    /// Run a Monte Carlo study and export its results.
    Sweep {
        /// Use a named preset instead of --config.
        #[arg(long)]
        preset: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Record wall-clock time per sweep value.
        #[arg(long)]
        timing: bool,
    },
    /// List the preset studies, or print one as a config document.
    Presets {
        #[arg(long)]
        show: Option<String>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let Some(path) = &cli.config else {
        return Ok(ExperimentConfig::default());
    };
    match ExperimentConfig::load(path) {
        Ok(c) => Ok(c),
        Err(HarnessError::Config(msg)) => {
            // fall back to a bare scene
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            match Scene::from_json(&text) {
                Ok(scene) => {
                    let cfg = ExperimentConfig { scene, ..ExperimentConfig::default() };
                    cfg.validate()?;
                    Ok(cfg)
                }
                Err(_) => Err(HarnessError::Config(msg)),
            }
        }
        Err(e) => Err(e),
    }
}

fn single_scene(cli: &Cli, cfg: &ExperimentConfig) -> Result<Scene> {
    let mut scene = cfg.scene.clone();
    if let Some(s) = cli.seed {
        scene.seed = s;
    }
    scene.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(scene)
}

fn quadrature_grid(scene: &Scene, order: usize) -> Result<Arc<NodeGrid>> {
    let rule = gauss_legendre_rule(order).map_err(|e| HarnessError::Config(e.to_string()))?;
    Ok(Arc::new(build_node_grid(&scene.aperture, &rule)))
}

fn angle(cli: &Cli, v: f64) -> f64 {
    if cli.degrees {
        v.to_degrees()
    } else {
        v
    }
}

fn pair_json(cli: &Cli, (t, p): (f64, f64)) -> serde_json::Value {
    json!({ "theta": angle(cli, t), "phi": angle(cli, p) })
}

fn doa_json(cli: &Cli, est: &DoaEstimate, truth: &[(f64, f64)]) -> serde_json::Value {
    let peaks: Vec<_> = est
        .peaks
        .iter()
        .map(|p| json!({ "theta": angle(cli, p.theta), "phi": angle(cli, p.phi), "value": p.value, "exact_null": p.exact_null }))
        .collect();
    json!({
        "units": if cli.degrees { "deg" } else { "rad" },
        "estimates": peaks,
        "truth": truth.iter().map(|t| pair_json(cli, *t)).collect::<Vec<_>>(),
    })
}

fn print(v: &serde_json::Value) {
    out(&serde_json::to_string_pretty(v).expect("json"));
}

fn out(line: &str) {
    use std::io::Write;
    // a closed pipe is not an error for a CLI
    let _ = writeln!(std::io::stdout().lock(), "{line}");
}

fn run_doa(cli: &Cli, cfg: &ExperimentConfig, scene: &Scene, method: DoaMethod, spec: &GridSpec) -> Result<(DoaEstimate, SpectrumGrid)> {
    let ss = scene_snapshots(scene);
    let m = scene.source_count();
    let mut opts = cfg.doa.clone();
    opts.grid = spec.clone();
    let _ = cli;
    Ok(match method {
        DoaMethod::Spda => spda_with_grid(scene, &ss, &opts)?,
        DoaMethod::Tri | DoaMethod::Singlepol => {
            let grid = quadrature_grid(scene, cfg.quadrature_order)?;
            let field = synthesize_field(scene, &grid, &ss)?;
            match method {
                DoaMethod::Tri => estimate_with_engine(&MusicEngine::tri_polarized(&field, m, &opts.subspace)?, m, &opts)?,
                _ => singlepol_with_grid(&field, m, &opts)?,
            }
        }
    })
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Presets { show } = &cli.command {
        match show {
            Some(name) => {
                let p = presets::find(name).ok_or_else(|| HarnessError::Config(format!("unknown preset {name}")))?;
                out(&p.config().to_json());
            }
            None => {
                for p in presets::PRESETS {
                    out(&format!("{:<16}{}", p.name, p.description));
                }
            }
        }
        return Ok(());
    }
    let mut cfg = load_config(cli)?;
    if let Some(w) = cli.workers {
        cfg.workers = Some(w);
    }
    match &cli.command {
        Command::Synth { format, uniform } => {
            let scene = single_scene(cli, &cfg)?;
            let grid = match uniform {
                Some(n) => Arc::new(uniform_grid(&scene.aperture, *n, *n)?),
                None => quadrature_grid(&scene, cfg.quadrature_order)?,
            };
            let field = synthesize_field(&scene, &grid, &scene_snapshots(&scene))?;
            let path = cli.out_dir.join(match format {
                DumpFormat::Json => "field.json",
                DumpFormat::Csv => "field.csv",
            });
            std::fs::create_dir_all(&cli.out_dir).map_err(|e| HarnessError::io(&cli.out_dir, e))?;
            match format {
                DumpFormat::Json => std::fs::write(&path, field.to_json()?).map_err(|e| HarnessError::io(&path, e))?,
                DumpFormat::Csv => {
                    let f = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
                    field.write_csv(std::io::BufWriter::new(f)).map_err(|e| HarnessError::io(&path, std::io::Error::other(e.to_string())))?;
                }
            }
            out(&path.display().to_string());
        }
        Command::Doa { method } => {
            let scene = single_scene(cli, &cfg)?;
            let (est, _) = run_doa(cli, &cfg, &scene, *method, &cfg.doa.grid)?;
            print(&doa_json(cli, &est, &scene.doas()));
        }
        Command::Attitude { mode, truth_doas } => {
            let scene = single_scene(cli, &cfg)?;
            let ss = scene_snapshots(&scene);
            let grid = quadrature_grid(&scene, cfg.quadrature_order)?;
            let field = synthesize_field(&scene, &grid, &ss)?;
            let truth = scene.doas();
            let doas = if *truth_doas {
                truth.clone()
            } else {
                let est = capa_core::music::estimate_doa(&field, scene.source_count(), &cfg.doa)?;
                paired_estimates(&truth, &est.angles()).expect("estimate_doa returns M peaks")
            };
            let mode = match mode {
                Mode::Blind => AttitudeMode::Blind,
                Mode::Known => AttitudeMode::Known,
            };
            let est = estimate_attitudes(&field, &doas, mode, Some(&ss), &cfg.attitude_options)?;
            let q: Vec<UnitVec3> = scene.targets.iter().map(|t| *t.attitude()).collect();
            print(&json!({
                "doas": doas.iter().map(|d| pair_json(cli, *d)).collect::<Vec<_>>(),
                "targets": attitude_report(&est, Some(&q)),
            }));
            if est.iter().all(|e| e.is_err()) {
                return Err(est.into_iter().find_map(|e| e.err()).expect("nonempty").into());
            }
        }
        Command::Spectrum { method, step } => {
            let scene = single_scene(cli, &cfg)?;
            let mut spec = cfg.doa.grid.clone();
            if let Some(s) = step {
                spec.step = if cli.degrees { s.to_radians() } else { *s };
            }
            spec.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
            let (est, grid) = run_doa(cli, &cfg, &scene, *method, &spec).or_else(|e| match e {
                HarnessError::Estimation(capa_core::Error::UnderDetection { .. }) => {
                    // still export the scan
                    let ss = scene_snapshots(&scene);
                    let g = quadrature_grid(&scene, cfg.quadrature_order)?;
                    let f = synthesize_field(&scene, &g, &ss)?;
                    let engine = MusicEngine::tri_polarized(&f, scene.source_count(), &cfg.doa.subspace)?;
                    Ok((DoaEstimate::default(), engine.scan(&spec)?))
                }
                other => Err(other),
            })?;
            let name = format!(
                "spectrum_{}.csv",
                match method {
                    DoaMethod::Tri => "tri",
                    DoaMethod::Singlepol => "singlepol",
                    DoaMethod::Spda => "spda",
                }
            );
            let path = cli.out_dir.join(&name);
            write_spectrum_csv(&grid, &path)?;
            merge_manifest(&cli.out_dir.join("manifest.json"), &cfg.name, scene.seed, &mut vec![ManifestEntry { file: name, schema: SPECTRUM_SCHEMA.into() }])?;
            print(&json!({ "file": path.display().to_string(), "median": grid.median(), "max": grid.max(), "peaks": doa_json(cli, &est, &scene.doas()) }));
        }
        Command::Crlb => {
            let scene = single_scene(cli, &cfg)?;
            let grid = quadrature_grid(&scene, cfg.quadrature_order)?;
            let report = crlb(&scene, &grid, &scene_snapshots(&scene))?;
            let path = cli.out_dir.join("crlb.json");
            write_json(&report.to_json_value(), &path)?;
            print(&report.to_json_value());
        }
        Command::Sweep { preset, trials, timing } => {
            if let Some(name) = preset {
                let p = presets::find(name).ok_or_else(|| HarnessError::Config(format!("unknown preset {name}")))?;
                let workers = cfg.workers;
                cfg = p.config();
                cfg.workers = workers;
            }
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            if let Some(t) = trials {
                cfg.trials = *t;
            }
            cfg.timing |= *timing;
            let result = run_trials(&cfg)?;
            for path in export_results(&result, &cli.out_dir)? {
                out(&path.display().to_string());
            }
        }
        Command::Presets { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
