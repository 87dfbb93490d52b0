use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use super::grid::{GridKind, NodeGrid, C64};
use super::scene::{CurrentModel, NoiseModel, Scene};
use crate::error::{Error, Result};
use crate::rng;

pub type CMat = DMatrix<C64>;

/// Effective snapshot signals s_m(t) and the currents behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotSeries {
    /// M × T.
    pub signals: CMat,
    /// M × T.
    pub currents: CMat,
}

impl SnapshotSeries {
    pub fn sources(&self) -> usize {
        self.signals.nrows()
    }
    pub fn len(&self) -> usize {
        self.signals.ncols()
    }
    pub fn is_empty(&self) -> bool {
        self.signals.ncols() == 0
    }

    /// Repeat the series `times` times along the snapshot axis.
    pub fn repeated(&self, times: usize) -> SnapshotSeries {
        let t = self.len();
        let m = self.sources();
        let mut s = CMat::zeros(m, t * times);
        let mut c = CMat::zeros(m, t * times);
        for r in 0..times {
            s.columns_mut(r * t, t).copy_from(&self.signals);
            c.columns_mut(r * t, t).copy_from(&self.currents);
        }
        SnapshotSeries { signals: s, currents: c }
    }
}

/// Draw I_m(t) from the scene's current model and seed.
///
/// Target m uses its own stream, so adding targets or snapshots never
/// changes the draws of the existing ones.
pub fn draw_currents(scene: &Scene) -> CMat {
    let m = scene.source_count();
    let t = scene.snapshots;
    let mut cur = CMat::zeros(m, t);
    for i in 0..m {
        let mut r = rng::stream(scene.seed, &[rng::STREAM_CURRENTS, i as u64]);
        for j in 0..t {
            cur[(i, j)] = match scene.currents {
                CurrentModel::UnitPhase => C64::from_polar(1.0, r.random::<f64>() * 2.0 * PI),
                CurrentModel::ComplexGaussian => {
                    let a: f64 = r.sample(StandardNormal);
                    let b: f64 = r.sample(StandardNormal);
                    C64::new(a, b) * std::f64::consts::FRAC_1_SQRT_2
                }
            };
        }
    }
    cur
}

/// s_m(t) = j I_m(t) l_m η / (2 λ p_m) · e^{j k p_m}.
pub fn snapshot_signals(scene: &Scene, currents: &CMat) -> Result<SnapshotSeries> {
    let m = scene.source_count();
    if currents.nrows() != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{m} rows"),
            actual: format!("{} rows", currents.nrows()),
        });
    }
    let ap = &scene.aperture;
    let k = ap.wavenumber();
    let mut signals = currents.clone();
    for (i, target) in scene.targets.iter().enumerate() {
        let p = target.range();
        let gain = C64::new(0.0, 1.0) * C64::from_polar(target.length() * ap.impedance() / (2.0 * ap.wavelength() * p), k * p);
        for j in 0..currents.ncols() {
            signals[(i, j)] = gain * currents[(i, j)];
        }
    }
    Ok(SnapshotSeries { signals, currents: currents.clone() })
}

/// Currents from the scene seed turned into snapshot signals.
pub fn scene_snapshots(scene: &Scene) -> SnapshotSeries {
    snapshot_signals(scene, &draw_currents(scene)).expect("currents drawn for this scene")
}

/// Tri-axial field samples: for each axis a T × N matrix (row t, column n).
#[derive(Clone, Debug)]
pub struct FieldSamples {
    grid: Arc<NodeGrid>,
    axes: [CMat; 3],
    noise_power: f64,
    seed: u64,
}

impl FieldSamples {
    pub fn from_parts(grid: Arc<NodeGrid>, axes: [CMat; 3], noise_power: f64, seed: u64) -> Result<Self> {
        let n = grid.len();
        let t = axes[0].nrows();
        for a in &axes {
            if a.ncols() != n || a.nrows() != t {
                return Err(Error::DimensionMismatch {
                    expected: format!("{t}x{n}"),
                    actual: format!("{}x{}", a.nrows(), a.ncols()),
                });
            }
        }
        Ok(FieldSamples { grid, axes, noise_power, seed })
    }

    pub fn grid(&self) -> &NodeGrid {
        &self.grid
    }
    pub fn grid_arc(&self) -> &Arc<NodeGrid> {
        &self.grid
    }
    pub fn axis(&self, p: usize) -> &CMat {
        &self.axes[p]
    }
    pub fn axes(&self) -> &[CMat; 3] {
        &self.axes
    }
    pub fn snapshots(&self) -> usize {
        self.axes[0].nrows()
    }
    pub fn nodes(&self) -> usize {
        self.axes[0].ncols()
    }
    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }
    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn wavenumber(&self) -> f64 {
        self.grid.aperture().wavenumber()
    }

    /// Keep the first `t` snapshots.
    pub fn truncated(&self, t: usize) -> FieldSamples {
        let t = t.min(self.snapshots());
        let axes = [0, 1, 2].map(|p| self.axes[p].rows(0, t).into_owned());
        FieldSamples { grid: self.grid.clone(), axes, noise_power: self.noise_power, seed: self.seed }
    }

    /// Debug dump: one row per (axis, node, snapshot).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(w);
        let io = |e: std::io::Error| Error::Serialization(e.to_string());
        writeln!(w, "axis,node,x,y,snapshot,re,im").map_err(io)?;
        for (p, name) in ["x", "y", "z"].iter().enumerate() {
            for n in 0..self.nodes() {
                let r = self.grid.position(n);
                for t in 0..self.snapshots() {
                    let v = self.axes[p][(t, n)];
                    writeln!(w, "{name},{n},{:e},{:e},{t},{:e},{:e}", r.x, r.y, v.re, v.im).map_err(io)?;
                }
            }
        }
        w.flush().map_err(io)
    }

    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Dump<'a> {
            schema: &'static str,
            grid: &'a GridKind,
            aperture: &'a super::scene::ApertureConfig,
            noise_power: f64,
            seed: u64,
            snapshots: usize,
            node_positions: Vec<[f64; 2]>,
            area_weights: Vec<f64>,
            /// axis → snapshot → node → [re, im]
            field: Vec<Vec<Vec<[f64; 2]>>>,
        }
        let field = (0..3)
            .map(|p| {
                (0..self.snapshots())
                    .map(|t| (0..self.nodes()).map(|n| {
                        let v = self.axes[p][(t, n)];
                        [v.re, v.im]
                    }).collect())
                    .collect()
            })
            .collect();
        let dump = Dump {
            schema: "capa.field.v1",
            grid: self.grid.kind(),
            aperture: self.grid.aperture(),
            noise_power: self.noise_power,
            seed: self.seed,
            snapshots: self.snapshots(),
            node_positions: (0..self.nodes()).map(|n| {
                let r = self.grid.position(n);
                [r.x, r.y]
            }).collect(),
            area_weights: self.grid.area_weights(),
            field,
        };
        Ok(serde_json::to_string(&dump)?)
    }
}

/// Noiseless contribution of every target to axis `p`: T × N.
pub fn deterministic_axis(scene: &Scene, grid: &NodeGrid, snapshots: &SnapshotSeries, p: usize) -> CMat {
    let k = scene.wavenumber();
    let t = snapshots.len();
    let n = grid.len();
    let mut out = CMat::zeros(t, n);
    for (m, target) in scene.targets.iter().enumerate() {
        let v = target.polarization()[p];
        if v == 0.0 {
            continue;
        }
        let a = grid.steering(k, &target.direction());
        for col in 0..n {
            let av = a[col] * v;
            let mut c = out.column_mut(col);
            for row in 0..t {
                c[row] += snapshots.signals[(m, row)] * av;
            }
        }
    }
    out
}

/// Standard deviation of the noise sample at each node.
pub fn noise_scales(scene: &Scene, grid: &NodeGrid) -> Vec<f64> {
    match scene.noise_model {
        NoiseModel::PerSample => vec![scene.noise_power.sqrt(); grid.len()],
        NoiseModel::Continuum => grid.area_weights().iter().map(|a| (scene.noise_power / a).sqrt()).collect(),
    }
}

fn noise_stream_label(grid: &NodeGrid) -> u64 {
    match grid.kind() {
        GridKind::Discrete { .. } => rng::STREAM_ARRAY_NOISE,
        _ => rng::STREAM_NOISE,
    }
}

/// Add circular complex Gaussian noise to the given axes.
///
/// Snapshot t draws from its own substream, in axis-then-node order, so the
/// first T′ snapshots of a longer record equal a T′-snapshot record.
pub fn add_noise(scene: &Scene, grid: &NodeGrid, axes: &mut [(usize, &mut CMat)]) {
    if scene.noise_power == 0.0 {
        return;
    }
    let scales = noise_scales(scene, grid);
    let label = noise_stream_label(grid);
    let t_len = axes.first().map(|(_, m)| m.nrows()).unwrap_or(0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    for t in 0..t_len {
        let mut r = rng::stream(scene.seed, &[label, t as u64]);
        for p in 0..3 {
            // axes not requested still consume their draws
            let target = axes.iter_mut().find(|(q, _)| *q == p);
            match target {
                Some((_, m)) => {
                    for (n, s) in scales.iter().enumerate() {
                        let a: f64 = r.sample(StandardNormal);
                        let b: f64 = r.sample(StandardNormal);
                        m[(t, n)] += C64::new(a, b) * (s * h);
                    }
                }
                None => {
                    for _ in 0..2 * scales.len() {
                        let _: f64 = r.sample(StandardNormal);
                    }
                }
            }
        }
    }
}

/// Received field over the grid for the given snapshots, plus noise.
pub fn synthesize_field(scene: &Scene, grid: &Arc<NodeGrid>, snapshots: &SnapshotSeries) -> Result<FieldSamples> {
    if snapshots.sources() != scene.source_count() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} sources", scene.source_count()),
            actual: format!("{} sources", snapshots.sources()),
        });
    }
    scene.warn_near_field();
    let [mut ex, mut ey, mut ez] = [0, 1, 2].map(|p| deterministic_axis(scene, grid, snapshots, p));
    add_noise(scene, grid, &mut [(0, &mut ex), (1, &mut ey), (2, &mut ez)]);
    FieldSamples::from_parts(grid.clone(), [ex, ey, ez], scene.noise_power, scene.seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::geometry::RealVec3;
    use crate::em::grid::build_node_grid;
    use crate::em::quadrature::gauss_legendre_rule;
    use crate::em::scene::{ApertureConfig, Target};

    fn scene(targets: Vec<Target>, sigma2: f64, t: usize) -> Scene {
        Scene::new(ApertureConfig::square(2.0, 0.1).unwrap(), targets, sigma2, t, 42).unwrap()
    }

    fn gl(k: usize) -> Arc<NodeGrid> {
        Arc::new(build_node_grid(&ApertureConfig::square(2.0, 0.1).unwrap(), &gauss_legendre_rule(k).unwrap()))
    }

    #[test]
    fn signal_magnitude() {
        let t = Target::new(RealVec3::new(-16.0, -10.0, 50.0), crate::em::geometry::UnitVec3::x_axis(), 0.01).unwrap();
        let s = scene(vec![t], 0.0, 2);
        let cur = CMat::from_element(1, 2, C64::new(1.0, 0.0));
        let ss = snapshot_signals(&s, &cur).unwrap();
        let want = 120.0 * PI * 0.01 / (2.0 * 0.1 * t.range());
        assert!((ss.signals[(0, 0)].norm() - want).abs() < 1e-12);
        assert!((want - 0.35266).abs() < 1e-4);
        let zero = snapshot_signals(&s, &CMat::zeros(1, 2)).unwrap();
        assert_eq!(zero.signals, CMat::zeros(1, 2));
        assert!(snapshot_signals(&s, &CMat::zeros(2, 2)).is_err());
    }

    #[test]
    fn dipole_length_is_linear() {
        let t1 = Target::from_arrays([3.0, 1.0, 40.0], [0.0, 1.0, 0.0]).unwrap();
        let t2 = Target::new(*t1.position(), *t1.attitude(), 2.0 * t1.length()).unwrap();
        let cur = CMat::from_element(1, 1, C64::from_polar(1.0, 0.4));
        let a = snapshot_signals(&scene(vec![t1], 0.0, 1), &cur).unwrap();
        let b = snapshot_signals(&scene(vec![t2], 0.0, 1), &cur).unwrap();
        assert!((b.signals[(0, 0)].norm() - 2.0 * a.signals[(0, 0)].norm()).abs() < 1e-14);
    }

    #[test]
    fn currents_unit_magnitude_and_reproducible() {
        let t = Target::from_arrays([3.0, 1.0, 40.0], [0.0, 1.0, 0.0]).unwrap();
        let s = scene(vec![t, t], 0.0, 5);
        let c = draw_currents(&s);
        assert!(c.iter().all(|v| (v.norm() - 1.0).abs() < 1e-14));
        assert_eq!(c, draw_currents(&s));
    }

    #[test]
    fn empty_scene_zero_field() {
        let s = scene(vec![], 0.0, 3);
        let ss = scene_snapshots(&s);
        let f = synthesize_field(&s, &gl(4), &ss).unwrap();
        assert!(f.axes().iter().all(|a| a.iter().all(|v| *v == C64::new(0.0, 0.0))));
    }

    #[test]
    fn zenith_target_centre_node() {
        let t = Target::from_arrays([0.0, 0.0, 50.0], [1.0, 0.0, 0.0]).unwrap();
        let s = scene(vec![t], 0.0, 4);
        let ss = scene_snapshots(&s);
        let f = synthesize_field(&s, &gl(5), &ss).unwrap();
        let centre = 12; // (2, 2) of a 5×5 grid
        assert_eq!(f.grid().position(centre), RealVec3::zeros());
        for t in 0..4 {
            assert_eq!(f.axis(0)[(t, centre)], ss.signals[(0, t)]);
            assert_eq!(f.axis(1)[(t, centre)], C64::new(0.0, 0.0));
            assert_eq!(f.axis(2)[(t, centre)], C64::new(0.0, 0.0));
        }
    }

    #[test]
    fn noise_prefix_property() {
        let t = Target::from_arrays([3.0, 1.0, 40.0], [0.0, 1.0, 0.0]).unwrap();
        let long = scene(vec![t], 1e-3, 8);
        let short = Scene { snapshots: 5, ..long.clone() };
        let fl = synthesize_field(&long, &gl(4), &scene_snapshots(&long)).unwrap();
        let fs = synthesize_field(&short, &gl(4), &scene_snapshots(&short)).unwrap();
        for p in 0..3 {
            assert_eq!(fl.axis(p).rows(0, 5).into_owned(), *fs.axis(p));
        }
    }

    #[test]
    fn continuum_noise_variance() {
        let s = scene(vec![], 0.5, 400);
        let g = gl(6);
        let f = synthesize_field(&s, &g, &scene_snapshots(&s)).unwrap();
        // weighted power Σ_n A_n |e|² ≈ σ² N on average per snapshot and axis
        let mut acc = 0.0;
        for p in 0..3 {
            for t in 0..400 {
                for n in 0..g.len() {
                    acc += g.area_weight(n) * f.axis(p)[(t, n)].norm_sqr();
                }
            }
        }
        let per = acc / (3.0 * 400.0 * g.len() as f64);
        assert!((per - 0.5).abs() < 0.03, "{per}");
    }

    #[test]
    fn csv_and_json_dump() {
        let t = Target::from_arrays([3.0, 1.0, 40.0], [0.0, 1.0, 0.0]).unwrap();
        let s = scene(vec![t], 1e-3, 2);
        let f = synthesize_field(&s, &gl(2), &scene_snapshots(&s)).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 3 * 4 * 2);
        let v: serde_json::Value = serde_json::from_str(&f.to_json().unwrap()).unwrap();
        assert_eq!(v["field"].as_array().unwrap().len(), 3);
        assert_eq!(v["field"][0][1].as_array().unwrap().len(), 4);
    }
}
