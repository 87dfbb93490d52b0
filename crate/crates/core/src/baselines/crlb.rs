use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::em::field::{noise_scales, SnapshotSeries};
use crate::em::geometry::{polarization_vector, wave_vector, RealVec3, UnitVec3};
use crate::em::grid::{NodeGrid, C64};
use crate::em::scene::Scene;
use crate::error::{Error, Result};

/// Finite-difference step for angles and tangent coordinates.
pub const FD_STEP: f64 = 1e-6;
/// Eigenvalues of the scaled FIM below this fraction of the largest are singular.
pub const SINGULAR_TOL: f64 = 1e-10;

/// Conditional (known-snapshot) Cramér-Rao bounds.
///
/// Per target m the parameters are θ_m, φ_m and two coordinates (a_m, b_m)
/// of a tangent chart of the unit sphere at the true attitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrlbReport {
    pub names: Vec<String>,
    /// Diagonal of J⁻¹ in `names` order.
    pub bounds: Vec<f64>,
    /// Bounds on the Cartesian attitude components, per target [x, y, z].
    pub attitude_components: Vec<[f64; 3]>,
    pub fim: DMatrix<f64>,
}

impl CrlbReport {
    pub fn bound(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.bounds[i])
    }

    pub fn theta(&self, m: usize) -> f64 {
        self.bounds[4 * m]
    }

    pub fn phi(&self, m: usize) -> f64 {
        self.bounds[4 * m + 1]
    }

    /// Bounds keyed by parameter name, plus per-component attitude bounds.
    pub fn to_json_value(&self) -> serde_json::Value {
        let mut map: BTreeMap<String, f64> = self.names.iter().cloned().zip(self.bounds.iter().copied()).collect();
        for (m, c) in self.attitude_components.iter().enumerate() {
            for (axis, v) in ["x", "y", "z"].iter().zip(c) {
                map.insert(format!("q{axis}_{}", m + 1), *v);
            }
        }
        serde_json::json!({ "bounds": map, "order": self.names })
    }
}

fn param_names(m: usize) -> Vec<String> {
    (1..=m).flat_map(|i| ["theta", "phi", "att_a", "att_b"].map(|p| format!("{p}_{i}"))).collect()
}

/// Orthonormal tangent basis at q.
fn tangent_basis(q: &UnitVec3) -> (RealVec3, RealVec3) {
    let v = q.as_vec();
    let seed = if v.x.abs() < 0.9 { RealVec3::x() } else { RealVec3::y() };
    let e1 = (seed - v * v.dot(&seed)).normalize();
    let e2 = v.cross(&e1);
    (e1, e2)
}

/// a(r, θ, φ) v(θ, φ, q) over the nodes, axis-major (3N).
fn response(grid: &NodeGrid, k: f64, theta: f64, phi: f64, q: &UnitVec3) -> Vec<C64> {
    let z = wave_vector(theta, phi);
    let v = polarization_vector(q, &z);
    let a = grid.steering(k, &z);
    (0..3).flat_map(|p| a.iter().map(move |x| x * v[p])).collect()
}

fn chart(q: &UnitVec3, e: &(RealVec3, RealVec3), a: f64, b: f64) -> UnitVec3 {
    UnitVec3::normalize(q.as_vec() + e.0 * a + e.1 * b).expect("small chart step")
}

/// Fisher information for the noiseless field on `grid` with known snapshots.
pub fn fisher_information(scene: &Scene, grid: &NodeGrid, snapshots: &SnapshotSeries) -> Result<DMatrix<f64>> {
    if !(scene.noise_power > 0.0) {
        return Err(Error::InvalidInput("the bound needs a positive noise power".into()));
    }
    let m = scene.source_count();
    if snapshots.sources() != m {
        return Err(Error::DimensionMismatch { expected: format!("{m} sources"), actual: format!("{} sources", snapshots.sources()) });
    }
    let k = scene.wavenumber();
    let h = FD_STEP;
    // inverse noise variance per node, repeated for each axis
    let scales = noise_scales(scene, grid);
    let inv_var: Vec<f64> = (0..3).flat_map(|_| scales.iter().map(|s| 1.0 / (s * s))).collect();

    let mut grads: Vec<Vec<C64>> = Vec::with_capacity(4 * m);
    for target in &scene.targets {
        let (theta, phi) = target.doa();
        let q = target.attitude();
        let e = tangent_basis(q);
        let diff = |plus: Vec<C64>, minus: Vec<C64>| -> Vec<C64> { plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect() };
        grads.push(diff(response(grid, k, theta + h, phi, q), response(grid, k, theta - h, phi, q)));
        grads.push(diff(response(grid, k, theta, phi + h, q), response(grid, k, theta, phi - h, q)));
        grads.push(diff(response(grid, k, theta, phi, &chart(q, &e, h, 0.0)), response(grid, k, theta, phi, &chart(q, &e, -h, 0.0))));
        grads.push(diff(response(grid, k, theta, phi, &chart(q, &e, 0.0, h)), response(grid, k, theta, phi, &chart(q, &e, 0.0, -h))));
    }
    // S_ij = Σ_t conj(s_i(t)) s_j(t)
    let s = &snapshots.signals;
    let sc = s.conjugate() * s.transpose();
    let n = 4 * m;
    let mut j = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let g: C64 = grads[a].iter().zip(&grads[b]).zip(&inv_var).map(|((x, y), w)| x.conj() * y * *w).sum();
            let v = 2.0 * (sc[(a / 4, b / 4)] * g).re;
            j[(a, b)] = v;
            j[(b, a)] = v;
        }
    }
    Ok(j)
}

/// Bounds from the Fisher information; a singular matrix is reported with
/// the parameter combinations that carry no information.
pub fn crlb(scene: &Scene, grid: &NodeGrid, snapshots: &SnapshotSeries) -> Result<CrlbReport> {
    let j = fisher_information(scene, grid, snapshots)?;
    let names = param_names(scene.source_count());
    let n = j.nrows();
    // symmetric diagonal scaling before the eigen test
    let d: Vec<f64> = (0..n).map(|i| if j[(i, i)] > 0.0 { j[(i, i)].sqrt() } else { 1.0 }).collect();
    let scaled = DMatrix::from_fn(n, n, |a, b| j[(a, b)] / (d[a] * d[b]));
    let eig = SymmetricEigen::new(scaled);
    let max = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    let weak: Vec<usize> = (0..n).filter(|&i| !(eig.eigenvalues[i] > SINGULAR_TOL * max)).collect();
    if !weak.is_empty() {
        let directions = weak
            .iter()
            .map(|&i| {
                let v = eig.eigenvectors.column(i);
                let terms: Vec<String> = (0..n)
                    .filter(|&r| v[r].abs() > 0.1)
                    .map(|r| format!("{:+.3}*{}", v[r] / d[r], names[r]))
                    .collect();
                terms.join(" ")
            })
            .collect();
        return Err(Error::SingularFim { directions });
    }
    // J⁻¹ = D⁻¹ (scaled)⁻¹ D⁻¹
    let inv_scaled = eig.eigenvectors.clone()
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l))
        * eig.eigenvectors.transpose();
    let cov = DMatrix::from_fn(n, n, |a, b| inv_scaled[(a, b)] / (d[a] * d[b]));
    let bounds = (0..n).map(|i| cov[(i, i)].max(0.0)).collect();
    let attitude_components = scene
        .targets
        .iter()
        .enumerate()
        .map(|(m, t)| {
            let (e1, e2) = tangent_basis(t.attitude());
            let c = cov.fixed_view::<2, 2>(4 * m + 2, 4 * m + 2);
            [0, 1, 2].map(|p| {
                let b = [e1[p], e2[p]];
                (b[0] * b[0] * c[(0, 0)] + 2.0 * b[0] * b[1] * c[(0, 1)] + b[1] * b[1] * c[(1, 1)]).max(0.0)
            })
        })
        .collect();
    Ok(CrlbReport { names, bounds, attitude_components, fim: j })
}
