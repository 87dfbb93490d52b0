use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use super::geometry::{RealVec3, UnitVec3};
use super::quadrature::QuadratureRule;
use super::scene::ApertureConfig;
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// How the aperture is sampled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GridKind {
    GaussLegendre { order: usize },
    /// Midpoint rule on an nx × ny lattice of equal cells.
    Uniform { nx: usize, ny: usize },
    /// Pointwise elements of a discrete array; `effective_area` is the
    /// area each element stands for when converting field noise.
    Discrete { spacing: f64, effective_area: f64 },
}

/// Tensor-product sample set over the aperture plane.
///
/// Node n corresponds to (ix, iy) with n = ix·ny + iy. The area associated
/// with node n is `cell_scale · ωx[ix] · ωy[iy]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeGrid {
    kind: GridKind,
    aperture: ApertureConfig,
    xs: Vec<f64>,
    ys: Vec<f64>,
    omega_x: Vec<f64>,
    omega_y: Vec<f64>,
    cell_scale: f64,
}

pub fn build_node_grid(aperture: &ApertureConfig, rule: &QuadratureRule) -> NodeGrid {
    let hx = aperture.lx() / 2.0;
    let hy = aperture.ly() / 2.0;
    NodeGrid {
        kind: GridKind::GaussLegendre { order: rule.order() },
        aperture: *aperture,
        xs: rule.nodes().iter().map(|t| t * hx).collect(),
        ys: rule.nodes().iter().map(|t| t * hy).collect(),
        omega_x: rule.weights().to_vec(),
        omega_y: rule.weights().to_vec(),
        cell_scale: aperture.area() / 4.0,
    }
}

pub fn uniform_grid(aperture: &ApertureConfig, nx: usize, ny: usize) -> Result<NodeGrid> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidInput("uniform grid needs at least one cell per axis".into()));
    }
    let dx = aperture.lx() / nx as f64;
    let dy = aperture.ly() / ny as f64;
    Ok(NodeGrid {
        kind: GridKind::Uniform { nx, ny },
        aperture: *aperture,
        xs: (0..nx).map(|i| -aperture.lx() / 2.0 + (i as f64 + 0.5) * dx).collect(),
        ys: (0..ny).map(|i| -aperture.ly() / 2.0 + (i as f64 + 0.5) * dy).collect(),
        omega_x: vec![1.0; nx],
        omega_y: vec![1.0; ny],
        cell_scale: dx * dy,
    })
}

/// Discrete lattice with explicit per-axis coordinates.
pub fn discrete_grid(aperture: &ApertureConfig, xs: Vec<f64>, ys: Vec<f64>, spacing: f64, effective_area: f64) -> NodeGrid {
    let nx = xs.len();
    let ny = ys.len();
    NodeGrid {
        kind: GridKind::Discrete { spacing, effective_area },
        aperture: *aperture,
        xs,
        ys,
        omega_x: vec![1.0; nx],
        omega_y: vec![1.0; ny],
        cell_scale: effective_area,
    }
}

impl NodeGrid {
    pub fn kind(&self) -> &GridKind {
        &self.kind
    }
    pub fn aperture(&self) -> &ApertureConfig {
        &self.aperture
    }
    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn nx(&self) -> usize {
        self.xs.len()
    }
    pub fn ny(&self) -> usize {
        self.ys.len()
    }
    pub fn xs(&self) -> &[f64] {
        &self.xs
    }
    pub fn ys(&self) -> &[f64] {
        &self.ys
    }
    pub fn cell_scale(&self) -> f64 {
        self.cell_scale
    }
    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, GridKind::Uniform { .. })
    }

    #[inline]
    pub fn split_index(&self, n: usize) -> (usize, usize) {
        (n / self.ys.len(), n % self.ys.len())
    }

    pub fn position(&self, n: usize) -> RealVec3 {
        let (ix, iy) = self.split_index(n);
        RealVec3::new(self.xs[ix], self.ys[iy], 0.0)
    }

    /// Dimensionless combined weight ωx·ωy.
    pub fn omega(&self, n: usize) -> f64 {
        let (ix, iy) = self.split_index(n);
        self.omega_x[ix] * self.omega_y[iy]
    }

    /// Aperture area represented by node n.
    pub fn area_weight(&self, n: usize) -> f64 {
        self.cell_scale * self.omega(n)
    }

    pub fn area_weights(&self) -> Vec<f64> {
        (0..self.len()).map(|n| self.area_weight(n)).collect()
    }

    /// Σ_n A_n f(r_n): the aperture integral for quadrature grids.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (ix, &x) in self.xs.iter().enumerate() {
            for (iy, &y) in self.ys.iter().enumerate() {
                acc += self.omega_x[ix] * self.omega_y[iy] * f(x, y);
            }
        }
        acc * self.cell_scale
    }

    /// Per-axis phasors e^{−jk x d_x} and e^{−jk y d_y}.
    pub fn axis_phasors(&self, k: f64, d: &RealVec3) -> (Vec<C64>, Vec<C64>) {
        let px = self.xs.iter().map(|x| C64::from_polar(1.0, -k * x * d.x)).collect();
        let py = self.ys.iter().map(|y| C64::from_polar(1.0, -k * y * d.y)).collect();
        (px, py)
    }

    /// Steering samples e^{−jk rᵀd} written into `out` (length K²).
    pub fn steering_into(&self, k: f64, d: &RealVec3, out: &mut [C64]) {
        let (px, py) = self.axis_phasors(k, d);
        let ny = self.ys.len();
        for (ix, a) in px.iter().enumerate() {
            for (iy, b) in py.iter().enumerate() {
                out[ix * ny + iy] = a * b;
            }
        }
    }

    pub fn steering(&self, k: f64, d: &UnitVec3) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        self.steering_into(k, d.as_vec(), &mut out);
        out
    }

    /// Element-wise steering without separable factoring; used as an oracle.
    pub fn steering_direct(&self, k: f64, d: &RealVec3) -> Vec<C64> {
        (0..self.len()).map(|n| C64::from_polar(1.0, -k * self.position(n).dot(d))).collect()
    }
}

/// ᾱ(θ, φ) on the grid.
pub fn steering_sample(grid: &NodeGrid, theta: f64, phi: f64) -> Vec<C64> {
    let d = super::geometry::wave_vector(theta, phi);
    grid.steering(grid.aperture().wavenumber(), &d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::quadrature::gauss_legendre_rule;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn ap(side: f64) -> ApertureConfig {
        ApertureConfig::square(side, 0.1).unwrap()
    }

    #[test]
    fn single_node_grid() {
        let g = build_node_grid(&ap(2.0), &gauss_legendre_rule(1).unwrap());
        assert_eq!(g.len(), 1);
        assert_eq!(g.position(0), RealVec3::zeros());
        assert_relative_eq!(g.integrate(|_, _| 1.0), 4.0, max_relative = 1e-15);
    }

    #[test]
    fn sixteen_node_grid() {
        let g = build_node_grid(&ap(2.0), &gauss_legendre_rule(16).unwrap());
        assert_eq!(g.len(), 256);
        assert_relative_eq!(g.integrate(|_, _| 1.0), 4.0, max_relative = 1e-10);
        for n in 0..g.len() {
            let r = g.position(n);
            assert!(r.x.abs() < 1.0 && r.y.abs() < 1.0);
            assert!(g.omega(n) > 0.0);
        }
        // node ordering: n = kx·K + ky
        assert_eq!(g.position(1).x, g.position(0).x);
        assert!(g.position(1).y > g.position(0).y);
    }

    #[test]
    fn cosine_against_riemann_sum() {
        let a = ApertureConfig::new(2.0, 1.5, 0.1, 1.0).unwrap();
        let g = build_node_grid(&a, &gauss_legendre_rule(16).unwrap());
        let f = |x: f64, _y: f64| (PI * x / a.lx()).cos();
        let got = g.integrate(f);
        // 10^6-point midpoint sum; the integrand depends on x only, so the y
        // sum is exact and the x sum has error ~ (π h / L)²/24.
        let n = 1000;
        let dx = a.lx() / n as f64;
        let dy = a.ly() / n as f64;
        let mut riemann = 0.0;
        for i in 0..n {
            let x = -a.lx() / 2.0 + (i as f64 + 0.5) * dx;
            for j in 0..n {
                let y = -a.ly() / 2.0 + (j as f64 + 0.5) * dy;
                riemann += f(x, y);
            }
        }
        riemann *= dx * dy;
        assert_relative_eq!(got, riemann, max_relative = 1e-6);
        // closed form: L_y · 2L_x/π
        assert_relative_eq!(got, a.ly() * 2.0 * a.lx() / PI, max_relative = 1e-12);
        // Richardson-corrected Riemann sum reaches the 1e-8 level
        let corrected = riemann / (1.0 + (PI * dx / a.lx()).powi(2) / 24.0);
        assert_relative_eq!(got, corrected, max_relative = 1e-8);
    }

    #[test]
    fn steering_examples() {
        let g = build_node_grid(&ap(2.0), &gauss_legendre_rule(5).unwrap());
        let a = steering_sample(&g, 0.3, PI / 2.0);
        for v in &a {
            assert_relative_eq!(v.re, 1.0, max_relative = 1e-12);
        }
        let norm2: f64 = steering_sample(&g, 0.4, 0.2).iter().map(|c| c.norm_sqr()).sum();
        assert_relative_eq!(norm2, 25.0, max_relative = 1e-12);
        let d = RealVec3::new(0.2, -0.5, 0.8).normalize();
        let sep = g.steering(g.aperture().wavenumber(), &UnitVec3::normalize(d).unwrap());
        let direct = g.steering_direct(g.aperture().wavenumber(), &d);
        for (a, b) in sep.iter().zip(&direct) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn half_wavelength_phase() {
        let g = discrete_grid(&ap(2.0), vec![0.05], vec![0.0], 0.05, 1.0);
        let a = steering_sample(&g, 0.0, 0.0);
        assert!((a[0] - C64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn uniform_grid_area() {
        let g = uniform_grid(&ap(2.0), 8, 8).unwrap();
        assert_relative_eq!(g.integrate(|_, _| 1.0), 4.0, max_relative = 1e-14);
        assert!(uniform_grid(&ap(2.0), 0, 8).is_err());
    }
}
