use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::sync::Arc;

use super::subspace::{noise_subspaces, NoiseSubspace, SubspaceOptions};
use super::PolarPair;
use crate::em::field::FieldSamples;
use crate::em::geometry::{wave_vector, RealVec3};
use crate::em::grid::{NodeGrid, C64};
use crate::error::{Error, Result};
use crate::linalg::SplitMat;

/// Factor used in place of 1 + 1/‖ᾱᴴŪ₂‖ when the projection is exactly zero.
pub const EXACT_NULL_FACTOR: f64 = 1e15;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumValue {
    pub value: f64,
    /// At least one factor hit an exactly zero projection.
    pub exact_null: bool,
}

/// Π (1 + 1/n_i) over projection norms n_i.
pub fn spectrum_from_norms(norms: impl IntoIterator<Item = f64>) -> SpectrumValue {
    let mut value = 1.0;
    let mut exact_null = false;
    for n in norms {
        if n > 0.0 {
            value *= (1.0 + 1.0 / n).min(EXACT_NULL_FACTOR);
        } else {
            value *= EXACT_NULL_FACTOR;
            exact_null = true;
        }
    }
    SpectrumValue { value, exact_null }
}

/// Spectrum at steering vector ᾱ over the given noise subspaces.
pub fn spectrum_value(alpha: &[C64], subspaces: &[NoiseSubspace]) -> Result<SpectrumValue> {
    if subspaces.is_empty() {
        return Err(Error::InvalidInput("spectrum needs at least one noise subspace".into()));
    }
    for s in subspaces {
        if s.nodes() != alpha.len() {
            return Err(Error::DimensionMismatch { expected: format!("{}", s.nodes()), actual: format!("{}", alpha.len()) });
        }
    }
    Ok(spectrum_from_norms(subspaces.iter().map(|s| s.projection_norm(alpha))))
}

/// Coarse search lattice. Angles in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    pub theta_min: f64,
    pub theta_max: f64,
    pub phi_min: f64,
    pub phi_max: f64,
    pub step: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { theta_min: -PI, theta_max: PI, phi_min: 0.0, phi_max: FRAC_PI_2, step: 1f64.to_radians() }
    }
}

impl GridSpec {
    pub fn with_step(step: f64) -> Self {
        GridSpec { step, ..Default::default() }
    }

    /// True when the azimuth range closes on itself.
    pub fn wraps(&self) -> bool {
        self.theta_max - self.theta_min >= 2.0 * PI - 1e-9
    }

    fn count(span: f64, step: f64) -> usize {
        (span / step + 1e-9).floor() as usize
    }

    pub fn thetas(&self) -> Vec<f64> {
        let n = Self::count(self.theta_max - self.theta_min, self.step);
        if self.wraps() {
            // drop θ_min, which coincides with θ_max
            (1..=n).map(|i| self.theta_min + i as f64 * self.step).collect()
        } else {
            (0..=n).map(|i| self.theta_min + i as f64 * self.step).collect()
        }
    }

    pub fn phis(&self) -> Vec<f64> {
        let n = Self::count(self.phi_max - self.phi_min, self.step);
        (0..=n).map(|j| self.phi_min + j as f64 * self.step).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.step > 0.0
            && self.step.is_finite()
            && self.theta_max > self.theta_min
            && self.phi_max >= self.phi_min
            && self.phi_min >= -FRAC_PI_2 - 1e-12
            && self.phi_max <= FRAC_PI_2 + 1e-12;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid spectrum grid {self:?}")))
        }
    }
}

/// Spectrum sampled on a (θ, φ) lattice, φ-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub thetas: Vec<f64>,
    pub phis: Vec<f64>,
    pub values: Vec<f64>,
    pub wraps: bool,
    pub exact_nulls: usize,
}

impl SpectrumGrid {
    #[inline]
    pub fn value(&self, i_theta: usize, j_phi: usize) -> f64 {
        self.values[j_phi * self.thetas.len() + i_theta]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::MIN, f64::max)
    }

    pub fn median(&self) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n == 0 {
            return f64::NAN;
        }
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// Copy scaled so that the peak equals one.
    pub fn normalized(&self) -> SpectrumGrid {
        let m = self.max();
        SpectrumGrid { values: self.values.iter().map(|v| v / m).collect(), ..self.clone() }
    }

    /// CSV with columns theta, phi, value, normalized.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Serialization(e.to_string());
        let mut w = std::io::BufWriter::new(w);
        let m = self.max();
        writeln!(w, "theta,phi,value,normalized").map_err(io)?;
        for (j, phi) in self.phis.iter().enumerate() {
            for (i, theta) in self.thetas.iter().enumerate() {
                let v = self.value(i, j);
                writeln!(w, "{theta:.12e},{phi:.12e},{v:.12e},{:.12e}", v / m).map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// Noise subspaces bound to the sampling grid, ready for evaluation.
#[derive(Clone, Debug)]
pub struct MusicEngine {
    grid: Arc<NodeGrid>,
    k: f64,
    subspaces: Vec<NoiseSubspace>,
    kernel: ScanKernel,
}

#[derive(Clone, Debug)]
struct ScanKernel {
    /// Rows c·Kx + ix, columns iy: conj of coefficient column c reshaped.
    stacked: SplitMat,
    /// Column ranges per subspace.
    ranges: Vec<(usize, usize, bool)>,
    alpha_norm2: f64,
}

impl ScanKernel {
    fn new(grid: &NodeGrid, subspaces: &[NoiseSubspace]) -> Self {
        let kx = grid.nx();
        let ky = grid.ny();
        let mut cols: Vec<Vec<C64>> = Vec::new();
        let mut ranges = Vec::new();
        for s in subspaces {
            let (g, complement) = s.scan_columns();
            let start = cols.len();
            for c in g.column_iter() {
                cols.push(c.iter().map(|v| v.conj()).collect());
            }
            ranges.push((start, cols.len(), complement));
        }
        let total = cols.len();
        let mut re = DMatrix::zeros(total * kx, ky);
        let mut im = DMatrix::zeros(total * kx, ky);
        for (c, col) in cols.iter().enumerate() {
            for ix in 0..kx {
                for iy in 0..ky {
                    let v = col[ix * ky + iy];
                    re[(c * kx + ix, iy)] = v.re;
                    im[(c * kx + ix, iy)] = v.im;
                }
            }
        }
        ScanKernel { stacked: SplitMat { re, im }, ranges, alpha_norm2: grid.len() as f64 }
    }
}

impl MusicEngine {
    pub fn new(grid: Arc<NodeGrid>, k: f64, subspaces: Vec<NoiseSubspace>) -> Result<Self> {
        if subspaces.is_empty() {
            return Err(Error::InvalidInput("spectrum needs at least one noise subspace".into()));
        }
        if let Some(s) = subspaces.iter().find(|s| s.nodes() != grid.len()) {
            return Err(Error::DimensionMismatch { expected: format!("{}", grid.len()), actual: format!("{}", s.nodes()) });
        }
        let kernel = ScanKernel::new(&grid, &subspaces);
        Ok(MusicEngine { grid, k, subspaces, kernel })
    }

    pub fn from_field(field: &FieldSamples, m: usize, pairs: &[PolarPair], opts: &SubspaceOptions) -> Result<Self> {
        let subspaces = noise_subspaces(field, pairs, m, opts)?;
        Self::new(field.grid_arc().clone(), field.wavenumber(), subspaces)
    }

    /// All nine polarization pairs.
    pub fn tri_polarized(field: &FieldSamples, m: usize, opts: &SubspaceOptions) -> Result<Self> {
        Self::from_field(field, m, &PolarPair::all(), opts)
    }

    pub fn subspaces(&self) -> &[NoiseSubspace] {
        &self.subspaces
    }
    pub fn grid(&self) -> &NodeGrid {
        &self.grid
    }
    pub fn factors(&self) -> usize {
        self.subspaces.len()
    }

    pub fn steering(&self, d: &RealVec3) -> Vec<C64> {
        let mut a = vec![C64::new(0.0, 0.0); self.grid.len()];
        self.grid.steering_into(self.k, d, &mut a);
        a
    }

    pub fn evaluate_direction(&self, d: &RealVec3) -> SpectrumValue {
        let a = self.steering(d);
        spectrum_from_norms(self.subspaces.iter().map(|s| s.projection_norm(&a)))
    }

    pub fn evaluate(&self, theta: f64, phi: f64) -> SpectrumValue {
        self.evaluate_direction(wave_vector(theta, phi).as_vec())
    }

    /// Per-factor projection norms at a direction.
    pub fn projection_norms(&self, theta: f64, phi: f64) -> Vec<f64> {
        let a = self.steering(wave_vector(theta, phi).as_vec());
        self.subspaces.iter().map(|s| s.projection_norm(&a)).collect()
    }

    /// Evaluate over a lattice, one elevation row at a time.
    pub fn scan(&self, spec: &GridSpec) -> Result<SpectrumGrid> {
        spec.validate()?;
        let thetas = spec.thetas();
        let phis = spec.phis();
        let kx = self.grid.nx();
        let ky = self.grid.ny();
        let np = thetas.len();
        let mut values = Vec::with_capacity(np * phis.len());
        let mut exact_nulls = 0;
        let ker = &self.kernel;
        let total = ker.ranges.last().map(|r| r.1).unwrap_or(0);
        for &phi in &phis {
            let mut px = SplitMat { re: DMatrix::zeros(kx, np), im: DMatrix::zeros(kx, np) };
            let mut py = SplitMat { re: DMatrix::zeros(ky, np), im: DMatrix::zeros(ky, np) };
            let cp = phi.cos();
            for (i, &theta) in thetas.iter().enumerate() {
                let (st, ct) = theta.sin_cos();
                let (dx, dy) = (ct * cp, st * cp);
                for (ix, x) in self.grid.xs().iter().enumerate() {
                    let (s, c) = (-self.k * x * dx).sin_cos();
                    px.re[(ix, i)] = c;
                    px.im[(ix, i)] = s;
                }
                for (iy, y) in self.grid.ys().iter().enumerate() {
                    let (s, c) = (-self.k * y * dy).sin_cos();
                    py.re[(iy, i)] = c;
                    py.im[(iy, i)] = s;
                }
            }
            let m = ker.stacked.mul(&py);
            for i in 0..np {
                let mut coef2 = vec![0.0; total];
                for (c, e) in coef2.iter_mut().enumerate() {
                    let mut acc = C64::new(0.0, 0.0);
                    for ix in 0..kx {
                        let r = c * kx + ix;
                        let a = C64::new(px.re[(ix, i)], px.im[(ix, i)]);
                        acc += a * C64::new(m.re[(r, i)], m.im[(r, i)]);
                    }
                    *e = acc.norm_sqr();
                }
                let mut exact: Option<Vec<C64>> = None;
                let norms = ker.ranges.iter().enumerate().map(|(si, &(a, b, complement))| {
                    let energy: f64 = coef2[a..b].iter().sum();
                    if complement {
                        let r2 = ker.alpha_norm2 - energy;
                        if r2 < 1e-8 * ker.alpha_norm2 {
                            // cancellation: evaluate the residual directly
                            let alpha = exact.get_or_insert_with(|| self.steering(wave_vector(thetas[i], phi).as_vec()));
                            self.subspaces[si].projection_norm(alpha)
                        } else {
                            r2.sqrt()
                        }
                    } else {
                        energy.sqrt()
                    }
                });
                let v = spectrum_from_norms(norms.collect::<Vec<_>>());
                if v.exact_null {
                    exact_nulls += 1;
                }
                values.push(v.value);
            }
        }
        Ok(SpectrumGrid { thetas, phis, values, wraps: spec.wraps(), exact_nulls })
    }
}

impl MusicEngine {
    /// Full width in θ where the spectrum falls halfway from the peak to
    /// `baseline`, along the elevation cut through (theta, phi). A zero
    /// baseline gives the plain half-power width. `None` if the level is
    /// not reached within `max_span` on either side.
    pub fn half_power_width(&self, theta: f64, phi: f64, baseline: f64, max_span: f64) -> Option<f64> {
        let peak = self.evaluate(theta, phi).value;
        let half = baseline + 0.5 * (peak - baseline);
        let side = |sign: f64| -> Option<f64> {
            let f = |d: f64| self.evaluate(theta + sign * d, phi).value - half;
            let mut lo = 0.0;
            let mut hi = 1e-5;
            while f(hi) > 0.0 {
                lo = hi;
                hi *= 1.5;
                if hi > max_span {
                    return None;
                }
            }
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if f(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-9 {
                    break;
                }
            }
            Some(0.5 * (lo + hi))
        };
        Some(side(1.0)? + side(-1.0)?)
    }
}

/// Tri-polarized spectrum of a field on a lattice.
pub fn scan_spectrum(field: &FieldSamples, m: usize, spec: &GridSpec, opts: &SubspaceOptions) -> Result<SpectrumGrid> {
    MusicEngine::tri_polarized(field, m, opts)?.scan(spec)
}
