use nalgebra::{DMatrix, SVD};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::em::field::FieldSamples;
use crate::em::geometry::{wave_vector, RealVec3};
use crate::em::grid::{NodeGrid, C64};
use crate::em::scene::ApertureConfig;
use crate::error::{Error, Result};
use crate::linalg::CMat;

/// Q(t): M × 3, [Q]_{ij} = ∫ a*(r, θ_i, φ_i) e_j(r, t) dr.
#[derive(Clone, Debug, PartialEq)]
pub struct QMatrix(pub CMat);

/// Real symmetric M × M Gram matrix of the steering functions.
#[derive(Clone, Debug, PartialEq)]
pub struct XiMatrix(pub DMatrix<f64>);

/// Γ̂(t) for t = 1..T, each M × 3.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct GammaSeries(pub Vec<CMat>);

impl GammaSeries {
    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
    pub fn sources(&self) -> usize {
        self.0.first().map(|g| g.nrows()).unwrap_or(0)
    }
}

fn directions(doas: &[(f64, f64)]) -> Vec<RealVec3> {
    doas.iter().map(|&(t, p)| *wave_vector(t, p).as_vec()).collect()
}

fn check_snapshot(field: &FieldSamples, t: usize) -> Result<()> {
    if t >= field.snapshots() {
        return Err(Error::IndexOutOfRange { index: t, len: field.snapshots() });
    }
    Ok(())
}

/// Conjugate steering rows weighted by node area: row i holds A_n a_i*(r_n).
pub fn weighted_steering_conj(grid: &NodeGrid, k: f64, doas: &[(f64, f64)]) -> CMat {
    let n = grid.len();
    let w = grid.area_weights();
    let mut out = CMat::zeros(doas.len(), n);
    let mut a = vec![C64::new(0.0, 0.0); n];
    for (i, d) in directions(doas).iter().enumerate() {
        grid.steering_into(k, d, &mut a);
        for c in 0..n {
            out[(i, c)] = a[c].conj() * w[c];
        }
    }
    out
}

/// Quadrature evaluation of Q(t).
pub fn q_matrix(field: &FieldSamples, doas: &[(f64, f64)], t: usize) -> Result<QMatrix> {
    check_snapshot(field, t)?;
    let wa = weighted_steering_conj(field.grid(), field.wavenumber(), doas);
    Ok(q_matrix_with(&wa, field, t))
}

/// Q(t) from precomputed weighted conjugate steering rows.
pub fn q_matrix_with(wa: &CMat, field: &FieldSamples, t: usize) -> QMatrix {
    let m = wa.nrows();
    let mut q = CMat::zeros(m, 3);
    for p in 0..3 {
        let e = field.axis(p).row(t);
        for i in 0..m {
            let mut acc = C64::new(0.0, 0.0);
            for (n, ev) in e.iter().enumerate() {
                acc += wa[(i, n)] * ev;
            }
            q[(i, p)] = acc;
        }
    }
    QMatrix(q)
}

/// Q for every snapshot at once: one M × T block per axis.
pub fn q_series(field: &FieldSamples, doas: &[(f64, f64)]) -> Vec<QMatrix> {
    let wa = weighted_steering_conj(field.grid(), field.wavenumber(), doas);
    let m = doas.len();
    let per_axis: Vec<CMat> = (0..3).map(|p| &wa * field.axis(p).transpose()).collect();
    (0..field.snapshots())
        .map(|t| QMatrix(CMat::from_fn(m, 3, |i, p| per_axis[p][(i, t)])))
        .collect()
}

/// Q(t) from a zero-padded 2-D FFT of the sampled field, read off at
/// frequency (−k d_x / 2π, −k d_y / 2π) by bilinear interpolation.
pub fn q_matrix_fft(field: &FieldSamples, doas: &[(f64, f64)], t: usize, nfft: usize) -> Result<QMatrix> {
    let grid = field.grid();
    if !grid.is_uniform() {
        return Err(Error::UnsupportedMode("the FFT path needs uniform aperture sampling".into()));
    }
    check_snapshot(field, t)?;
    let (nx, ny) = (grid.nx(), grid.ny());
    if !nfft.is_power_of_two() || nfft < nx.max(ny) {
        return Err(Error::InvalidInput(format!("FFT size {nfft} must be a power of two covering the {nx}x{ny} grid")));
    }
    let k = field.wavenumber();
    let (x0, y0) = (grid.xs()[0], grid.ys()[0]);
    let dx = if nx > 1 { grid.xs()[1] - x0 } else { grid.aperture().lx() };
    let dy = if ny > 1 { grid.ys()[1] - y0 } else { grid.aperture().ly() };
    let cell = grid.cell_scale();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(nfft);
    let dirs = directions(doas);
    let mut q = CMat::zeros(doas.len(), 3);
    let mut buf = vec![C64::new(0.0, 0.0); nfft * nfft];
    for p in 0..3 {
        buf.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let e = field.axis(p).row(t);
        for ix in 0..nx {
            for iy in 0..ny {
                buf[ix * nfft + iy] = e[ix * ny + iy];
            }
        }
        // rows (along y), then columns (along x)
        for ix in 0..nx {
            fft.process(&mut buf[ix * nfft..(ix + 1) * nfft]);
        }
        let mut col = vec![C64::new(0.0, 0.0); nfft];
        for iy in 0..nfft {
            for ix in 0..nfft {
                col[ix] = buf[ix * nfft + iy];
            }
            fft.process(&mut col);
            for ix in 0..nfft {
                buf[ix * nfft + iy] = col[ix];
            }
        }
        for (i, d) in dirs.iter().enumerate() {
            // F[u, v] = Σ f[ix, iy] e^{−j2π(u·ix + v·iy)/N}; the window integral needs e^{+jk(x d_x + y d_y)}
            let u = -k * dx * d.x * nfft as f64 / (2.0 * std::f64::consts::PI);
            let v = -k * dy * d.y * nfft as f64 / (2.0 * std::f64::consts::PI);
            let val = bilinear(&buf, nfft, u, v);
            let phase = C64::from_polar(1.0, k * (x0 * d.x + y0 * d.y));
            q[(i, p)] = val * phase * cell;
        }
    }
    Ok(QMatrix(q))
}

fn bilinear(buf: &[C64], n: usize, u: f64, v: f64) -> C64 {
    let nf = n as f64;
    let u = u.rem_euclid(nf);
    let v = v.rem_euclid(nf);
    let (u0, v0) = (u.floor(), v.floor());
    let (fu, fv) = (u - u0, v - v0);
    let (i0, j0) = (u0 as usize % n, v0 as usize % n);
    let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
    let at = |i: usize, j: usize| buf[i * n + j];
    at(i0, j0) * ((1.0 - fu) * (1.0 - fv)) + at(i1, j0) * (fu * (1.0 - fv)) + at(i0, j1) * ((1.0 - fu) * fv) + at(i1, j1) * (fu * fv)
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Closed form [Ξ]_{ij} = L_xL_y sinc(kΔd_x L_x/2) sinc(kΔd_y L_y/2).
pub fn xi_matrix(doas: &[(f64, f64)], aperture: &ApertureConfig) -> XiMatrix {
    let k = aperture.wavenumber();
    let d = directions(doas);
    let m = d.len();
    let mut xi = DMatrix::zeros(m, m);
    for i in 0..m {
        xi[(i, i)] = aperture.area();
        for j in i + 1..m {
            let dd = d[i] - d[j];
            let v = aperture.area() * sinc(k * dd.x * aperture.lx() / 2.0) * sinc(k * dd.y * aperture.ly() / 2.0);
            xi[(i, j)] = v;
            xi[(j, i)] = v;
        }
    }
    XiMatrix(xi)
}

/// Ξ evaluated with the same quadrature as Q, so that Ξ⁻¹Q is exact for
/// noiseless fields. Requires a grid symmetric about the aperture centre.
pub fn xi_matrix_quadrature(doas: &[(f64, f64)], grid: &NodeGrid) -> Result<XiMatrix> {
    let k = grid.aperture().wavenumber();
    let d = directions(doas);
    let m = d.len();
    let w = grid.area_weights();
    let mut xi = DMatrix::zeros(m, m);
    let mut a = vec![C64::new(0.0, 0.0); grid.len()];
    let mut b = vec![C64::new(0.0, 0.0); grid.len()];
    for i in 0..m {
        xi[(i, i)] = w.iter().sum::<f64>();
        grid.steering_into(k, &d[i], &mut a);
        for j in i + 1..m {
            grid.steering_into(k, &d[j], &mut b);
            let s: C64 = a.iter().zip(&b).zip(&w).map(|((x, y), w)| x.conj() * y * *w).sum();
            if s.im.abs() > 1e-9 * xi[(i, i)] {
                return Err(Error::UnsupportedMode("quadrature Gram matrix needs a centrally symmetric grid".into()));
            }
            xi[(i, j)] = s.re;
            xi[(j, i)] = s.re;
        }
    }
    Ok(XiMatrix(xi))
}

/// Γ̂ = Ξ⁻¹Q, refused when Ξ is too ill-conditioned.
pub fn estimate_gamma(q: &QMatrix, xi: &XiMatrix, max_condition: f64) -> Result<CMat> {
    let m = xi.0.nrows();
    if q.0.nrows() != m {
        return Err(Error::DimensionMismatch { expected: format!("{m} rows"), actual: format!("{} rows", q.0.nrows()) });
    }
    let condition = xi_condition(xi);
    if !(condition <= max_condition) {
        return Err(Error::SingularSystem { condition });
    }
    let lu = xi.0.clone().lu();
    let re = lu.solve(&q.0.map(|v| v.re)).ok_or(Error::SingularSystem { condition })?;
    let im = lu.solve(&q.0.map(|v| v.im)).ok_or(Error::SingularSystem { condition })?;
    Ok(re.zip_map(&im, C64::new))
}

pub fn xi_condition(xi: &XiMatrix) -> f64 {
    let s = SVD::new(xi.0.clone(), false, false).singular_values;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Which Ξ accompanies the quadrature Q.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiKind {
    #[default]
    Quadrature,
    ClosedForm,
}

/// How Q(t) is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QPath {
    #[default]
    Quadrature,
    Fft { size: usize },
}

/// Γ̂(t) for all snapshots.
pub fn gamma_series(field: &FieldSamples, doas: &[(f64, f64)], path: QPath, xi_kind: XiKind, max_condition: f64) -> Result<GammaSeries> {
    let xi = match xi_kind {
        XiKind::Quadrature => xi_matrix_quadrature(doas, field.grid())?,
        XiKind::ClosedForm => xi_matrix(doas, field.grid().aperture()),
    };
    let qs = match path {
        QPath::Quadrature => q_series(field, doas),
        QPath::Fft { size } => (0..field.snapshots()).map(|t| q_matrix_fft(field, doas, t, size)).collect::<Result<_>>()?,
    };
    qs.iter().map(|q| estimate_gamma(q, &xi, max_condition)).collect::<Result<Vec<_>>>().map(GammaSeries)
}
