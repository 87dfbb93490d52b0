//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::em::grid::C64;
use crate::error::{Error, Result};
use crate::rng;

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Eigenpairs of a Hermitian matrix sorted by descending eigenvalue.
pub fn hermitian_eig(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    // symmetrize against roundoff
    let h = (a + a.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// Eigenpairs of a general complex matrix sorted by descending |λ|.
/// Eigenvectors have unit Euclidean norm.
pub fn general_eig(a: &CMat) -> Result<(Vec<C64>, CMat)> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::DimensionMismatch { expected: "square matrix".into(), actual: format!("{}x{}", n, a.ncols()) });
    }
    if n == 0 {
        return Ok((vec![], CMat::zeros(0, 0)));
    }
    let schur = nalgebra::Schur::try_new(a.clone(), 1e-15, 100 * n.max(10))
        .ok_or_else(|| Error::InvalidInput("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let lambda: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let tnorm = t.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * tnorm;
    // eigenvectors of the triangular factor by back-substitution
    let mut x = CMat::zeros(n, n);
    for k in 0..n {
        let lk = lambda[k];
        x[(k, k)] = C64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in i + 1..=k {
                s += t[(i, j)] * x[(j, k)];
            }
            let mut den = t[(i, i)] - lk;
            if den.norm() < small {
                den = C64::new(small, 0.0);
            }
            x[(i, k)] = -s / den;
        }
    }
    let mut v = &q * x;
    for mut c in v.column_iter_mut() {
        let nrm = c.norm();
        if nrm > 0.0 {
            c /= C64::new(nrm, 0.0);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| lambda[j].norm().total_cmp(&lambda[i].norm()));
    let vals = order.iter().map(|&i| lambda[i]).collect();
    let vecs = CMat::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok((vals, vecs))
}

/// W-weighted inner product Σ w_n conj(x_n) y_n (plain when `w` is None).
#[inline]
pub fn inner(x: &[C64], y: &[C64], w: Option<&[f64]>) -> C64 {
    match w {
        None => x.iter().zip(y).map(|(a, b)| a.conj() * b).sum(),
        Some(w) => x.iter().zip(y).zip(w).map(|((a, b), w)| a.conj() * b * *w).sum(),
    }
}

/// Orthonormalize the columns of `a` (modified Gram-Schmidt, two passes)
/// in the W-metric. Columns whose residual falls below `rel_tol` times the
/// largest input column norm are dropped.
pub fn orthonormalize(a: &CMat, w: Option<&[f64]>, rel_tol: f64) -> CMat {
    let nrm = |x: &[C64]| inner(x, x, w).re.max(0.0).sqrt();
    let scale = a.column_iter().map(|c| nrm(c.as_slice())).fold(0.0, f64::max);
    let mut basis: Vec<Vec<C64>> = Vec::new();
    if scale == 0.0 {
        return CMat::zeros(a.nrows(), 0);
    }
    for c in a.column_iter() {
        let mut v: Vec<C64> = c.iter().copied().collect();
        for _ in 0..2 {
            for b in &basis {
                let h = inner(b, &v, w);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= bi * h;
                }
            }
        }
        let r = nrm(&v);
        if r > rel_tol * scale {
            v.iter_mut().for_each(|x| *x /= r);
            basis.push(v);
        }
    }
    let n = a.nrows();
    CMat::from_fn(n, basis.len(), |r, c| basis[c][r])
}

/// Orthonormal basis of the orthogonal complement of span(q) (q orthonormal).
pub fn orthogonal_complement(q: &CMat) -> CMat {
    let n = q.nrows();
    let p = CMat::identity(n, n) - q * q.adjoint();
    let (vals, vecs) = hermitian_eig(&p);
    let keep: Vec<usize> = (0..n).filter(|&i| vals[i] > 0.5).collect();
    CMat::from_fn(n, keep.len(), |r, c| vecs[(r, keep[c])])
}

/// Sines of the principal angles between two equal-dimension subspaces,
/// descending. Inputs need not be orthonormal.
pub fn principal_angle_sines(a: &CMat, b: &CMat) -> Result<Vec<f64>> {
    let qa = orthonormalize(a, None, 1e-13);
    let qb = orthonormalize(b, None, 1e-13);
    if qa.ncols() != qb.ncols() {
        return Err(Error::DimensionMismatch {
            expected: format!("rank {}", qa.ncols()),
            actual: format!("rank {}", qb.ncols()),
        });
    }
    if qa.ncols() == 0 {
        return Ok(vec![]);
    }
    let resid = &qb - &qa * (qa.adjoint() * &qb);
    let svd = SVD::new(resid, false, false);
    let mut s: Vec<f64> = svd.singular_values.iter().map(|v| v.min(1.0)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Largest principal angle in radians.
pub fn max_principal_angle(a: &CMat, b: &CMat) -> Result<f64> {
    Ok(principal_angle_sines(a, b)?.first().map(|s| s.asin()).unwrap_or(0.0))
}

/// Dominant invariant subspace of a linear operator on ℂ^dim by block
/// subspace iteration with Rayleigh-Ritz extraction.
///
/// Returns the `want` Ritz values of largest magnitude and their Ritz
/// vectors. `op` maps a dim × b block to its image.
pub fn dominant_subspace(
    op: &dyn Fn(&CMat) -> CMat,
    dim: usize,
    want: usize,
    opts: &SubspaceIterOptions,
) -> Result<(Vec<C64>, CMat)> {
    let b = (want + opts.extra).min(dim);
    let mut r = rng::stream(opts.seed, &[rng::STREAM_SOLVER, dim as u64]);
    let mut q = CMat::from_fn(dim, b, |_, _| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)));
    q = orthonormalize(&q, None, 1e-12);
    let mut best: Option<(Vec<C64>, CMat)> = None;
    for it in 0..opts.max_iter {
        let z = op(&q);
        let h = q.adjoint() * &z;
        let (mu, y) = general_eig(&h)?;
        let ycut = y.columns(0, want.min(y.ncols())).into_owned();
        let ritz = &q * &ycut;
        let zy = &z * &ycut;
        let mut worst = 0.0f64;
        for i in 0..ycut.ncols() {
            let res = (zy.column(i) - ritz.column(i) * mu[i]).norm();
            worst = worst.max(res);
        }
        let scale = mu.first().map(|m| m.norm()).unwrap_or(0.0);
        let vals: Vec<C64> = mu.iter().take(want).copied().collect();
        best = Some((vals, ritz));
        if worst <= opts.tol * scale || scale == 0.0 {
            log::trace!("subspace iteration converged after {} sweeps", it + 1);
            break;
        }
        let next = orthonormalize(&z, None, 1e-14);
        if next.ncols() < want {
            // operator rank below the block size; the current Ritz pairs span its range
            break;
        }
        q = next;
        if it + 1 == opts.max_iter {
            log::debug!("subspace iteration stopped at {} sweeps, residual {:.2e}", opts.max_iter, worst / scale.max(f64::MIN_POSITIVE));
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no iterations performed".into()))
}

#[derive(Clone, Debug)]
pub struct SubspaceIterOptions {
    /// Oversampling beyond the wanted dimension.
    pub extra: usize,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SubspaceIterOptions {
    fn default() -> Self {
        SubspaceIterOptions { extra: 6, tol: 1e-10, max_iter: 60, seed: 0x5eed }
    }
}

/// Condition number σ_max/σ_min of a matrix.
pub fn condition_number(a: &CMat) -> f64 {
    let s = SVD::new(a.clone(), false, false).singular_values;
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}


/// Complex matrix stored as separate real and imaginary parts so that
/// products run through the real BLAS-like kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitMat {
    pub re: DMatrix<f64>,
    pub im: DMatrix<f64>,
}

impl SplitMat {
    pub fn from_cmat(a: &CMat) -> Self {
        SplitMat { re: a.map(|v| v.re), im: a.map(|v| v.im) }
    }

    pub fn to_cmat(&self) -> CMat {
        self.re.zip_map(&self.im, C64::new)
    }

    pub fn nrows(&self) -> usize {
        self.re.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.re.ncols()
    }

    /// self · rhs.
    pub fn mul(&self, rhs: &SplitMat) -> SplitMat {
        let mut re = &self.re * &rhs.re;
        re -= &self.im * &rhs.im;
        let mut im = &self.re * &rhs.im;
        im += &self.im * &rhs.re;
        SplitMat { re, im }
    }

    pub fn mul_c(&self, rhs: &CMat) -> CMat {
        self.mul(&SplitMat::from_cmat(rhs)).to_cmat()
    }
}

#[cfg(test)]
mod split_tests {
    use super::*;

    #[test]
    fn split_product_matches() {
        let mut r = rng::stream(1, &[]);
        let a = CMat::from_fn(5, 7, |_, _| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)));
        let b = CMat::from_fn(7, 3, |_, _| C64::new(r.sample(StandardNormal), r.sample(StandardNormal)));
        let got = SplitMat::from_cmat(&a).mul_c(&b);
        assert!((got - &a * &b).norm() < 1e-12);
    }
}
