use nalgebra::SVD;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use super::covariance::weighted_conjugate;
use super::PolarPair;
use crate::em::field::FieldSamples;
use crate::em::grid::C64;
use crate::error::{Error, Result};
use crate::linalg::{
    dominant_subspace, general_eig, hermitian_eig, inner, orthogonal_complement, orthonormalize, CMat, SplitMat,
    SubspaceIterOptions,
};

/// How the aperture-domain noise subspace is obtained from the T × T
/// eigenvectors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recovery {
    /// Map the M leading eigenvectors to the aperture (ū = E_pᵀu′) and take
    /// the orthogonal complement of their span.
    #[default]
    Complement,
    /// Map the T − M trailing eigenvectors through (conj(E_q)Ω)†.
    Pseudoinverse,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenSolver {
    /// Dense for short records, otherwise whichever of the two iterative
    /// forms works in the smaller dimension.
    #[default]
    Auto,
    /// Explicit T × T matrix and a full eigendecomposition.
    Dense,
    /// Subspace iteration on the T × T operator without forming it.
    Iterative,
    /// Subspace iteration on the node-domain matrix E_pᵀ conj(E_q)Ω / T,
    /// which shares the nonzero eigenvalues of K_pq.
    Reduced,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubspaceOptions {
    pub recovery: Recovery,
    /// Use the quadrature weights in the steering inner product.
    pub weighted: bool,
    pub solver: EigenSolver,
    /// Largest condition number accepted by the pseudoinverse recovery.
    pub max_condition: f64,
    /// Relative threshold below which mapped signal vectors count as zero.
    pub rank_tol: f64,
    pub dense_max_snapshots: usize,
}

impl Default for SubspaceOptions {
    fn default() -> Self {
        SubspaceOptions {
            recovery: Recovery::Complement,
            weighted: false,
            solver: EigenSolver::Auto,
            max_condition: 1e12,
            rank_tol: 1e-10,
            dense_max_snapshots: 96,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SubspaceKind {
    /// Noise space = complement of span(signal); `signal` is orthonormal in
    /// the metric.
    Complement { signal: CMat },
    /// Orthonormal noise basis.
    Explicit { basis: CMat },
}

/// Aperture-domain noise subspace of one polarization pair.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSubspace {
    pair: PolarPair,
    nodes: usize,
    kind: SubspaceKind,
    metric: Option<Arc<Vec<f64>>>,
    eigenvalues: Vec<C64>,
}

impl NoiseSubspace {
    pub fn from_signal(pair: PolarPair, signal: &CMat, metric: Option<Arc<Vec<f64>>>, rank_tol: f64, eigenvalues: Vec<C64>) -> Self {
        let s = orthonormalize(signal, metric.as_deref().map(|v| v.as_slice()), rank_tol);
        NoiseSubspace { pair, nodes: signal.nrows(), kind: SubspaceKind::Complement { signal: s }, metric, eigenvalues }
    }

    pub fn pair(&self) -> PolarPair {
        self.pair
    }
    pub fn nodes(&self) -> usize {
        self.nodes
    }
    pub fn kind(&self) -> &SubspaceKind {
        &self.kind
    }
    pub fn metric(&self) -> Option<&[f64]> {
        self.metric.as_deref().map(|v| v.as_slice())
    }
    /// Leading eigenvalues of K_pq (all of them for dense solves).
    pub fn eigenvalues(&self) -> &[C64] {
        &self.eigenvalues
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            SubspaceKind::Complement { signal } => self.nodes - signal.ncols(),
            SubspaceKind::Explicit { basis } => basis.ncols(),
        }
    }

    pub fn signal_rank(&self) -> usize {
        self.nodes - self.dim()
    }

    /// ‖ᾱᴴŪ₂‖ for an orthonormal noise basis Ū₂.
    pub fn projection_norm(&self, alpha: &[C64]) -> f64 {
        let w = self.metric();
        match &self.kind {
            SubspaceKind::Complement { signal } => {
                let mut r: Vec<C64> = alpha.to_vec();
                for c in signal.column_iter() {
                    let h = inner(c.as_slice(), alpha, w);
                    for (ri, ci) in r.iter_mut().zip(c.iter()) {
                        *ri -= ci * h;
                    }
                }
                inner(&r, &r, w).re.max(0.0).sqrt()
            }
            SubspaceKind::Explicit { basis } => basis
                .column_iter()
                .map(|c| inner(c.as_slice(), alpha, w).norm_sqr())
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Orthonormal noise basis, N × dim (metric-orthonormal when weighted).
    pub fn basis(&self) -> CMat {
        match &self.kind {
            SubspaceKind::Explicit { basis } => basis.clone(),
            SubspaceKind::Complement { signal } => match self.metric() {
                None => orthogonal_complement(signal),
                Some(w) => {
                    let d: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
                    let mut s = signal.clone();
                    for (i, mut row) in s.row_iter_mut().enumerate() {
                        row.iter_mut().for_each(|v| *v *= d[i]);
                    }
                    let mut c = orthogonal_complement(&s);
                    for (i, mut row) in c.row_iter_mut().enumerate() {
                        row.iter_mut().for_each(|v| *v /= d[i]);
                    }
                    c
                }
            },
        }
    }

    /// Columns G with coefficients Gᴴα, and whether the squared norm is
    /// ‖α‖² minus their energy (complement) or the energy itself.
    pub(crate) fn scan_columns(&self) -> (CMat, bool) {
        let (cols, complement) = match &self.kind {
            SubspaceKind::Complement { signal } => (signal.clone(), true),
            SubspaceKind::Explicit { basis } => (basis.clone(), false),
        };
        let mut g = cols;
        if let Some(w) = self.metric() {
            for (i, mut row) in g.row_iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v *= w[i]);
            }
        }
        (g, complement)
    }
}

/// Normalized quadrature weights (mean one), the metric of the weighted
/// spectrum.
pub fn spectrum_metric(field: &FieldSamples) -> Arc<Vec<f64>> {
    let g = field.grid();
    let n = g.len();
    let omega: Vec<f64> = (0..n).map(|i| g.omega(i)).collect();
    let total: f64 = omega.iter().sum();
    Arc::new(omega.iter().map(|w| w * n as f64 / total).collect())
}

/// Products shared by the nine pairs of one field.
pub struct PairFactors<'a> {
    field: &'a FieldSamples,
    ept: [SplitMat; 3],
    bq: [SplitMat; 3],
    metric: Option<Arc<Vec<f64>>>,
}

impl<'a> PairFactors<'a> {
    pub fn new(field: &'a FieldSamples, weighted: bool) -> Self {
        let ept = [0, 1, 2].map(|p| SplitMat::from_cmat(&field.axis(p).transpose()));
        let bq = [0, 1, 2].map(|q| SplitMat::from_cmat(&weighted_conjugate(field, q)));
        PairFactors { field, ept, bq, metric: weighted.then(|| spectrum_metric(field)) }
    }

    fn check(&self, m: usize) -> Result<()> {
        let t = self.field.snapshots();
        if m == 0 || m >= t {
            return Err(Error::EmptySubspace { sources: m, snapshots: t });
        }
        Ok(())
    }

    fn resolve(&self, opts: &SubspaceOptions) -> EigenSolver {
        let t = self.field.snapshots();
        let n = self.field.nodes();
        match opts.solver {
            EigenSolver::Auto if t <= opts.dense_max_snapshots => EigenSolver::Dense,
            EigenSolver::Auto if n < t => EigenSolver::Reduced,
            EigenSolver::Auto => EigenSolver::Iterative,
            s => s,
        }
    }

    pub fn noise_subspace(&self, pair: PolarPair, m: usize, opts: &SubspaceOptions) -> Result<NoiseSubspace> {
        self.check(m)?;
        let (p, q) = (pair.p.index(), pair.q.index());
        let solver = self.resolve(opts);
        if opts.recovery == Recovery::Pseudoinverse || solver == EigenSolver::Dense {
            let k = self.bq[q].mul(&self.ept[p]).to_cmat();
            return self.from_dense(pair, &k, m, opts);
        }
        let iter = SubspaceIterOptions::default();
        match solver {
            EigenSolver::Reduced => {
                let r = self.ept[p].mul(&self.bq[q]);
                let (vals, vecs) = dominant_subspace(&|v: &CMat| r.mul_c(v), self.field.nodes(), m, &iter)?;
                Ok(NoiseSubspace::from_signal(pair, &vecs, self.metric.clone(), opts.rank_tol, vals))
            }
            _ => {
                let (ep, bq) = (&self.ept[p], &self.bq[q]);
                let op = |v: &CMat| bq.mul(&ep.mul(&SplitMat::from_cmat(v))).to_cmat();
                let (vals, u) = dominant_subspace(&op, self.field.snapshots(), m, &iter)?;
                let signal = ep.mul_c(&u);
                Ok(NoiseSubspace::from_signal(pair, &signal, self.metric.clone(), opts.rank_tol, vals))
            }
        }
    }

    fn from_dense(&self, pair: PolarPair, k: &CMat, m: usize, opts: &SubspaceOptions) -> Result<NoiseSubspace> {
        let (p, q) = (pair.p.index(), pair.q.index());
        let (vals, vecs) = if pair.is_self() {
            let (v, u) = hermitian_eig(k);
            (v.into_iter().map(|x| C64::new(x, 0.0)).collect::<Vec<_>>(), u)
        } else {
            general_eig(k)?
        };
        let t = k.nrows();
        match opts.recovery {
            Recovery::Complement => {
                let u = vecs.columns(0, m).into_owned();
                let signal = self.ept[p].mul_c(&u);
                Ok(NoiseSubspace::from_signal(pair, &signal, self.metric.clone(), opts.rank_tol, vals))
            }
            Recovery::Pseudoinverse => {
                // B = conj(E_q) Ω, up to the 1/T factor which does not change its pseudoinverse's range
                let b = self.bq[q].to_cmat();
                let svd = SVD::new(b, true, true);
                let s = &svd.singular_values;
                let smax = s.iter().copied().fold(0.0, f64::max);
                let smin = s.iter().copied().fold(f64::INFINITY, f64::min);
                let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
                if !(condition <= opts.max_condition) {
                    return Err(Error::IllConditionedRecovery { condition });
                }
                let uu = svd.u.as_ref().expect("requested U");
                let vt = svd.v_t.as_ref().expect("requested Vᴴ");
                let noise = vecs.columns(m, t - m).into_owned();
                let mut coef = uu.adjoint() * noise;
                for (i, mut row) in coef.row_iter_mut().enumerate() {
                    let inv = 1.0 / s[i];
                    row.iter_mut().for_each(|v| *v *= inv);
                }
                let raw = vt.adjoint() * coef;
                let w = self.metric.as_deref().map(|v| v.as_slice());
                let basis = orthonormalize(&raw, w, 1e-10);
                Ok(NoiseSubspace {
                    pair,
                    nodes: self.field.nodes(),
                    kind: SubspaceKind::Explicit { basis },
                    metric: self.metric.clone(),
                    eigenvalues: vals,
                })
            }
        }
    }
}

/// Noise subspace of one pair from an explicit equivalent covariance.
pub fn subspace_split(cov: &super::EquivCov, field: &FieldSamples, m: usize, opts: &SubspaceOptions) -> Result<NoiseSubspace> {
    let f = PairFactors::new(field, opts.weighted);
    f.check(m)?;
    if cov.matrix.nrows() != field.snapshots() {
        return Err(Error::DimensionMismatch {
            expected: format!("{0}x{0}", field.snapshots()),
            actual: format!("{}x{}", cov.matrix.nrows(), cov.matrix.ncols()),
        });
    }
    f.from_dense(cov.pair, &cov.matrix, m, opts)
}

pub fn noise_subspace(field: &FieldSamples, pair: PolarPair, m: usize, opts: &SubspaceOptions) -> Result<NoiseSubspace> {
    PairFactors::new(field, opts.weighted).noise_subspace(pair, m, opts)
}

/// Noise subspaces of several pairs sharing one set of products.
pub fn noise_subspaces(field: &FieldSamples, pairs: &[PolarPair], m: usize, opts: &SubspaceOptions) -> Result<Vec<NoiseSubspace>> {
    let f = PairFactors::new(field, opts.weighted);
    pairs.iter().map(|&pair| f.noise_subspace(pair, m, opts)).collect()
}
