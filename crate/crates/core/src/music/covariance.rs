use super::PolarPair;
use crate::em::field::FieldSamples;
use crate::linalg::{CMat, SplitMat};

/// T × T equivalent covariance of one polarization pair.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivCov {
    pub pair: PolarPair,
    pub matrix: CMat,
}

/// conj(E_q) with column n scaled by A_n / T: the left factor of K_pq.
pub fn weighted_conjugate(field: &FieldSamples, q: usize) -> CMat {
    let t = field.snapshots() as f64;
    let g = field.grid();
    let mut b = field.axis(q).map(|v| v.conj());
    for (n, mut col) in b.column_iter_mut().enumerate() {
        let w = g.area_weight(n) / t;
        col.iter_mut().for_each(|v| *v *= w);
    }
    b
}

/// [K_pq]_{ij} = (1/T) Σ_n A_n conj(e_q(r_n, i)) e_p(r_n, j).
pub fn equivalent_covariance(field: &FieldSamples, pair: PolarPair) -> EquivCov {
    let b = SplitMat::from_cmat(&weighted_conjugate(field, pair.q.index()));
    let ept = SplitMat::from_cmat(&field.axis(pair.p.index()).transpose());
    EquivCov { pair, matrix: b.mul(&ept).to_cmat() }
}
