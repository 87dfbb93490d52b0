use nalgebra::{DMatrix, DVector, SVD};
use serde::{Deserialize, Serialize};

use super::reconstruct::{gamma_series, GammaSeries, QPath, XiKind};
use crate::em::field::{FieldSamples, SnapshotSeries};
use crate::em::geometry::{angle_between, transverse_projector, wave_vector, RealVec3, UnitVec3};
use crate::em::grid::C64;
use crate::error::{Error, Result};

/// 3 × 2T real matrix [Re γ(1), Im γ(1), Re γ(2), ...].
#[derive(Clone, Debug, PartialEq)]
pub struct GMatrix(pub DMatrix<f64>);

/// ξ = [Re s(1), Im s(1), Re s(2), ...].
#[derive(Clone, Debug, PartialEq)]
pub struct RealizedSnapshots(pub DVector<f64>);

impl RealizedSnapshots {
    pub fn from_signals(s: &[C64]) -> Self {
        RealizedSnapshots(DVector::from_iterator(2 * s.len(), s.iter().flat_map(|v| [v.re, v.im])))
    }

    /// Row m of a snapshot series.
    pub fn for_target(series: &SnapshotSeries, m: usize) -> Result<Self> {
        if m >= series.sources() {
            return Err(Error::IndexOutOfRange { index: m, len: series.sources() });
        }
        let row: Vec<C64> = series.signals.row(m).iter().copied().collect();
        Ok(Self::from_signals(&row))
    }
}

pub fn assemble_gm(gammas: &GammaSeries, m: usize) -> Result<GMatrix> {
    let sources = gammas.sources();
    if m >= sources {
        return Err(Error::IndexOutOfRange { index: m, len: sources });
    }
    let t = gammas.len();
    let mut g = DMatrix::zeros(3, 2 * t);
    for (i, gam) in gammas.0.iter().enumerate() {
        for p in 0..3 {
            g[(p, 2 * i)] = gam[(m, p)].re;
            g[(p, 2 * i + 1)] = gam[(m, p)].im;
        }
    }
    Ok(GMatrix(g))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttitudeMode {
    Blind,
    Known,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AttitudeEstimate {
    /// Only the direction transverse to propagation is identifiable:
    /// q = κ₁ u⊥ + κ₂ z with κ₁² + κ₂² = 1 and κ₁, κ₂ free.
    Blind { perpendicular: UnitVec3, propagation: UnitVec3, sign_ambiguous: bool, family: String },
    /// Two candidates mirrored through the plane perpendicular to z.
    Known {
        perpendicular: RealVec3,
        parallel_magnitude: f64,
        candidates: [UnitVec3; 2],
        propagation: UnitVec3,
        /// ‖q̂⊥‖ exceeded one and the parallel magnitude was clamped to zero.
        clamped: bool,
    },
}

impl AttitudeEstimate {
    pub fn mode(&self) -> AttitudeMode {
        match self {
            AttitudeEstimate::Blind { .. } => AttitudeMode::Blind,
            AttitudeEstimate::Known { .. } => AttitudeMode::Known,
        }
    }

    /// Angular error(s) against a true attitude: (best, worst). In blind
    /// mode both are the error of ±u⊥ against the true transverse direction.
    pub fn angular_errors(&self, truth: &UnitVec3) -> Option<(f64, f64)> {
        match self {
            AttitudeEstimate::Blind { perpendicular, propagation, .. } => {
                let v = transverse_projector(propagation) * truth.as_vec();
                if v.norm() == 0.0 {
                    return None;
                }
                let a = angle_between(perpendicular.as_vec(), &v);
                let e = a.min(std::f64::consts::PI - a);
                Some((e, e))
            }
            AttitudeEstimate::Known { candidates, .. } => {
                let a = candidates[0].angle_to(truth);
                let b = candidates[1].angle_to(truth);
                Some((a.min(b), a.max(b)))
            }
        }
    }
}

const FAMILY: &str = "q = k1*u_perp + k2*z, k1^2 + k2^2 = 1";

/// Dominant left singular direction of (I − zzᵀ)G.
pub fn estimate_attitude_blind(g: &GMatrix, z: &UnitVec3) -> Result<AttitudeEstimate> {
    let pg = transverse_projector(z) * &g.0;
    let total = g.0.norm();
    if total == 0.0 || !(pg.norm() > 1e-10 * total) {
        return Err(Error::UnidentifiableAttitude);
    }
    let svd = SVD::new(pg, true, false);
    let u = svd.u.as_ref().expect("requested U");
    let best = (0..svd.singular_values.len()).max_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b])).unwrap();
    let mut v = RealVec3::new(u[(0, best)], u[(1, best)], u[(2, best)]);
    // strip roundoff along z, then fix the sign
    v -= z.as_vec() * z.as_vec().dot(&v);
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-12) {
        if *first < 0.0 {
            v = -v;
        }
    }
    Ok(AttitudeEstimate::Blind {
        perpendicular: UnitVec3::normalize(v)?,
        propagation: *z,
        sign_ambiguous: true,
        family: FAMILY.into(),
    })
}

/// Closed-form attitude with known snapshots.
///
/// `tolerance` is how far ‖q̂⊥‖ may exceed one before the estimate is
/// rejected; within it the parallel magnitude is clamped to zero.
pub fn estimate_attitude_known(g: &GMatrix, xi: &RealizedSnapshots, z: &UnitVec3, tolerance: f64) -> Result<AttitudeEstimate> {
    if g.0.ncols() != xi.0.len() {
        return Err(Error::DimensionMismatch { expected: format!("{}", g.0.ncols()), actual: format!("{}", xi.0.len()) });
    }
    let e = xi.0.norm_squared();
    if e == 0.0 {
        return Err(Error::ZeroSnapshots);
    }
    let gx = &g.0 * &xi.0;
    let mut perp = transverse_projector(z) * RealVec3::new(gx[0], gx[1], gx[2]) / e;
    perp -= z.as_vec() * z.as_vec().dot(&perp);
    let n = perp.norm();
    if n > 1.0 + tolerance {
        return Err(Error::InconsistentAttitude { norm: n });
    }
    let clamped = n > 1.0;
    if clamped {
        perp /= n;
    }
    let mag = if clamped { 0.0 } else { (1.0 - perp.norm_squared()).max(0.0).sqrt() };
    let zv = z.as_vec();
    let plus = UnitVec3::normalize(perp + zv * mag)?;
    let minus = UnitVec3::normalize(perp - zv * mag)?;
    Ok(AttitudeEstimate::Known { perpendicular: perp, parallel_magnitude: mag, candidates: [plus, minus], propagation: *z, clamped })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttitudeOptions {
    pub q_path: QPath,
    pub xi: XiKind,
    /// Largest accepted condition number of Ξ.
    pub max_condition: f64,
    /// Allowed excess of ‖q̂⊥‖ over one in known mode.
    pub tolerance: f64,
}

impl Default for AttitudeOptions {
    fn default() -> Self {
        AttitudeOptions { q_path: QPath::Quadrature, xi: XiKind::Quadrature, max_condition: 1e8, tolerance: 0.05 }
    }
}

/// Attitude of every target from the field and DOAs given in target order.
/// The outer error covers the shared reconstruction; per-target failures
/// are returned in place.
pub fn estimate_attitudes(
    field: &FieldSamples,
    doas: &[(f64, f64)],
    mode: AttitudeMode,
    snapshots: Option<&SnapshotSeries>,
    opts: &AttitudeOptions,
) -> Result<Vec<Result<AttitudeEstimate>>> {
    if mode == AttitudeMode::Known {
        match snapshots {
            None => return Err(Error::InvalidInput("known-snapshot mode needs the snapshot series".into())),
            Some(s) if s.sources() != doas.len() || s.len() != field.snapshots() => {
                return Err(Error::DimensionMismatch {
                    expected: format!("{}x{}", doas.len(), field.snapshots()),
                    actual: format!("{}x{}", s.sources(), s.len()),
                })
            }
            _ => {}
        }
    }
    let gammas = gamma_series(field, doas, opts.q_path, opts.xi, opts.max_condition)?;
    Ok((0..doas.len())
        .map(|m| {
            let g = assemble_gm(&gammas, m)?;
            let z = wave_vector(doas[m].0, doas[m].1);
            match mode {
                AttitudeMode::Blind => estimate_attitude_blind(&g, &z),
                AttitudeMode::Known => {
                    let xi = RealizedSnapshots::for_target(snapshots.expect("checked above"), m)?;
                    estimate_attitude_known(&g, &xi, &z, opts.tolerance)
                }
            }
        })
        .collect())
}

/// JSON report; adds angular residuals when true attitudes are given.
pub fn attitude_report(estimates: &[Result<AttitudeEstimate>], truth: Option<&[UnitVec3]>) -> serde_json::Value {
    let rows = estimates
        .iter()
        .enumerate()
        .map(|(m, e)| match e {
            Ok(est) => {
                let mut v = serde_json::to_value(est).unwrap_or(serde_json::Value::Null);
                if let (Some(t), Some(obj)) = (truth.and_then(|t| t.get(m)), v.as_object_mut()) {
                    if let Some((best, worst)) = est.angular_errors(t) {
                        obj.insert("residual_best".into(), best.into());
                        obj.insert("residual_worst".into(), worst.into());
                    }
                }
                v
            }
            Err(err) => serde_json::json!({ "error": err.to_string() }),
        })
        .collect();
    serde_json::Value::Array(rows)
}
