use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};

pub type RealVec3 = Vector3<f64>;

/// A vector of unit Euclidean length.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct UnitVec3(RealVec3);

impl UnitVec3 {
    /// Normalize `v`. Fails for zero or non-finite input.
    pub fn normalize(v: RealVec3) -> Result<Self> {
        let n = v.norm();
        if !n.is_finite() || n == 0.0 {
            return Err(Error::UndefinedDirection);
        }
        // keep already-unit input bit-exact so serialization roundtrips
        if (n - 1.0).abs() <= 4.0 * f64::EPSILON {
            return Ok(UnitVec3(v));
        }
        Ok(UnitVec3(v / n))
    }

    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        Self::normalize(RealVec3::new(x, y, z))
    }

    pub fn x_axis() -> Self {
        UnitVec3(RealVec3::x())
    }

    pub fn z_axis() -> Self {
        UnitVec3(RealVec3::z())
    }

    #[inline]
    pub fn as_vec(&self) -> &RealVec3 {
        &self.0
    }

    #[inline]
    pub fn into_inner(self) -> RealVec3 {
        self.0
    }

    pub fn dot(&self, other: &UnitVec3) -> f64 {
        self.0.dot(&other.0)
    }

    /// Angle to another unit vector in [0, π].
    pub fn angle_to(&self, other: &UnitVec3) -> f64 {
        angle_between(&self.0, &other.0)
    }

    pub fn neg(&self) -> UnitVec3 {
        UnitVec3(-self.0)
    }
}

impl std::ops::Deref for UnitVec3 {
    type Target = RealVec3;
    fn deref(&self) -> &RealVec3 {
        &self.0
    }
}

impl TryFrom<[f64; 3]> for UnitVec3 {
    type Error = Error;
    fn try_from(a: [f64; 3]) -> Result<Self> {
        Self::new(a[0], a[1], a[2])
    }
}

impl From<UnitVec3> for [f64; 3] {
    fn from(u: UnitVec3) -> [f64; 3] {
        [u.0.x, u.0.y, u.0.z]
    }
}

/// Angle between two nonzero vectors, computed with atan2 so that tiny
/// angles keep full precision.
pub fn angle_between(a: &RealVec3, b: &RealVec3) -> f64 {
    let c = a.cross(b).norm();
    let d = a.dot(b);
    c.atan2(d)
}

/// d(θ, φ) = [cosθ cosφ, sinθ cosφ, sinφ].
pub fn wave_vector(theta: f64, phi: f64) -> UnitVec3 {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    UnitVec3(RealVec3::new(ct * cp, st * cp, sp))
}

/// Partial derivatives of d(θ, φ) with respect to θ and φ.
pub fn wave_vector_derivatives(theta: f64, phi: f64) -> (RealVec3, RealVec3) {
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();
    (RealVec3::new(-st * cp, ct * cp, 0.0), RealVec3::new(-ct * sp, -st * sp, cp))
}

/// Azimuth and elevation of a direction. θ ∈ (−π, π], φ ∈ [−π/2, π/2];
/// at the poles θ is 0.
pub fn direction_angles(d: &RealVec3) -> Result<(f64, f64)> {
    let n = d.norm();
    if !n.is_finite() || n == 0.0 {
        return Err(Error::UndefinedDirection);
    }
    let rho = d.x.hypot(d.y);
    let phi = d.z.atan2(rho);
    if rho <= 1e-15 * n {
        return Ok((0.0, if d.z > 0.0 { FRAC_PI_2 } else { -FRAC_PI_2 }));
    }
    Ok((canonical_azimuth(d.y.atan2(d.x)), phi))
}

pub fn doa_from_position(p: &RealVec3) -> Result<(f64, f64)> {
    direction_angles(p)
}

/// Wrap an azimuth into (−π, π].
pub fn canonical_azimuth(theta: f64) -> f64 {
    let mut t = theta % (2.0 * PI);
    if t <= -PI {
        t += 2.0 * PI;
    } else if t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// Map arbitrary (θ, φ) onto the canonical ranges without changing d(θ, φ).
pub fn canonical_angles(theta: f64, phi: f64) -> (f64, f64) {
    direction_angles(wave_vector(theta, phi).as_vec()).unwrap_or((0.0, 0.0))
}

/// v = (I − z zᵀ) q.
pub fn polarization_vector(q: &UnitVec3, z: &UnitVec3) -> RealVec3 {
    let q = q.as_vec();
    let z = z.as_vec();
    q - z * z.dot(q)
}

/// I − z zᵀ.
pub fn transverse_projector(z: &UnitVec3) -> Matrix3<f64> {
    Matrix3::identity() - z.as_vec() * z.as_vec().transpose()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn wave_vector_examples() {
        assert_abs_diff_eq!(*wave_vector(0.0, 0.0).as_vec(), RealVec3::x(), epsilon = 1e-15);
        assert_abs_diff_eq!(*wave_vector(FRAC_PI_2, 0.0).as_vec(), RealVec3::y(), epsilon = 1e-15);
        let d = wave_vector(PI / 4.0, PI / 4.0);
        assert_abs_diff_eq!(*d.as_vec(), RealVec3::new(0.5, 0.5, 0.5f64.sqrt()), epsilon = 1e-12);
    }

    #[test]
    fn doa_examples() {
        let (t, p) = doa_from_position(&RealVec3::new(0.0, 0.0, 50.0)).unwrap();
        assert_eq!((t, p), (0.0, FRAC_PI_2));
        // φ = asin(p_z/‖p‖), θ = atan2(p_y, p_x)
        let (t, p) = doa_from_position(&RealVec3::new(-16.0, -10.0, 50.0)).unwrap();
        assert_abs_diff_eq!(t, -2.58300, epsilon = 1e-5);
        assert_abs_diff_eq!(p, 1.209_959, epsilon = 1e-6);
        let (t, p) = doa_from_position(&RealVec3::new(16.0, -38.0, 40.0)).unwrap();
        assert_abs_diff_eq!(t, -1.172_274, epsilon = 1e-6);
        assert_abs_diff_eq!(p, 0.770_244, epsilon = 1e-6);
        for pos in [RealVec3::new(-16.0, -10.0, 50.0), RealVec3::new(16.0, -38.0, 40.0), RealVec3::new(18.0, 7.5, 18.0)] {
            let (t, p) = doa_from_position(&pos).unwrap();
            assert_abs_diff_eq!(*wave_vector(t, p).as_vec(), pos.normalize(), epsilon = 1e-12);
        }
        assert_eq!(doa_from_position(&RealVec3::zeros()), Err(Error::UndefinedDirection));
    }

    #[test]
    fn polarization_examples() {
        let v = polarization_vector(&UnitVec3::x_axis(), &UnitVec3::z_axis());
        assert_eq!(v, RealVec3::x());
        let v = polarization_vector(&UnitVec3::z_axis(), &UnitVec3::z_axis());
        assert_eq!(v, RealVec3::zeros());
        let z = UnitVec3::new(0.0, 0.6, 0.8).unwrap();
        let v = polarization_vector(&UnitVec3::z_axis(), &z);
        assert_abs_diff_eq!(v, RealVec3::new(0.0, -0.48, 0.36), epsilon = 1e-15);
        assert_abs_diff_eq!(v.norm(), 0.6, epsilon = 1e-15);
    }

    #[test]
    fn canonical_ranges() {
        assert_abs_diff_eq!(canonical_azimuth(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(canonical_azimuth(-PI), PI, epsilon = 1e-12);
        let (t, p) = canonical_angles(0.3, PI - 0.4);
        assert_abs_diff_eq!(p, 0.4, epsilon = 1e-12);
        assert_abs_diff_eq!(t, 0.3 - PI, epsilon = 1e-12);
    }

    #[test]
    fn unit_serde_rejects_zero() {
        assert!(serde_json::from_str::<UnitVec3>("[0,0,0]").is_err());
        let u: UnitVec3 = serde_json::from_str("[3,0,4]").unwrap();
        assert_abs_diff_eq!(u.norm(), 1.0, epsilon = 1e-15);
    }
}
