//! Joint direction-of-arrival and attitude estimation for dipole targets
//! observed by a tri-polarized continuous aperture.

pub mod attitude;
pub mod baselines;
pub mod em;
pub mod error;
pub mod linalg;
pub mod music;
pub mod presets;
pub mod rng;

pub use error::{Error, Result};
