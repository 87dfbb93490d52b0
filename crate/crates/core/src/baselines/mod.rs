//! Reference estimators: discrete planar-array MUSIC, single-polarization
//! aperture MUSIC and the conditional Cramér-Rao bound.

pub mod crlb;
pub mod spda;

pub use crlb::{crlb, CrlbReport};
pub use spda::{spda_field, spda_music, spda_with_grid, SpdaConfig};

use crate::em::field::FieldSamples;
use crate::error::Result;
use crate::music::{estimate_with_engine, Axis, DoaEstimate, DoaOptions, MusicEngine, PolarPair, SpectrumGrid};

/// MUSIC on the x-axis field alone.
pub fn singlepol_engine(field: &FieldSamples, m: usize, opts: &DoaOptions) -> Result<MusicEngine> {
    MusicEngine::from_field(field, m, &[PolarPair::new(Axis::X, Axis::X)], &opts.subspace)
}

pub fn singlepol_music(field: &FieldSamples, m: usize, opts: &DoaOptions) -> Result<DoaEstimate> {
    Ok(singlepol_with_grid(field, m, opts)?.0)
}

pub fn singlepol_with_grid(field: &FieldSamples, m: usize, opts: &DoaOptions) -> Result<(DoaEstimate, SpectrumGrid)> {
    estimate_with_engine(&singlepol_engine(field, m, opts)?, m, opts)
}
