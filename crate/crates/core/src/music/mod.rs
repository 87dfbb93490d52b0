//! Equivalent-covariance MUSIC over the nine polarization pairs.

pub mod covariance;
pub mod search;
pub mod spectrum;
pub mod subspace;

use serde::{Deserialize, Serialize};

pub use covariance::{equivalent_covariance, EquivCov};
pub use search::{estimate_doa, estimate_with_engine, search_peaks, DoaEstimate, DoaOptions, DoaPeak};
pub use spectrum::{scan_spectrum, spectrum_value, GridSpec, MusicEngine, SpectrumGrid, SpectrumValue};
pub use subspace::{noise_subspace, subspace_split, EigenSolver, NoiseSubspace, Recovery, SubspaceOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        ["x", "y", "z"][self as usize]
    }
}

/// Ordered pair (p, q): K_pq correlates conj(e_q) with e_p.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PolarPair {
    pub p: Axis,
    pub q: Axis,
}

impl PolarPair {
    pub fn new(p: Axis, q: Axis) -> Self {
        PolarPair { p, q }
    }

    /// All nine pairs, p-major.
    pub fn all() -> Vec<PolarPair> {
        Axis::ALL.iter().flat_map(|&p| Axis::ALL.iter().map(move |&q| PolarPair { p, q })).collect()
    }

    pub fn is_self(&self) -> bool {
        self.p == self.q
    }

    pub fn label(&self) -> String {
        format!("{}{}", self.p.name(), self.q.name())
    }
}

impl std::fmt::Display for PolarPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.label())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn nine_distinct_pairs() {
        let all = PolarPair::all();
        assert_eq!(all.len(), 9);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 9);
        assert_eq!(all.iter().filter(|p| p.is_self()).count(), 3);
        assert_eq!(all[1].label(), "xy");
    }
}
