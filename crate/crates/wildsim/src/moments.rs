//! Conserved quantities read off the Fourier transform near the origin.
//!
//! Mass is the value at `r = 0`. The second moment comes from the second
//! radial derivative at 0: the in-scope states are even in `r`, so a
//! five-point centered difference on the even extension is fourth-order
//! accurate. The Kac second moment is `-fhat''(0)`; the radial 3D Laplacian
//! at the origin is `3 fhat''(0)`, so the Boltzmann second moment is
//! `-3 fhat''(0)`. Momentum vanishes identically for even/radial states and
//! is asserted, not computed.

use crate::error::{Error, Result};
use crate::numerics::fd_weights;
use crate::spectral::{Mode, SpectralState};
use serde::Serialize;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentSet {
    pub mode: Mode,
    pub time_label: f64,
    pub mass: f64,
    pub second_moment: f64,
}

/// Extracts mass and second moment from a state.
pub fn extract_moments(state: &SpectralState) -> Result<MomentSet> {
    let nodes = &state.grid.nodes;
    if nodes.iter().filter(|r| **r < 0.5).count() < 3 {
        return Err(Error::Resolution(
            "grid too coarse near the origin for moment extraction \
             (need at least 3 nodes below r = 0.5)"
                .into(),
        ));
    }
    let mass = state.values[0];
    // symmetric 5-point stencil {-r2, -r1, 0, r1, r2} on the even extension
    let coords = [-nodes[2], -nodes[1], 0.0, nodes[1], nodes[2]];
    let w = fd_weights(0.0, &coords, 2);
    let v = &state.values;
    let d2 = w[0] * v[2] + w[1] * v[1] + w[2] * v[0] + w[3] * v[1] + w[4] * v[2];
    let second_moment = match state.grid.mode {
        Mode::Kac1d => -d2,
        Mode::BoltzmannRadial3d => -3.0 * d2,
    };
    Ok(MomentSet {
        mode: state.grid.mode,
        time_label: state.time_label,
        mass,
        second_moment,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConservationReport {
    pub per_snapshot: Vec<MomentSet>,
    pub max_mass_drift: f64,
    pub max_second_moment_drift: f64,
}

/// Per-snapshot moments plus the largest drift from the first snapshot.
pub fn conservation_report(snapshots: &[SpectralState]) -> Result<ConservationReport> {
    if snapshots.len() < 2 {
        return Err(Error::Config(
            "conservation report needs at least 2 snapshots".into(),
        ));
    }
    let per_snapshot: Vec<MomentSet> = snapshots
        .iter()
        .map(extract_moments)
        .collect::<Result<_>>()?;
    let m0 = per_snapshot[0];
    let max_mass_drift = per_snapshot
        .iter()
        .map(|m| (m.mass - m0.mass).abs())
        .fold(0.0, f64::max);
    let max_second_moment_drift = per_snapshot
        .iter()
        .map(|m| (m.second_moment - m0.second_moment).abs())
        .fold(0.0, f64::max);
    Ok(ConservationReport {
        per_snapshot,
        max_mass_drift,
        max_second_moment_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralGrid;
    use std::sync::Arc;

    fn gaussian(mode: Mode) -> SpectralState {
        let grid = Arc::new(SpectralGrid::uniform(mode, 16.0, 257).unwrap());
        let values = grid.nodes.iter().map(|r| (-r * r / 2.0).exp()).collect();
        SpectralState::new(grid, values, 0.0).unwrap()
    }

    #[test]
    fn gaussian_kac_moments() {
        let m = extract_moments(&gaussian(Mode::Kac1d)).unwrap();
        assert_eq!(m.mass, 1.0);
        assert!((m.second_moment - 1.0).abs() < 1e-5);
    }

    #[test]
    fn gaussian_boltzmann_moments() {
        let m = extract_moments(&gaussian(Mode::BoltzmannRadial3d)).unwrap();
        assert_eq!(m.mass, 1.0);
        assert!((m.second_moment - 3.0).abs() < 1e-4);
    }

    #[test]
    fn coarse_grid_rejected() {
        let grid = Arc::new(SpectralGrid::uniform(Mode::Kac1d, 16.0, 9).unwrap());
        let values = grid.nodes.iter().map(|r| (-r * r / 2.0).exp()).collect();
        let s = SpectralState::new(grid, values, 0.0).unwrap();
        assert!(extract_moments(&s).is_err());
    }

    #[test]
    fn identical_pair_has_zero_drift() {
        let s = gaussian(Mode::Kac1d);
        let rep = conservation_report(&[s.clone(), s]).unwrap();
        assert_eq!(rep.max_mass_drift, 0.0);
        assert_eq!(rep.max_second_moment_drift, 0.0);
    }

    #[test]
    fn geometric_grid_moments_still_accurate() {
        let grid = Arc::new(
            SpectralGrid::new(
                Mode::Kac1d,
                16.0,
                257,
                crate::spectral::GridSpacing::Geometric { first: 0.05 },
            )
            .unwrap(),
        );
        let values = grid.nodes.iter().map(|r| (-r * r / 2.0).exp()).collect();
        let s = SpectralState::new(grid, values, 0.0).unwrap();
        let m = extract_moments(&s).unwrap();
        assert!((m.second_moment - 1.0).abs() < 1e-6, "{}", m.second_moment);
    }
}
