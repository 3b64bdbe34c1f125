use serde::Serialize;
use thiserror::Error;

use super::engine::{propagate_with, EngineError, PropagateOptions, StateVector};
use super::grid::{GridError, LatticeGeometry, NodeKind};
use super::unitary::UnitaryParams;
use super::Direction;
use crate::profile::{PositionUnit, ProfileSeries};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("γ = {0} outside (0, π/2]")]
    Gamma(f64),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Integrated exit intensities of Laue slabs of `0..=max_layers` bi-layers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PendellosungScan {
    pub gamma: f64,
    pub layers: Vec<u64>,
    pub diffracted: Vec<f64>,
    pub transmitted: Vec<f64>,
}

impl PendellosungScan {
    /// Slab thickness in units of the Pendellösung length, counting the
    /// slab out to the far edge of its last layer.
    pub fn thickness_ratio(&self, layers: u64) -> f64 {
        (layers as f64 + 0.5) * 2.0 * self.gamma / std::f64::consts::PI
    }

    pub fn thickness_ratios(&self) -> Vec<f64> {
        self.layers.iter().map(|&n| self.thickness_ratio(n)).collect()
    }

    /// Integrated intensity against `D/Δ_H`, including the empty crystal
    /// at `D = 0`.
    pub fn profile(&self, direction: Direction) -> ProfileSeries {
        let (values, empty) = match direction {
            Direction::Reflected => (&self.diffracted, 0.0),
            Direction::Transmitted => (&self.transmitted, 1.0),
        };
        let positions = std::iter::once(0.0).chain(self.thickness_ratios()).collect();
        let values = std::iter::once(empty).chain(values.iter().copied()).collect();
        let label = match direction {
            Direction::Reflected => "integrated_diffracted",
            Direction::Transmitted => "integrated_transmitted",
        };
        ProfileSeries::new(label, PositionUnit::Dimensionless, positions, values)
            .expect("scan intensities are finite and non-negative")
    }

    /// Thicknesses of the local maxima of the diffracted intensity, each
    /// refined by a parabola through its neighbours.
    pub fn diffracted_maxima(&self) -> Vec<f64> {
        let d = &self.diffracted;
        let r = self.thickness_ratios();
        let step = 2.0 * self.gamma / std::f64::consts::PI;
        (1..d.len().saturating_sub(1))
            .filter(|&i| d[i] > d[i - 1] && d[i] >= d[i + 1])
            .map(|i| {
                let curvature = d[i - 1] - 2.0 * d[i] + d[i + 1];
                r[i] + 0.5 * step * (d[i - 1] - d[i + 1]) / curvature
            })
            .collect()
    }

    /// Mean spacing of successive diffracted maxima, in units of `Δ_H`.
    pub fn oscillation_period(&self) -> Option<f64> {
        let peaks = self.diffracted_maxima();
        (peaks.len() >= 2).then(|| (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64)
    }
}

/// One propagation through the thickest slab yields every thinner slab,
/// since the state after column `2n` is the exit of an `n`-layer slab.
pub fn integrated_intensity_scan(
    gamma: f64,
    max_layers: usize,
    options: &PropagateOptions,
) -> Result<PendellosungScan, ScanError> {
    if !(gamma > 0.0 && gamma <= std::f64::consts::FRAC_PI_2) {
        return Err(ScanError::Gamma(gamma));
    }
    let columns = 2 * max_layers + 1;
    let rows = 2 * columns + 3;
    let entry = rows / 2;
    let geometry = LatticeGeometry::uniform(columns, rows, entry, NodeKind::Crystal(UnitaryParams::new(gamma)))?;
    let initial = StateVector::delta(rows, entry, Direction::Transmitted);
    let mut scan = PendellosungScan { gamma, layers: Vec::new(), diffracted: Vec::new(), transmitted: Vec::new() };
    propagate_with(&initial, &geometry, options, |column, state| {
        if column % 2 == 0 {
            scan.layers.push(column as u64 / 2);
            scan.diffracted.push(state.reflected_intensity());
            scan.transmitted.push(state.transmitted_intensity());
        }
    })?;
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_entries_match_single_nodes() {
        let s = integrated_intensity_scan(0.2, 3, &Default::default()).unwrap();
        assert_eq!(s.layers, vec![0, 1, 2, 3]);
        assert!((s.diffracted[0] - 0.2f64.sin().powi(2)).abs() < 1e-15);
        for (d, t) in s.diffracted.iter().zip(&s.transmitted) {
            assert!((d + t - 1.0).abs() < 1e-14);
        }
        assert!(integrated_intensity_scan(0.0, 3, &Default::default()).is_err());
        let p = s.profile(Direction::Reflected);
        assert_eq!(p.positions()[0], 0.0);
        assert_eq!(p.values()[0], 0.0);
        assert_eq!(p.len(), 5);
    }
}
