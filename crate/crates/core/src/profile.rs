//! One-dimensional intensity curves with an explicit position axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("profile has no samples")]
    Empty,
    #[error("{positions} positions but {values} values")]
    LengthMismatch { positions: usize, values: usize },
    #[error("position at index {index} is not finite")]
    NonFinitePosition { index: usize },
    #[error("value at index {index} is not finite")]
    NonFiniteValue { index: usize },
    #[error("value at index {index} is negative ({value})")]
    Negative { index: usize, value: f64 },
    #[error("positions are not strictly increasing at index {index}")]
    NonMonotonic { index: usize },
}

/// What the numbers in [`ProfileSeries::positions`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PositionUnit {
    Meters,
    /// A unitless coordinate such as Γ.
    Dimensionless,
    /// Raw lattice coordinate; `meters_per_index` converts when known.
    LatticeIndex { meters_per_index: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSeries {
    pub label: String,
    pub unit: PositionUnit,
    positions: Vec<f64>,
    values: Vec<f64>,
}

impl ProfileSeries {
    pub fn new(
        label: impl Into<String>,
        unit: PositionUnit,
        positions: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Self, ProfileError> {
        if positions.len() != values.len() {
            return Err(ProfileError::LengthMismatch { positions: positions.len(), values: values.len() });
        }
        if positions.is_empty() {
            return Err(ProfileError::Empty);
        }
        for (index, (&x, &y)) in positions.iter().zip(&values).enumerate() {
            if !x.is_finite() {
                return Err(ProfileError::NonFinitePosition { index });
            }
            if !y.is_finite() {
                return Err(ProfileError::NonFiniteValue { index });
            }
            if y < 0.0 {
                return Err(ProfileError::Negative { index, value: y });
            }
            if index > 0 && x <= positions[index - 1] {
                return Err(ProfileError::NonMonotonic { index });
            }
        }
        Ok(Self { label: label.into(), unit, positions, values })
    }

    /// Series on lattice indices `first, first+1, ...`.
    pub fn on_lattice(label: impl Into<String>, first: i64, values: Vec<f64>) -> Result<Self, ProfileError> {
        let positions = (0..values.len()).map(|i| (first + i as i64) as f64).collect();
        Self::new(label, PositionUnit::LatticeIndex { meters_per_index: None }, positions, values)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.positions.iter().copied().zip(self.values.iter().copied())
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn peak(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Index and position of the maximum value within `[lo, hi]`.
    pub fn argmax_in(&self, lo: f64, hi: f64) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for (i, (&x, &y)) in self.positions.iter().zip(&self.values).enumerate() {
            if x < lo || x > hi {
                continue;
            }
            if best.is_none_or(|(j, _)| y > self.values[j]) {
                best = Some((i, y));
            }
        }
        best.map(|(i, _)| (i, self.positions[i]))
    }

    /// Attach a lattice calibration: position = origin + index · spacing.
    pub fn with_calibration(&self, meters_per_index: f64, origin: f64) -> Self {
        if !matches!(self.unit, PositionUnit::LatticeIndex { .. }) {
            return self.clone();
        }
        let positions = self.positions.iter().map(|x| origin + x * meters_per_index).collect();
        Self { label: self.label.clone(), unit: PositionUnit::Meters, positions, values: self.values.clone() }
    }

    /// Positions expressed in meters when a calibration is known.
    pub fn positions_in_meters(&self) -> Option<Vec<f64>> {
        match self.unit {
            PositionUnit::Meters => Some(self.positions.clone()),
            PositionUnit::LatticeIndex { meters_per_index: Some(s) } => {
                Some(self.positions.iter().map(|x| x * s).collect())
            }
            PositionUnit::LatticeIndex { meters_per_index: None } | PositionUnit::Dimensionless => None,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, ProfileError> {
        Self::new(self.label.clone(), self.unit, self.positions.clone(), values)
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Spacing if the grid is uniform to a relative tolerance.
    pub fn uniform_spacing(&self, rel_tol: f64) -> Option<f64> {
        if self.positions.len() < 2 {
            return None;
        }
        let n = self.positions.len() - 1;
        let h = (self.positions[n] - self.positions[0]) / n as f64;
        let uniform = self
            .positions
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= rel_tol * h.abs());
        uniform.then_some(h)
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn interpolate(&self, x: f64) -> Option<f64> {
        let xs = &self.positions;
        let n = xs.len();
        if x < xs[0] || x > xs[n - 1] {
            return None;
        }
        let hi = xs.partition_point(|&v| v < x);
        if hi == 0 {
            return Some(self.values[0]);
        }
        if xs[hi.min(n - 1)] == x {
            return Some(self.values[hi.min(n - 1)]);
        }
        let (x0, x1) = (xs[hi - 1], xs[hi]);
        let t = (x - x0) / (x1 - x0);
        Some(self.values[hi - 1] * (1.0 - t) + self.values[hi] * t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_errors() {
        let u = PositionUnit::Meters;
        assert_eq!(ProfileSeries::new("x", u, vec![], vec![]), Err(ProfileError::Empty));
        assert!(matches!(
            ProfileSeries::new("x", u, vec![0.0, 0.0], vec![1.0, 1.0]),
            Err(ProfileError::NonMonotonic { index: 1 })
        ));
        assert!(matches!(
            ProfileSeries::new("x", u, vec![0.0, 1.0], vec![1.0, -1.0]),
            Err(ProfileError::Negative { index: 1, .. })
        ));
        assert!(matches!(
            ProfileSeries::new("x", u, vec![0.0, 1.0], vec![f64::NAN, 1.0]),
            Err(ProfileError::NonFiniteValue { index: 0 })
        ));
    }

    #[test]
    fn interpolation_and_calibration() {
        let p = ProfileSeries::on_lattice("p", -1, vec![0.0, 2.0, 4.0]).unwrap();
        assert_eq!(p.interpolate(-0.5), Some(1.0));
        assert_eq!(p.interpolate(1.0), Some(4.0));
        assert_eq!(p.interpolate(1.5), None);
        let m = p.with_calibration(0.5, 1.0);
        assert_eq!(m.positions(), &[0.5, 1.0, 1.5]);
        assert_eq!(m.uniform_spacing(1e-12), Some(0.5));
        assert_eq!(p.argmax_in(-10.0, 10.0), Some((2, 1.0)));
    }
}
