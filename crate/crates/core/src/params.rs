//! Physical crystal parameters and their mapping onto lattice parameters.
//!
//! All quantities are SI (meters, radians). The only freedom in the mapping
//! is the trade between the number of bi-layers `n` and the per-node
//! reflection strength `γ`: their product is pinned by the crystal's
//! Pendellösung thickness, `n·γ = (π/2)·D/Δ_H`.
//!
//! Lattice layout: one bi-layer is two node columns, so the column pitch is
//! `Δx/2` and the row pitch `Δz/2`, with `Δz/Δx = tan θ_B`.
//!
//! The derivation-only symbols of the time-step picture (`Δt`, `K_x`, the
//! neutron mass) have no runtime representation; they are absorbed into
//! the `n·γ` relation.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("crystal.{field} must be positive and finite (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("crystal.theta_B must lie in (0, π/2) (got {0} rad)")]
    BraggAngle(f64),
    #[error("layer count must be at least 1")]
    NoLayers,
    #[error("gamma must lie in (0, π/2] (got {0})")]
    GammaRange(f64),
    #[error("crystal too thick for {layers} layers: gamma would be {gamma:.4} > π/2; use at least {min_layers} layers")]
    TooThick { layers: u64, gamma: f64, min_layers: u64 },
}

/// Physical description of a perfect crystal in a given reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrystalSpec {
    /// Thickness `D` along the propagation axis (m).
    pub thickness: f64,
    /// Neutron wavelength `λ` (m).
    pub wavelength: f64,
    /// Bragg angle `θ_B` (rad).
    pub bragg_angle: f64,
    /// Unit-cell volume (m³).
    pub cell_volume: f64,
    /// Structure-factor magnitude `|F_H|` as a scattering length per cell (m).
    pub structure_factor: f64,
    /// Bragg plane spacing `d` (m).
    pub plane_spacing: f64,
}

/// Non-fatal findings from [`CrystalSpec::validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpecWarning {
    /// `λ` and `2d sin θ_B` differ by the given relative amount.
    BraggMismatch { relative: f64 },
}

/// Bragg-condition tolerance used by [`CrystalSpec::validate`].
pub const BRAGG_TOLERANCE: f64 = 5e-3;

/// Silicon lattice constant (m).
pub const SILICON_LATTICE_CONSTANT: f64 = 5.431_020_511e-10;
/// Bound coherent neutron scattering length of natural silicon (m).
pub const SILICON_SCATTERING_LENGTH: f64 = 4.1491e-15;

impl CrystalSpec {
    /// Silicon (111) reflection. `|F_111| = 4√2·b` for the diamond
    /// structure; no Debye-Waller attenuation is applied.
    pub fn silicon_111(thickness: f64, wavelength: f64, bragg_angle: f64) -> Self {
        let a = SILICON_LATTICE_CONSTANT;
        Self {
            thickness,
            wavelength,
            bragg_angle,
            cell_volume: a * a * a,
            structure_factor: 4.0 * 2f64.sqrt() * SILICON_SCATTERING_LENGTH,
            plane_spacing: a / 3f64.sqrt(),
        }
    }

    /// Si(111) with `θ_B` solved from Bragg's law.
    pub fn silicon_111_at(thickness: f64, wavelength: f64) -> Self {
        let d = SILICON_LATTICE_CONSTANT / 3f64.sqrt();
        Self::silicon_111(thickness, wavelength, (wavelength / (2.0 * d)).asin())
    }

    /// Scanning-slit Bragg configuration: Si(111), λ = 4.43 Å, θ_B = 44.9°.
    pub fn silicon_111_reference(thickness: f64) -> Self {
        Self::silicon_111(thickness, 4.43e-10, 44.9f64.to_radians())
    }

    pub fn with_thickness(mut self, thickness: f64) -> Self {
        self.thickness = thickness;
        self
    }

    pub fn validate(&self) -> Result<Vec<SpecWarning>, ParamError> {
        let lengths = [
            ("D", self.thickness),
            ("lambda", self.wavelength),
            ("V_cell", self.cell_volume),
            ("F_H", self.structure_factor),
            ("d", self.plane_spacing),
        ];
        for (field, value) in lengths {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NonPositive { field, value });
            }
        }
        if !(self.bragg_angle > 0.0 && self.bragg_angle < FRAC_PI_2) {
            return Err(ParamError::BraggAngle(self.bragg_angle));
        }
        let mut warnings = Vec::new();
        let relative = self.bragg_mismatch();
        if relative > BRAGG_TOLERANCE {
            warnings.push(SpecWarning::BraggMismatch { relative });
        }
        Ok(warnings)
    }

    /// `|λ - 2d sin θ_B| / λ`.
    pub fn bragg_mismatch(&self) -> f64 {
        (self.wavelength - 2.0 * self.plane_spacing * self.bragg_angle.sin()).abs() / self.wavelength
    }

    /// `D / Δ_H`.
    pub fn thickness_ratio(&self) -> f64 {
        self.thickness / pendellosung_period(self)
    }
}

/// Pendellösung period `Δ_H = π V_cell cos θ_B / (λ |F_H|)`.
pub fn pendellosung_period(spec: &CrystalSpec) -> f64 {
    PI * spec.cell_volume * spec.bragg_angle.cos() / (spec.wavelength * spec.structure_factor)
}

/// Darwin width `θ_D = λ² |F_H| / (π V_cell sin²(2θ_B))`.
pub fn darwin_width(spec: &CrystalSpec) -> f64 {
    let s = (2.0 * spec.bragg_angle).sin();
    spec.wavelength.powi(2) * spec.structure_factor / (PI * spec.cell_volume * s * s)
}

/// Lateral offset of the back-face echo from the primary reflection,
/// `2t / tan θ_B`.
pub fn backface_displacement(thickness: f64, bragg_angle: f64) -> f64 {
    2.0 * thickness / bragg_angle.tan()
}

/// Reflection strength per unit length along the planes, `γ/Δx`, from the
/// crystal constants: `d |F_H| tan θ_B / V_cell`. Equal to `π/(2Δ_H)` when
/// the spec satisfies Bragg's law.
pub fn gamma_per_length(spec: &CrystalSpec) -> f64 {
    spec.plane_spacing * spec.structure_factor * spec.bragg_angle.tan() / spec.cell_volume
}

/// Which side of the `n·γ` trade the caller fixes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Layers(u64),
    Gamma(f64),
}

/// Lattice parameters for one crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Bi-layer count `n`.
    pub layers: u64,
    /// Per-node reflection strength `γ` (rad).
    pub gamma: f64,
    /// Node spacing along the Bragg planes, `Δx = D/n` (m).
    pub dx: f64,
    /// Node spacing across the Bragg planes, `Δz = Δx tan θ_B` (m).
    pub dz: f64,
}

impl SimParams {
    /// Meters per lattice column.
    pub fn column_pitch(&self) -> f64 {
        0.5 * self.dx
    }

    /// Meters per lattice row.
    pub fn row_pitch(&self) -> f64 {
        0.5 * self.dz
    }

    /// `D/Δ_H` implied by `n·γ`.
    pub fn thickness_ratio(&self) -> f64 {
        self.layers as f64 * self.gamma / FRAC_PI_2
    }

    /// Relative residuals of the defining relations against `spec`.
    pub fn residuals(&self, spec: &CrystalSpec) -> SimResiduals {
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        SimResiduals {
            layer_gamma: rel(self.layers as f64 * self.gamma, FRAC_PI_2 * spec.thickness_ratio()),
            layer_size: rel(self.dx * self.layers as f64, spec.thickness),
            aspect: rel(self.dz / self.dx, spec.bragg_angle.tan()),
            gamma_per_length: rel(self.gamma / self.dx, gamma_per_length(spec)),
        }
    }
}

/// Relative residuals of the four relations tying [`SimParams`] to a crystal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimResiduals {
    /// `n·γ` vs `(π/2)·D/Δ_H`.
    pub layer_gamma: f64,
    /// `Δx·n` vs `D`.
    pub layer_size: f64,
    /// `Δz/Δx` vs `tan θ_B`.
    pub aspect: f64,
    /// `γ/Δx` vs `d |F_H| tan θ_B / V_cell`.
    pub gamma_per_length: f64,
}

impl SimResiduals {
    pub fn max(&self) -> f64 {
        self.layer_gamma.max(self.layer_size).max(self.aspect).max(self.gamma_per_length)
    }
}

/// Complete the lattice parameters for `spec`. With a requested `γ`, the
/// layer count is rounded to the nearest integer (up, if rounding down would
/// push `γ` past π/2) and `γ` re-solved so that `n·γ` holds exactly.
pub fn sim_from_crystal(spec: &CrystalSpec, choice: Resolution) -> Result<SimParams, ParamError> {
    spec.validate()?;
    let target = FRAC_PI_2 * spec.thickness_ratio();
    let layers = match choice {
        Resolution::Layers(0) => return Err(ParamError::NoLayers),
        Resolution::Layers(n) => n,
        Resolution::Gamma(g) => {
            if !(g > 0.0 && g <= FRAC_PI_2) {
                return Err(ParamError::GammaRange(g));
            }
            let rounded = ((target / g).round() as u64).max(1);
            if target / rounded as f64 > FRAC_PI_2 {
                (target / FRAC_PI_2).ceil() as u64
            } else {
                rounded
            }
        }
    };
    let gamma = target / layers as f64;
    if gamma > FRAC_PI_2 {
        return Err(ParamError::TooThick {
            layers,
            gamma,
            min_layers: (target / FRAC_PI_2).ceil() as u64,
        });
    }
    let dx = spec.thickness / layers as f64;
    Ok(SimParams { layers, gamma, dx, dz: dx * spec.bragg_angle.tan() })
}

/// Inverse of [`sim_from_crystal`]: recovers `D` and `θ_B` from the lattice
/// parameters, taking the material constants from `material`.
pub fn crystal_from_sim(sim: &SimParams, material: &CrystalSpec) -> CrystalSpec {
    CrystalSpec {
        thickness: sim.dx * sim.layers as f64,
        bragg_angle: (sim.dz / sim.dx).atan(),
        ..*material
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reference() -> CrystalSpec {
        CrystalSpec::silicon_111_reference(1e-3)
    }

    #[test]
    fn pendellosung_scalings() {
        let s = reference();
        let mut f2 = s;
        f2.structure_factor *= 2.0;
        assert_relative_eq!(pendellosung_period(&f2), 0.5 * pendellosung_period(&s), max_relative = 1e-14);
        let mut steep = s;
        steep.bragg_angle = FRAC_PI_2 - 1e-9;
        assert!(pendellosung_period(&steep) < 1e-12);
    }

    #[test]
    fn silicon_regression_baseline() {
        // Si(111), λ = 4.43 Å, θ_B = 44.9°, no Debye-Waller factor.
        let s = reference();
        assert_relative_eq!(pendellosung_period(&s), 3.428_492_878e-5, max_relative = 1e-8);
        let arcsec = darwin_width(&s).to_degrees() * 3600.0;
        assert!(arcsec > 0.5 && arcsec < 5.0, "{arcsec}");
        assert_relative_eq!(arcsec, 1.887_872_09, max_relative = 1e-8);
    }

    #[test]
    fn darwin_pendellosung_identity() {
        let s = reference();
        let lhs = darwin_width(&s) * pendellosung_period(&s);
        let rhs = s.wavelength * s.bragg_angle.cos() / (2.0 * s.bragg_angle).sin().powi(2);
        assert_relative_eq!(lhs, rhs, max_relative = 1e-14);
        let mut long = s;
        long.wavelength *= 2.0;
        assert_relative_eq!(darwin_width(&long), 4.0 * darwin_width(&s), max_relative = 1e-14);
    }

    #[test]
    fn displacement_cases() {
        assert_relative_eq!(backface_displacement(1e-3, 45f64.to_radians()), 2e-3, max_relative = 1e-14);
        assert_eq!(backface_displacement(0.0, 0.7), 0.0);
    }

    #[test]
    fn five_thousand_columns() {
        let base = CrystalSpec::silicon_111_at(1.0, 2.0e-10);
        let spec = base.with_thickness(100.0 * pendellosung_period(&base));
        let sim = sim_from_crystal(&spec, Resolution::Gamma(PI / 100.0)).unwrap();
        assert_eq!(sim.layers, 5000);
        assert_relative_eq!(sim.layers as f64 * sim.gamma, FRAC_PI_2 * 100.0, max_relative = 1e-12);
        assert!(sim.residuals(&spec).max() < 1e-12);
    }

    #[test]
    fn reference_layer_count() {
        let s = reference();
        let sim = sim_from_crystal(&s, Resolution::Gamma(PI / 50.0)).unwrap();
        assert_eq!(sim.layers, (25.0 * s.thickness_ratio()).round() as u64);
    }

    #[test]
    fn round_trip() {
        let s = reference();
        let sim = sim_from_crystal(&s, Resolution::Layers(1234)).unwrap();
        let back = crystal_from_sim(&sim, &s);
        assert_relative_eq!(back.thickness, s.thickness, max_relative = 1e-12);
        assert_relative_eq!(back.bragg_angle, s.bragg_angle, max_relative = 1e-12);
    }

    #[test]
    fn errors() {
        let s = reference();
        assert_eq!(sim_from_crystal(&s, Resolution::Layers(0)), Err(ParamError::NoLayers));
        assert!(matches!(sim_from_crystal(&s, Resolution::Gamma(2.0)), Err(ParamError::GammaRange(_))));
        match sim_from_crystal(&s, Resolution::Layers(3)) {
            Err(ParamError::TooThick { min_layers, .. }) => {
                let needed = (s.thickness_ratio()).ceil() as u64;
                assert_eq!(min_layers, needed);
            }
            other => panic!("{other:?}"),
        }
        let mut bad = s;
        bad.thickness = -1.0;
        assert_eq!(bad.validate(), Err(ParamError::NonPositive { field: "D", value: -1.0 }));
        let mut off = s;
        off.wavelength *= 1.1;
        assert!(matches!(off.validate().unwrap()[..], [SpecWarning::BraggMismatch { .. }]));
    }
}
