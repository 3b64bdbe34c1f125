//! Reference solutions used to check the propagation engine: closed-form
//! path sums, their Bessel limits, spherical-wave Takagi-Taupin intensities
//! and a finite-difference integrator of the amplitude equations.

mod bessel;
mod bragg;
mod exact;
mod laue;
mod pde;
mod tt;

use thiserror::Error;

pub use bessel::{j0, j1, J0_FIRST_ZERO};
pub use bragg::{bragg_amplitude_bounded, bragg_amplitude_exact, bragg_front_intensity, bragg_weighted_dyck_sum};
pub use exact::EXACT_LIMIT;
pub use laue::{
    limit_intensity_diffracted, limit_intensity_transmitted, path_weight, qi_amplitude_diffracted,
    qi_amplitude_transmitted, qi_exit_amplitudes, weighted_path_sum, ExitBeam,
};
pub use pde::{tt_integrate_pde, PdeFields, PdeSolution, MAX_STORED_RESOLUTION, MIN_STEPS_PER_PERIOD};
pub use tt::{tt_intensity_diffracted, tt_intensity_transmitted};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("front-face intensity is singular at n = {n}; exits start at n = 1")]
    BraggOrigin { n: f64 },
    #[error("{steps_per_period:.1} grid steps per Pendellösung length, need at least {min}")]
    Resolution { steps_per_period: f64, min: f64 },
    #[error("thickness ratio {0} must be finite and non-negative")]
    Thickness(f64),
    #[error("storing full fields at resolution {resolution} exceeds the limit {max}")]
    FieldStorage { resolution: usize, max: usize },
}
