//! Quantum-information lattice model of neutron dynamical diffraction.
//!
//! A perfect crystal is represented as a Galton board of 2×2 unitary
//! scatterers. A neutron entering through a narrow slit is propagated
//! column by column; the amplitudes leaving the lattice reproduce the
//! spherical-wave solutions of the Takagi-Taupin equations in the Laue
//! case and the Bragg / mixed Laue-Bragg reflection profiles measured
//! with a scanning slit.
//!
//! The crate is organised by capability:
//!
//! - [`pathcomb`]: exact lattice-path counts (binomial, Catalan, Narayana,
//!   height-bounded Dyck paths) with a brute-force enumerator.
//! - [`lattice`]: the propagation engine.
//! - [`oracles`]: closed-form amplitudes, Bessel limits, Takagi-Taupin
//!   intensities and an independent finite-difference integrator.
//! - [`params`]: physical ↔ simulation parameter mapping.
//! - [`geometry`]: Laue, Bragg, tilted-face and corner crystal builders.
//! - [`compare`]: convolution, goodness of fit and the end-face angle fit.
//! - [`cli`]: configuration-driven runs with CSV/JSON outputs.
//!
//! See `examples/` for one runnable program per capability.

pub mod cli;
pub mod compare;
pub mod geometry;
pub mod lattice;
pub mod oracles;
pub mod params;
pub mod pathcomb;
pub mod profile;

pub use lattice::{
    apply_column, exit_profiles, propagate, Direction, FieldHistory, LatticeGeometry, NodeKind,
    PropagateOptions, StateVector, UnitaryParams,
};
pub use params::{CrystalSpec, SimParams};
pub use profile::ProfileSeries;
