//! Column-by-column propagation through a lattice of unitary nodes.
//!
//! Each node maps its input pair `(α, β)` (transmitted, reflected) through
//!
//! ```text
//! α' = t_a α + r_b β      routed one row up
//! β' = r_a α + t_b β      routed one row down
//! ```
//!
//! so a column operator is a node-wise 2×2 map followed by a shift. It is
//! never materialised as a matrix. Rows of the same parity as the column
//! are occupied, giving the staggered Galton-board lattice; a slab of `n`
//! bi-layers uses `2n+1` node columns and its exit node `p` sits at row
//! offset `2p` from the entry.

mod engine;
mod grid;
mod scan;
mod unitary;

pub use engine::{
    apply_column, exit_profiles, propagate, propagate_with, DetectorRecord, EngineError,
    FieldHistory, FieldMaps, PropagateOptions, StateVector,
};
pub use grid::{Detector, DetectorAxis, DirectionFilter, GridError, LatticeGeometry, NodeKind, Span};
pub use scan::{integrated_intensity_scan, PendellosungScan, ScanError};
pub use unitary::{node_unitary, unitary_sin_cos, UNITARY_ADJUST_LIMIT, NodeCoefficients, UnitaryParams};

/// Travel direction of an amplitude component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Direction {
    /// Up-going, the incident ("a") direction.
    Transmitted,
    /// Down-going, the diffracted ("b") direction.
    Reflected,
}
