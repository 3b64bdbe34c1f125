//! Crystal layouts: Laue slab, Bragg slab with front-face detector, slab
//! with a tilted end face, and the corner arrangement.
//!
//! Bragg-family lattices use rows as depth below the entrance face. Row 0
//! is a detector catching down-going amplitude that leaves through the
//! front face, rows `1..=h+1` hold crystal heights `0..=h`, and row `h+2`
//! catches amplitude escaping through the back face. The beam enters at
//! column 0, height 0. Detector coordinates count the column of the last
//! crystal node on the path, so a Dyck walk of half-length `n` exits at
//! coordinate `2n`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{
    Detector, DetectorAxis, Direction, DirectionFilter, FieldHistory, GridError, LatticeGeometry, NodeKind,
    StateVector, UnitaryParams,
};
use crate::params::SimParams;
use crate::profile::{PositionUnit, ProfileSeries};

pub const MIN_FACE_ANGLE: f64 = 85.0;
pub const MAX_FACE_ANGLE: f64 = 95.0;

pub const FRONT_DETECTOR: &str = "front";
pub const BACK_DETECTOR: &str = "back";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("back-face angle {0}° outside [{MIN_FACE_ANGLE}°, {MAX_FACE_ANGLE}°]")]
    FaceAngle(f64),
    #[error("entry offset {offset} m must be non-negative and below the face length {face_length} m")]
    EntryOffset { offset: f64, face_length: f64 },
    #[error("{0} must be positive")]
    Empty(&'static str),
    #[error("crystal needs {needed} rows but the grid has {rows}")]
    CrystalExceedsGrid { needed: usize, rows: usize },
    #[error("Laue slabs have no front-face reflection points")]
    NotBraggFamily,
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GeometryKind {
    Laue,
    Bragg,
    MixedTiltedFace,
    Corner,
}

/// Vacuum margins around the crystal, in lattice cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Padding {
    #[serde(default)]
    pub before: usize,
    #[serde(default)]
    pub after: usize,
    #[serde(default)]
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub kind: GeometryKind,
    /// Laue: node columns (`2n+1` for `n` bi-layers). Bragg and tilted:
    /// front-face length from entry to corner, in columns.
    pub n_columns: usize,
    /// Bragg family: deepest crystal height `h`; the slab is `h+1` rows deep.
    #[serde(default)]
    pub crystal_height_nodes: usize,
    /// Interior angle between the front face and the end face, degrees.
    #[serde(default = "right_angle")]
    pub back_face_angle: f64,
    /// Corner: distance from the entry point to the corner, meters.
    #[serde(default)]
    pub entry_offset: f64,
    /// Corner: full front-face length, meters.
    #[serde(default)]
    pub face_length: Option<f64>,
    #[serde(default)]
    pub padding: Padding,
    /// Explicit row count; derived from the crystal when absent.
    #[serde(default)]
    pub grid_rows: Option<usize>,
}

fn right_angle() -> f64 {
    90.0
}

impl GeometrySpec {
    pub fn laue(n_columns: usize) -> Self {
        Self {
            kind: GeometryKind::Laue,
            n_columns,
            crystal_height_nodes: 0,
            back_face_angle: 90.0,
            entry_offset: 0.0,
            face_length: None,
            padding: Padding::default(),
            grid_rows: None,
        }
    }

    /// Slab of `layers` bi-layers.
    pub fn laue_layers(layers: usize) -> Self {
        Self::laue(2 * layers + 1)
    }

    pub fn bragg(face_columns: usize, height: usize) -> Self {
        Self { kind: GeometryKind::Bragg, crystal_height_nodes: height, ..Self::laue(face_columns) }
    }

    pub fn tilted(face_columns: usize, height: usize, angle_deg: f64) -> Self {
        Self { kind: GeometryKind::MixedTiltedFace, back_face_angle: angle_deg, ..Self::bragg(face_columns, height) }
    }

    pub fn corner(height: usize, entry_offset: f64, angle_deg: f64) -> Self {
        Self { kind: GeometryKind::Corner, entry_offset, ..Self::tilted(0, height, angle_deg) }
    }

    /// Tilted slab sized from physical lengths: depth `thickness`, front
    /// face `face_length` from the entry point. Heights `0..=h` span
    /// `h+1` rows, so the depth is `(h+1)` row pitches.
    pub fn tilted_physical(sim: &SimParams, thickness: f64, face_length: f64, angle_deg: f64) -> Self {
        let h = ((thickness / sim.row_pitch()).round() as usize).max(2) - 1;
        let l = (face_length / sim.column_pitch()).round() as usize;
        Self::tilted(l, h, angle_deg)
    }

    pub fn with_angle(&self, angle_deg: f64) -> Self {
        Self { back_face_angle: angle_deg, ..self.clone() }
    }

    pub fn is_bragg_family(&self) -> bool {
        self.kind != GeometryKind::Laue
    }

    fn effective_angle(&self) -> f64 {
        match self.kind {
            GeometryKind::MixedTiltedFace | GeometryKind::Corner => self.back_face_angle,
            _ => 90.0,
        }
    }

    fn validate(&self, sim: &SimParams) -> Result<(), GeometryError> {
        if !(MIN_FACE_ANGLE..=MAX_FACE_ANGLE).contains(&self.effective_angle()) {
            return Err(GeometryError::FaceAngle(self.back_face_angle));
        }
        match self.kind {
            GeometryKind::Laue if self.n_columns == 0 => return Err(GeometryError::Empty("n_columns")),
            GeometryKind::Bragg | GeometryKind::MixedTiltedFace if self.n_columns == 0 => {
                return Err(GeometryError::Empty("n_columns"))
            }
            GeometryKind::Corner => {
                let face = self.face_length.unwrap_or(f64::INFINITY);
                if !(self.entry_offset >= 0.0 && self.entry_offset < face) {
                    return Err(GeometryError::EntryOffset { offset: self.entry_offset, face_length: face });
                }
                if (self.entry_offset / sim.column_pitch()).round() < 1.0 {
                    return Err(GeometryError::Empty("entry_offset"));
                }
            }
            _ => {}
        }
        if self.is_bragg_family() && self.crystal_height_nodes == 0 {
            return Err(GeometryError::Empty("crystal_height_nodes"));
        }
        Ok(())
    }

    /// Corner column `C` relative to the entry.
    fn corner_column(&self, sim: &SimParams) -> f64 {
        match self.kind {
            GeometryKind::Corner => (self.entry_offset / sim.column_pitch()).round(),
            _ => self.n_columns as f64,
        }
    }
}

/// A built lattice together with the bookkeeping needed to read it out.
#[derive(Debug, Clone)]
pub struct BuiltGeometry {
    pub spec: GeometrySpec,
    pub sim: SimParams,
    pub lattice: LatticeGeometry,
    /// Column of the entry node.
    pub entry_column: usize,
    /// Bragg family: first vacuum column at each crystal height.
    pub face_columns: Vec<usize>,
    corner: f64,
    cot_face: f64,
}

/// Lay out `spec` on a lattice with node strength `sim.gamma`.
pub fn build(spec: &GeometrySpec, sim: &SimParams) -> Result<BuiltGeometry, GeometryError> {
    spec.validate(sim)?;
    let crystal = NodeKind::Crystal(UnitaryParams::new(sim.gamma));
    let pad = spec.padding;
    if spec.kind == GeometryKind::Laue {
        let columns = pad.before + spec.n_columns + pad.after;
        let needed = 2 * columns + 3;
        let rows = spec.grid_rows.unwrap_or(needed + 2 * pad.rows);
        if rows < needed {
            return Err(GeometryError::CrystalExceedsGrid { needed, rows });
        }
        let lattice = LatticeGeometry::from_fn(columns, rows, rows / 2, |c, _| {
            if c >= pad.before && c < pad.before + spec.n_columns { crystal } else { NodeKind::Vacuum }
        })?;
        return Ok(BuiltGeometry {
            spec: spec.clone(),
            sim: *sim,
            lattice,
            entry_column: pad.before,
            face_columns: Vec::new(),
            corner: 0.0,
            cot_face: 0.0,
        });
    }

    let h = spec.crystal_height_nodes;
    let corner = spec.corner_column(sim);
    let cot_face = 1.0 / spec.effective_angle().to_radians().tan();
    let aspect = sim.dz / sim.dx;
    let face = |y: usize| corner - y as f64 * aspect * cot_face;
    let face_columns: Vec<usize> = (0..=h).map(|y| (face(y) - 0.5).ceil().max(0.0) as usize).collect();
    let needed = h + 3;
    let rows = spec.grid_rows.unwrap_or(needed);
    if rows < needed {
        return Err(GeometryError::CrystalExceedsGrid { needed, rows });
    }
    let widest = *face_columns.iter().max().unwrap();
    let columns = pad.before + widest + h + 3 + pad.after;
    let lattice = LatticeGeometry::from_fn(columns, rows, 1, |c, r| {
        if r >= 1 && r <= h + 1 && c >= pad.before && c - pad.before < face_columns[r - 1] {
            crystal
        } else {
            NodeKind::Vacuum
        }
    })?
    .with_detector(Detector::new(FRONT_DETECTOR, 0..columns, 0..1, DirectionFilter::Reflected, DetectorAxis::Column))?
    .with_detector(Detector::new(
        BACK_DETECTOR,
        0..columns,
        h + 2..rows,
        DirectionFilter::Transmitted,
        DetectorAxis::Column,
    ))?;
    Ok(BuiltGeometry {
        spec: spec.clone(),
        sim: *sim,
        lattice,
        entry_column: pad.before,
        face_columns,
        corner,
        cot_face,
    })
}

/// Labeled geometric reflection point in detector coordinates and meters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionPoint {
    pub label: &'static str,
    pub coordinate: f64,
    pub position: f64,
}

/// Predicted peak positions: A (entry), B (one back-face bounce), C (the
/// front corner) and D (the ray from the back corner). B sits `2(h+1)`
/// columns from A, i.e. `2t/tan θ_B` for depth `t = (h+1)·Δz/2`.
pub fn reflection_points(spec: &GeometrySpec, sim: &SimParams) -> Result<Vec<ReflectionPoint>, GeometryError> {
    if !spec.is_bragg_family() {
        return Err(GeometryError::NotBraggFamily);
    }
    spec.validate(sim)?;
    let depth = spec.crystal_height_nodes as f64 + 1.0;
    let corner = spec.corner_column(sim);
    let cot = 1.0 / spec.effective_angle().to_radians().tan();
    let d = corner - depth * (sim.dz / sim.dx) * cot + depth;
    let pitch = sim.column_pitch();
    Ok([("A", 0.0), ("B", 2.0 * depth), ("C", corner), ("D", d)]
        .into_iter()
        .map(|(label, coordinate)| ReflectionPoint { label, coordinate, position: coordinate * pitch })
        .collect())
}

impl BuiltGeometry {
    /// Unit amplitude at the entrance node.
    pub fn initial_state(&self) -> StateVector {
        StateVector::delta(self.lattice.rows(), self.lattice.entry_row(), Direction::Transmitted)
    }

    /// Front-face detector intensity against detector coordinate.
    pub fn front_profile(&self, history: &FieldHistory) -> Option<ProfileSeries> {
        self.detector_profile(history, FRONT_DETECTOR)
    }

    pub fn back_profile(&self, history: &FieldHistory) -> Option<ProfileSeries> {
        self.detector_profile(history, BACK_DETECTOR)
    }

    fn detector_profile(&self, history: &FieldHistory, label: &str) -> Option<ProfileSeries> {
        let rec = history.detector(label)?;
        let origin = (self.entry_column + 1) as f64;
        let positions = (rec.first..rec.first + rec.intensity.len()).skip(1).map(|c| c as f64 - origin).collect();
        ProfileSeries::new(
            label,
            PositionUnit::LatticeIndex { meters_per_index: Some(self.sim.column_pitch()) },
            positions,
            rec.intensity[1..].to_vec(),
        )
        .ok()
    }

    /// End-face angle realised by the staircase, from a least-squares line
    /// through the boundary columns. `None` for Laue slabs.
    pub fn fitted_face_angle(&self) -> Option<f64> {
        if self.face_columns.len() < 2 {
            return None;
        }
        let n = self.face_columns.len() as f64;
        let ys = (0..self.face_columns.len()).map(|y| y as f64);
        let my = ys.clone().sum::<f64>() / n;
        let mc = self.face_columns.iter().map(|&c| c as f64).sum::<f64>() / n;
        let (mut sxy, mut syy) = (0.0, 0.0);
        for (y, &c) in ys.zip(&self.face_columns) {
            sxy += (y - my) * (c as f64 - mc);
            syy += (y - my) * (y - my);
        }
        let slope = sxy / syy;
        let cot = -slope / (self.sim.dz / self.sim.dx);
        Some(90.0 - cot.atan().to_degrees())
    }

    /// Requested end-face cotangent and corner column, for diagnostics.
    pub fn face_line(&self) -> (f64, f64) {
        (self.corner, self.cot_face)
    }
}
