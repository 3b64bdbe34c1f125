use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::unitary::{NodeCoefficients, UnitaryParams};
use super::Direction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("lattice needs at least one column and two rows (got {columns}×{rows})")]
    Degenerate { columns: usize, rows: usize },
    #[error("entry row {row} outside 0..{rows}")]
    EntryRow { row: usize, rows: usize },
    #[error("node parameters at column {column}, row {row} are invalid (γ must lie in [0, π/2])")]
    InvalidNode { column: usize, row: usize },
    #[error("detector `{label}` exceeds the lattice bounds")]
    DetectorBounds { label: String },
    #[error("detector `{label}` overlaps a crystal node at column {column}, row {row}")]
    DetectorOnCrystal { label: String, column: usize, row: usize },
    #[error("detector `{label}` is empty")]
    EmptyDetector { label: String },
}

/// What sits at a lattice site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NodeKind {
    Crystal(UnitaryParams),
    /// Transparent site, equivalent to a crystal node with γ = 0.
    Vacuum,
}

impl NodeKind {
    pub fn coefficients(&self) -> NodeCoefficients {
        match self {
            NodeKind::Crystal(p) => p.coefficients(),
            NodeKind::Vacuum => NodeCoefficients::TRANSPARENT,
        }
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self, NodeKind::Vacuum)
    }
}

/// A run of rows `[start, end)` in one column holding the same node kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub kind: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DirectionFilter {
    Transmitted,
    Reflected,
    Both,
}

impl DirectionFilter {
    pub fn accepts(&self, d: Direction) -> bool {
        matches!(
            (self, d),
            (DirectionFilter::Both, _)
                | (DirectionFilter::Transmitted, Direction::Transmitted)
                | (DirectionFilter::Reflected, Direction::Reflected)
        )
    }
}

/// Which coordinate a detector bins its absorbed intensity by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DetectorAxis {
    Column,
    Row,
}

/// An absorbing vacuum region. Amplitude arriving at a cell inside the
/// region with an accepted direction is removed from the state and its
/// intensity added to the bin of that cell's column (or row).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub label: String,
    pub columns: Range<usize>,
    pub rows: Range<usize>,
    pub accepts: DirectionFilter,
    pub axis: DetectorAxis,
}

impl Detector {
    pub fn new(
        label: impl Into<String>,
        columns: Range<usize>,
        rows: Range<usize>,
        accepts: DirectionFilter,
        axis: DetectorAxis,
    ) -> Self {
        Self { label: label.into(), columns, rows, accepts, axis }
    }

    pub fn bins(&self) -> Range<usize> {
        match self.axis {
            DetectorAxis::Column => self.columns.clone(),
            DetectorAxis::Row => self.rows.clone(),
        }
    }
}

/// Node layout of a lattice, stored as per-column row spans over a small
/// palette of distinct node kinds.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGeometry {
    columns: usize,
    rows: usize,
    entry_row: usize,
    palette: Vec<NodeKind>,
    coefficients: Vec<NodeCoefficients>,
    spans: Vec<Vec<Span>>,
    detectors: Vec<Detector>,
}

impl LatticeGeometry {
    /// Every site holds `kind`.
    pub fn uniform(columns: usize, rows: usize, entry_row: usize, kind: NodeKind) -> Result<Self, GridError> {
        Self::from_fn(columns, rows, entry_row, |_, _| kind)
    }

    /// Build a layout by evaluating `f(column, row)` at every site.
    pub fn from_fn(
        columns: usize,
        rows: usize,
        entry_row: usize,
        mut f: impl FnMut(usize, usize) -> NodeKind,
    ) -> Result<Self, GridError> {
        if columns == 0 || rows < 2 {
            return Err(GridError::Degenerate { columns, rows });
        }
        if entry_row >= rows {
            return Err(GridError::EntryRow { row: entry_row, rows });
        }
        let mut palette: Vec<NodeKind> = Vec::new();
        let mut spans = Vec::with_capacity(columns);
        for column in 0..columns {
            let mut col: Vec<Span> = Vec::new();
            for row in 0..rows {
                let kind = f(column, row);
                if let NodeKind::Crystal(p) = kind {
                    if !p.is_valid() {
                        return Err(GridError::InvalidNode { column, row });
                    }
                }
                let id = match palette.iter().position(|k| *k == kind) {
                    Some(i) => i,
                    None => {
                        palette.push(kind);
                        palette.len() - 1
                    }
                };
                match col.last_mut() {
                    Some(s) if s.kind == id => s.end = row + 1,
                    _ => col.push(Span { start: row, end: row + 1, kind: id }),
                }
            }
            spans.push(col);
        }
        let coefficients = palette.iter().map(NodeKind::coefficients).collect();
        Ok(Self { columns, rows, entry_row, palette, coefficients, spans, detectors: Vec::new() })
    }

    /// Add an absorbing region; it must lie inside the grid on vacuum sites.
    pub fn add_detector(&mut self, detector: Detector) -> Result<(), GridError> {
        let label = detector.label.clone();
        if detector.columns.is_empty() || detector.rows.is_empty() {
            return Err(GridError::EmptyDetector { label });
        }
        if detector.columns.end > self.columns || detector.rows.end > self.rows {
            return Err(GridError::DetectorBounds { label });
        }
        for column in detector.columns.clone() {
            for row in detector.rows.clone() {
                if !self.node(column, row).is_vacuum() {
                    return Err(GridError::DetectorOnCrystal { label, column, row });
                }
            }
        }
        self.detectors.push(detector);
        Ok(())
    }

    pub fn with_detector(mut self, detector: Detector) -> Result<Self, GridError> {
        self.add_detector(detector)?;
        Ok(self)
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn entry_row(&self) -> usize {
        self.entry_row
    }

    pub fn detectors(&self) -> &[Detector] {
        &self.detectors
    }

    pub fn spans(&self, column: usize) -> &[Span] {
        &self.spans[column]
    }

    pub fn palette(&self) -> &[NodeKind] {
        &self.palette
    }

    pub(crate) fn span_coefficients(&self, span: &Span) -> &NodeCoefficients {
        &self.coefficients[span.kind]
    }

    pub fn node(&self, column: usize, row: usize) -> NodeKind {
        let col = &self.spans[column];
        let i = col.partition_point(|s| s.end <= row);
        self.palette[col[i].kind]
    }

    pub fn is_crystal(&self, column: usize, row: usize) -> bool {
        !self.node(column, row).is_vacuum()
    }

    pub fn crystal_sites(&self) -> usize {
        self.spans
            .iter()
            .flatten()
            .filter(|s| !self.palette[s.kind].is_vacuum())
            .map(|s| s.end - s.start)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_compress_runs() {
        let g = LatticeGeometry::from_fn(3, 10, 5, |c, r| {
            if r >= 2 && r < 6 + c {
                NodeKind::Crystal(UnitaryParams::new(0.2))
            } else {
                NodeKind::Vacuum
            }
        })
        .unwrap();
        assert_eq!(g.palette().len(), 2);
        assert_eq!(g.spans(0).len(), 3);
        assert_eq!(g.spans(2), &[Span { start: 0, end: 2, kind: 0 }, Span { start: 2, end: 8, kind: 1 }, Span { start: 8, end: 10, kind: 0 }]);
        assert!(g.is_crystal(1, 6) && !g.is_crystal(1, 7));
        assert_eq!(g.crystal_sites(), 4 + 5 + 6);
    }

    #[test]
    fn detector_validation() {
        let mut g = LatticeGeometry::from_fn(4, 6, 3, |c, _| {
            if c < 2 { NodeKind::Crystal(UnitaryParams::new(0.5)) } else { NodeKind::Vacuum }
        })
        .unwrap();
        let on = Detector::new("d", 1..3, 0..6, DirectionFilter::Both, DetectorAxis::Row);
        assert!(matches!(g.add_detector(on), Err(GridError::DetectorOnCrystal { column: 1, .. })));
        let out = Detector::new("d", 2..5, 0..6, DirectionFilter::Both, DetectorAxis::Row);
        assert!(matches!(g.add_detector(out), Err(GridError::DetectorBounds { .. })));
        let ok = Detector::new("d", 3..4, 0..6, DirectionFilter::Both, DetectorAxis::Row);
        assert!(g.add_detector(ok).is_ok());
    }

    #[test]
    fn rejects_bad_nodes_and_shapes() {
        assert!(matches!(LatticeGeometry::uniform(0, 4, 0, NodeKind::Vacuum), Err(GridError::Degenerate { .. })));
        assert!(matches!(LatticeGeometry::uniform(2, 4, 4, NodeKind::Vacuum), Err(GridError::EntryRow { .. })));
        let bad = NodeKind::Crystal(UnitaryParams::with_phases(2.0, 0.0, 0.0));
        assert!(matches!(LatticeGeometry::uniform(2, 4, 0, bad), Err(GridError::InvalidNode { column: 0, row: 0 })));
    }
}
