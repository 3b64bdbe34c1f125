use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::grid::{DetectorAxis, LatticeGeometry};
use super::Direction;
use crate::profile::ProfileSeries;

const PAR_MIN_ROWS: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("column {column} outside 0..{columns}")]
    ColumnOutOfRange { column: usize, columns: usize },
    #[error("state has {got} rows but the lattice has {expected}")]
    StateSize { expected: usize, got: usize },
    #[error("initial state has norm² {norm}, expected 1")]
    NotNormalized { norm: f64 },
    #[error(
        "amplitude left the lattice at column {column} through the {edge} edge (intensity {intensity:e}); \
         enlarge the grid or allow boundary loss"
    )]
    BoundaryHit { column: usize, edge: &'static str, intensity: f64 },
    #[error("state became non-finite at column {column}")]
    NonFinite { column: usize },
}

/// Amplitudes entering a column, interleaved as `(α_0, β_0, α_1, β_1, ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    entries: Vec<Complex64>,
}

impl StateVector {
    pub fn zeros(rows: usize) -> Self {
        Self { entries: vec![Complex64::new(0.0, 0.0); 2 * rows] }
    }

    /// Unit amplitude at one row travelling in one direction.
    pub fn delta(rows: usize, row: usize, direction: Direction) -> Self {
        let mut s = Self::zeros(rows);
        s.set(row, direction, Complex64::new(1.0, 0.0));
        s
    }

    /// Interleaved entries; the length must be even.
    pub fn from_entries(entries: Vec<Complex64>) -> Self {
        assert!(entries.len().is_multiple_of(2), "interleaved state needs an even length");
        Self { entries }
    }

    pub fn rows(&self) -> usize {
        self.entries.len() / 2
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn alpha(&self, row: usize) -> Complex64 {
        self.entries[2 * row]
    }

    pub fn beta(&self, row: usize) -> Complex64 {
        self.entries[2 * row + 1]
    }

    pub fn get(&self, row: usize, direction: Direction) -> Complex64 {
        match direction {
            Direction::Transmitted => self.alpha(row),
            Direction::Reflected => self.beta(row),
        }
    }

    pub fn set(&mut self, row: usize, direction: Direction, value: Complex64) {
        let i = 2 * row + usize::from(direction == Direction::Reflected);
        self.entries[i] = value;
    }

    pub fn norm_sqr(&self) -> f64 {
        compensated_sum(self.entries.iter().map(|a| a.norm_sqr()))
    }

    pub fn transmitted_intensity(&self) -> f64 {
        compensated_sum(self.entries.iter().step_by(2).map(|a| a.norm_sqr()))
    }

    pub fn reflected_intensity(&self) -> f64 {
        compensated_sum(self.entries.iter().skip(1).step_by(2).map(|a| a.norm_sqr()))
    }
}

/// Neumaier summation.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let next = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - next) + v } else { (v - next) + sum };
        sum = next;
    }
    sum + comp
}

/// Intensity absorbed by one detector, binned along its axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectorRecord {
    pub label: String,
    pub axis: DetectorAxis,
    /// Lattice coordinate of `intensity[0]`.
    pub first: usize,
    pub intensity: Vec<f64>,
}

impl DetectorRecord {
    pub fn total(&self) -> f64 {
        self.intensity.iter().sum()
    }

    /// The record as a series on raw lattice coordinates.
    pub fn profile(&self) -> ProfileSeries {
        ProfileSeries::on_lattice(self.label.clone(), self.first as i64, self.intensity.clone())
            .expect("detector intensities are finite and non-negative")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagateOptions {
    /// Tally amplitude that leaves through the top or bottom edge instead
    /// of failing.
    pub allow_boundary_loss: bool,
    /// Intensity below which an edge crossing is ignored.
    pub boundary_tolerance: f64,
    /// Reject initial states whose norm differs from one.
    pub require_normalized: bool,
    /// Record intensity maps every `n` columns, summed over blocks of `n` rows.
    pub field_stride: Option<usize>,
    pub parallel: bool,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            allow_boundary_loss: false,
            boundary_tolerance: 1e-30,
            require_normalized: true,
            field_stride: None,
            parallel: true,
        }
    }
}

impl PropagateOptions {
    pub fn with_fields(mut self, stride: usize) -> Self {
        self.field_stride = Some(stride.max(1));
        self
    }

    pub fn allowing_loss(mut self) -> Self {
        self.allow_boundary_loss = true;
        self
    }

    pub fn sequential(mut self) -> Self {
        self.parallel = false;
        self
    }
}

/// Coarse intensity maps of the propagating field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldMaps {
    pub stride: usize,
    /// Number of columns applied before each snapshot.
    pub snapshot_columns: Vec<usize>,
    /// First row of each row block.
    pub row_blocks: Vec<usize>,
    /// Row-major `[snapshot][block]` intensities of the up-going field.
    pub transmitted: Vec<f64>,
    pub reflected: Vec<f64>,
}

impl FieldMaps {
    fn new(stride: usize, rows: usize) -> Self {
        Self {
            stride,
            snapshot_columns: Vec::new(),
            row_blocks: (0..rows).step_by(stride).collect(),
            transmitted: Vec::new(),
            reflected: Vec::new(),
        }
    }

    fn record(&mut self, applied: usize, state: &StateVector) {
        self.snapshot_columns.push(applied);
        let rows = state.rows();
        for &start in &self.row_blocks {
            let end = (start + self.stride).min(rows);
            self.transmitted.push((start..end).map(|r| state.alpha(r).norm_sqr()).sum());
            self.reflected.push((start..end).map(|r| state.beta(r).norm_sqr()).sum());
        }
    }
}

/// Everything recorded during a propagation.
#[derive(Debug, Clone)]
pub struct FieldHistory {
    pub columns: usize,
    pub rows: usize,
    pub entry_row: usize,
    /// `state + absorbed + lost` intensity before column 0 and after each column.
    pub column_totals: Vec<f64>,
    pub absorbed: f64,
    pub lost: f64,
    pub detectors: Vec<DetectorRecord>,
    pub final_state: StateVector,
    pub maps: Option<FieldMaps>,
}

impl FieldHistory {
    pub fn detector(&self, label: &str) -> Option<&DetectorRecord> {
        self.detectors.iter().find(|d| d.label == label)
    }

    /// Largest deviation of the running total from its initial value.
    pub fn max_norm_drift(&self) -> f64 {
        let first = self.column_totals[0];
        self.column_totals.iter().map(|t| (t - first).abs()).fold(0.0, f64::max)
    }
}

/// Result of a single column application.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnOutcome {
    pub state: StateVector,
    pub absorbed: f64,
    pub lost: f64,
}

struct Workspace {
    out: Vec<Complex64>,
    absorbers: Vec<Vec<(usize, usize, usize)>>,
}

impl Workspace {
    fn new(geometry: &LatticeGeometry) -> Self {
        let mut absorbers = vec![Vec::new(); geometry.columns()];
        for (d, det) in geometry.detectors().iter().enumerate() {
            for c in det.columns.clone() {
                absorbers[c].push((d, det.rows.start, det.rows.end));
            }
        }
        Self { out: vec![Complex64::new(0.0, 0.0); 2 * geometry.rows()], absorbers }
    }
}

fn new_records(geometry: &LatticeGeometry) -> Vec<DetectorRecord> {
    geometry
        .detectors()
        .iter()
        .map(|d| {
            let bins = d.bins();
            DetectorRecord { label: d.label.clone(), axis: d.axis, first: bins.start, intensity: vec![0.0; bins.len()] }
        })
        .collect()
}

fn step(
    state: &mut [Complex64],
    ws: &mut Workspace,
    geometry: &LatticeGeometry,
    column: usize,
    options: &PropagateOptions,
    records: &mut [DetectorRecord],
) -> Result<(f64, f64), EngineError> {
    let rows = geometry.rows();
    let mut absorbed = 0.0;
    for &(d, lo, hi) in &ws.absorbers[column] {
        let det = &geometry.detectors()[d];
        let rec = &mut records[d];
        for r in lo..hi {
            let mut hit = 0.0;
            if det.accepts.accepts(Direction::Transmitted) {
                hit += state[2 * r].norm_sqr();
                state[2 * r] = Complex64::new(0.0, 0.0);
            }
            if det.accepts.accepts(Direction::Reflected) {
                hit += state[2 * r + 1].norm_sqr();
                state[2 * r + 1] = Complex64::new(0.0, 0.0);
            }
            if hit > 0.0 {
                let bin = match det.axis {
                    DetectorAxis::Column => column,
                    DetectorAxis::Row => r,
                };
                rec.intensity[bin - rec.first] += hit;
                absorbed += hit;
            }
        }
    }

    let out = &mut ws.out;
    for span in geometry.spans(column) {
        let coef = geometry.span_coefficients(span);
        let src = &state[2 * span.start..2 * span.end];
        let dst = &mut out[2 * span.start..2 * span.end];
        let node = |(o, i): (&mut [Complex64], &[Complex64])| {
            let (a, b) = coef.apply(i[0], i[1]);
            o[0] = a;
            o[1] = b;
        };
        if options.parallel && span.end - span.start >= PAR_MIN_ROWS {
            dst.par_chunks_mut(2).zip(src.par_chunks(2)).with_min_len(512).for_each(node);
        } else {
            dst.chunks_mut(2).zip(src.chunks(2)).for_each(node);
        }
    }

    let top = out[2 * (rows - 1)].norm_sqr();
    let bottom = out[1].norm_sqr();
    for (edge, intensity) in [("top", top), ("bottom", bottom)] {
        if intensity > options.boundary_tolerance && !options.allow_boundary_loss {
            return Err(EngineError::BoundaryHit { column, edge, intensity });
        }
    }
    state[0] = Complex64::new(0.0, 0.0);
    for r in 1..rows {
        state[2 * r] = out[2 * (r - 1)];
    }
    for r in 0..rows - 1 {
        state[2 * r + 1] = out[2 * (r + 1) + 1];
    }
    state[2 * rows - 1] = Complex64::new(0.0, 0.0);
    Ok((absorbed, top + bottom))
}

fn check_inputs(state: &StateVector, geometry: &LatticeGeometry) -> Result<(), EngineError> {
    if state.rows() != geometry.rows() {
        return Err(EngineError::StateSize { expected: geometry.rows(), got: state.rows() });
    }
    Ok(())
}

/// Apply one column operator. `records` must come from the same geometry's
/// detector list (or be empty when it has none).
pub fn apply_column(
    state: &StateVector,
    geometry: &LatticeGeometry,
    column: usize,
    options: &PropagateOptions,
    records: &mut Vec<DetectorRecord>,
) -> Result<ColumnOutcome, EngineError> {
    check_inputs(state, geometry)?;
    if column >= geometry.columns() {
        return Err(EngineError::ColumnOutOfRange { column, columns: geometry.columns() });
    }
    if records.len() != geometry.detectors().len() {
        *records = new_records(geometry);
    }
    let mut ws = Workspace::new(geometry);
    let mut next = state.clone();
    let (absorbed, lost) = step(&mut next.entries, &mut ws, geometry, column, options, records)?;
    Ok(ColumnOutcome { state: next, absorbed, lost })
}

/// Propagate through every column of `geometry`.
pub fn propagate(
    initial: &StateVector,
    geometry: &LatticeGeometry,
    options: &PropagateOptions,
) -> Result<FieldHistory, EngineError> {
    propagate_with(initial, geometry, options, |_, _| {})
}

/// Like [`propagate`], calling `observer(column, state)` after each column.
pub fn propagate_with(
    initial: &StateVector,
    geometry: &LatticeGeometry,
    options: &PropagateOptions,
    mut observer: impl FnMut(usize, &StateVector),
) -> Result<FieldHistory, EngineError> {
    check_inputs(initial, geometry)?;
    let norm = initial.norm_sqr();
    if options.require_normalized && (norm - 1.0).abs() > 1e-12 {
        return Err(EngineError::NotNormalized { norm });
    }
    let mut ws = Workspace::new(geometry);
    let mut records = new_records(geometry);
    let mut state = initial.clone();
    let mut maps = options.field_stride.map(|s| FieldMaps::new(s, geometry.rows()));
    if let Some(m) = maps.as_mut() {
        m.record(0, &state);
    }
    let mut totals = Vec::with_capacity(geometry.columns() + 1);
    totals.push(norm);
    let (mut absorbed, mut lost) = (0.0, 0.0);
    for column in 0..geometry.columns() {
        let (a, l) = step(&mut state.entries, &mut ws, geometry, column, options, &mut records)?;
        absorbed += a;
        lost += l;
        let total = state.norm_sqr() + absorbed + lost;
        if !total.is_finite() {
            return Err(EngineError::NonFinite { column });
        }
        totals.push(total);
        if let Some(m) = maps.as_mut() {
            if (column + 1) % m.stride == 0 || column + 1 == geometry.columns() {
                m.record(column + 1, &state);
            }
        }
        observer(column, &state);
    }
    Ok(FieldHistory {
        columns: geometry.columns(),
        rows: geometry.rows(),
        entry_row: geometry.entry_row(),
        column_totals: totals,
        absorbed,
        lost,
        detectors: records,
        final_state: state,
        maps,
    })
}

/// Exit intensities, diffracted and transmitted, indexed by the row offset
/// of the emitting node in the last column relative to the entry row. Only
/// rows reachable from the entry are listed, so offsets step by two.
pub fn exit_profiles(history: &FieldHistory) -> (ProfileSeries, ProfileSeries) {
    let rows = history.rows as i64;
    let last = history.columns as i64 - 1;
    let entry = history.entry_row as i64;
    let parity = (entry + last).rem_euclid(2);
    let emitting: Vec<i64> = (0..rows).filter(|r| r % 2 == parity).collect();
    let s = &history.final_state;
    let diffracted = emitting
        .iter()
        .map(|&r| if r >= 1 { s.beta(r as usize - 1).norm_sqr() } else { 0.0 })
        .collect();
    let transmitted = emitting
        .iter()
        .map(|&r| if r + 1 < rows { s.alpha(r as usize + 1).norm_sqr() } else { 0.0 })
        .collect();
    let make = |label: &str, values: Vec<f64>| {
        let positions = emitting.iter().map(|r| (r - entry) as f64).collect();
        ProfileSeries::new(label, crate::profile::PositionUnit::LatticeIndex { meters_per_index: None }, positions, values)
            .expect("exit intensities are finite")
    };
    (make("diffracted", diffracted), make("transmitted", transmitted))
}
