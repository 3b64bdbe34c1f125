//! Comparison with measured slit scans: CSV profile I/O, instrument
//! response convolution, a scale-free goodness of fit and the end-face
//! angle fit.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{build, GeometryError, GeometrySpec};
use crate::lattice::{propagate, EngineError, PropagateOptions};
use crate::params::SimParams;
use crate::profile::{PositionUnit, ProfileError, ProfileSeries};

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("line {line}: {source}")]
    Invalid { line: u64, source: ProfileError },
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("`{0}` is not on a uniform grid")]
    NonUniform(String),
    #[error("profiles use incompatible position units")]
    UnitMismatch,
    #[error("kernel has zero area")]
    EmptyKernel,
    #[error("simulation and data do not overlap")]
    NoOverlap,
    #[error("no interior minimum: {0}")]
    NoInteriorMinimum(String),
    #[error("fit range [{lo}, {hi}] with {steps} steps is invalid")]
    Range { lo: f64, hi: f64, steps: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Unit of the position column in a profile CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvUnit {
    Meters,
    Millimeters,
    Micrometers,
    LatticeIndex,
    Dimensionless,
}

impl CsvUnit {
    fn factor(&self) -> f64 {
        match self {
            CsvUnit::Millimeters => 1e-3,
            CsvUnit::Micrometers => 1e-6,
            _ => 1.0,
        }
    }

    fn position_unit(&self) -> PositionUnit {
        match self {
            CsvUnit::LatticeIndex => PositionUnit::LatticeIndex { meters_per_index: None },
            CsvUnit::Dimensionless => PositionUnit::Dimensionless,
            _ => PositionUnit::Meters,
        }
    }
}

/// Layout of a two-column profile CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvFormat {
    pub unit: CsvUnit,
    #[serde(default = "yes")]
    pub header: bool,
    #[serde(default)]
    pub position_column: usize,
    #[serde(default = "one")]
    pub value_column: usize,
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

impl CsvFormat {
    pub fn new(unit: CsvUnit) -> Self {
        Self { unit, header: true, position_column: 0, value_column: 1 }
    }
}

/// Read a profile, converting positions to SI. Errors name the file line.
pub fn load_profile(path: impl AsRef<Path>, format: &CsvFormat) -> Result<ProfileSeries, CompareError> {
    let path = path.as_ref();
    let io = |source| CompareError::Io { path: path.display().to_string(), source };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(format.header)
        .trim(csv::Trim::All)
        .from_reader(File::open(path).map_err(io)?);
    let (mut positions, mut values, mut lines) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| CompareError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize, what: &str| -> Result<f64, CompareError> {
            let raw = record
                .get(i)
                .ok_or_else(|| CompareError::Parse { line, message: format!("missing {what} column {i}") })?;
            raw.parse::<f64>()
                .map_err(|_| CompareError::Parse { line, message: format!("{what} `{raw}` is not a number") })
        };
        positions.push(field(format.position_column, "position")? * format.unit.factor());
        values.push(field(format.value_column, "value")?);
        lines.push(line);
    }
    let label = path.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
    ProfileSeries::new(label, format.unit.position_unit(), positions, values).map_err(|e| {
        let index = match e {
            ProfileError::NonFinitePosition { index }
            | ProfileError::NonFiniteValue { index }
            | ProfileError::Negative { index, .. }
            | ProfileError::NonMonotonic { index } => Some(index),
            _ => None,
        };
        match index {
            Some(i) => CompareError::Invalid { line: lines[i], source: e },
            None => CompareError::Profile(e),
        }
    })
}

fn header_for(unit: PositionUnit) -> &'static str {
    match unit {
        PositionUnit::Meters => "position_m",
        PositionUnit::Dimensionless => "position",
        PositionUnit::LatticeIndex { .. } => "index",
    }
}

/// Write `position,value` rows with round-trip precision.
pub fn save_profile(path: impl AsRef<Path>, series: &ProfileSeries) -> Result<(), CompareError> {
    let path = path.as_ref();
    let io = |source| CompareError::Io { path: path.display().to_string(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "{},value", header_for(series.unit)).map_err(io)?;
    for (x, y) in series.iter() {
        writeln!(out, "{x:?},{y:?}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Write several series sharing one position axis as columns.
pub fn save_columns(path: impl AsRef<Path>, series: &[&ProfileSeries]) -> Result<(), CompareError> {
    let path = path.as_ref();
    let io = |source| CompareError::Io { path: path.display().to_string(), source };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let Some(first) = series.first() else { return Ok(()) };
    let labels: Vec<&str> = series.iter().map(|s| s.label.as_str()).collect();
    writeln!(out, "{},{}", header_for(first.unit), labels.join(",")).map_err(io)?;
    for (i, x) in first.positions().iter().enumerate() {
        write!(out, "{x:?}").map_err(io)?;
        for s in series {
            write!(out, ",{:?}", s.values().get(i).copied().unwrap_or(0.0)).map_err(io)?;
        }
        writeln!(out).map_err(io)?;
    }
    out.flush().map_err(io)
}

fn in_meters(series: &ProfileSeries) -> Option<ProfileSeries> {
    match series.unit {
        PositionUnit::Meters => Some(series.clone()),
        PositionUnit::LatticeIndex { meters_per_index: Some(s) } => Some(series.with_calibration(s, 0.0)),
        _ => None,
    }
}

fn same_axis(a: &ProfileSeries, b: &ProfileSeries) -> Result<(ProfileSeries, ProfileSeries), CompareError> {
    if std::mem::discriminant(&a.unit) == std::mem::discriminant(&b.unit) {
        return Ok((a.clone(), b.clone()));
    }
    match (in_meters(a), in_meters(b)) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(CompareError::UnitMismatch),
    }
}

/// Unit-area Gaussian kernel centred on zero, sampled every `spacing`.
pub fn gaussian_kernel(fwhm: f64, spacing: f64) -> ProfileSeries {
    let sigma = fwhm / (8.0 * std::f64::consts::LN_2).sqrt();
    let half = (4.0 * sigma / spacing).ceil() as i64;
    let xs: Vec<f64> = (-half..=half).map(|i| i as f64 * spacing).collect();
    let raw: Vec<f64> = xs.iter().map(|x| (-0.5 * (x / sigma).powi(2)).exp()).collect();
    let area: f64 = raw.iter().sum::<f64>() * spacing;
    ProfileSeries::new("kernel", PositionUnit::Meters, xs, raw.iter().map(|v| v / area).collect())
        .expect("kernel samples are finite")
}

/// Cut `[lo, hi]` out of a measured profile, shift it so its maximum sits
/// at zero and normalise it to unit area.
pub fn kernel_from_peak(series: &ProfileSeries, lo: f64, hi: f64) -> Result<ProfileSeries, CompareError> {
    let (_, at) = series.argmax_in(lo, hi).ok_or(CompareError::EmptyKernel)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = series.iter().filter(|(x, _)| *x >= lo && *x <= hi).map(|(x, y)| (x - at, y)).unzip();
    let area = trapezoid(&xs, &ys);
    if !(area > 0.0) {
        return Err(CompareError::EmptyKernel);
    }
    Ok(ProfileSeries::new("kernel", series.unit, xs, ys.iter().map(|y| y / area).collect())?)
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    if xs.len() < 2 {
        return ys.iter().sum();
    }
    xs.windows(2).zip(ys.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Discrete linear convolution on the simulation grid. The kernel is
/// resampled onto the simulation spacing and renormalised to unit area,
/// so `Σ out · Δ = Σ sim · Δ` whenever no mass is pushed past the grid
/// ends.
pub fn convolve_profile(sim: &ProfileSeries, kernel: &ProfileSeries) -> Result<ProfileSeries, CompareError> {
    let (sim, kernel) = same_axis(sim, kernel)?;
    let dx = sim.uniform_spacing(1e-6).ok_or_else(|| CompareError::NonUniform(sim.label.clone()))?;
    let lo = (kernel.positions()[0] / dx).ceil() as i64;
    let hi = (kernel.positions()[kernel.len() - 1] / dx).floor() as i64;
    let taps: Vec<(i64, f64)> = (lo..=hi).filter_map(|j| kernel.interpolate(j as f64 * dx).map(|w| (j, w))).collect();
    let area: f64 = taps.iter().map(|t| t.1).sum();
    if !(area > 0.0) {
        return Err(CompareError::EmptyKernel);
    }
    let v = sim.values();
    let n = v.len() as i64;
    let out: Vec<f64> = (0..n)
        .map(|i| {
            taps.iter()
                .filter_map(|&(j, w)| {
                    let k = i - j;
                    (0..n).contains(&k).then(|| v[k as usize] * w)
                })
                .sum::<f64>()
                / area
        })
        .collect();
    Ok(sim.with_values(out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Residuals over `noise_fraction` of the data peak, squared and summed.
    ChiSquare { noise_fraction: f64 },
    /// Root-mean-square residual relative to the data peak.
    Rmse,
}

impl Metric {
    pub const DEFAULT_NOISE_FRACTION: f64 = 0.01;

    pub fn chi_square() -> Self {
        Metric::ChiSquare { noise_fraction: Self::DEFAULT_NOISE_FRACTION }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Metric::ChiSquare { .. } => "chi-square",
            Metric::Rmse => "rmse",
        }
    }
}

/// Goodness of fit after resampling `sim` onto the data positions and
/// fitting one amplitude scale. Residuals are taken relative to the data
/// peak, so the value does not depend on the data's overall scale.
pub fn compare(sim: &ProfileSeries, data: &ProfileSeries, metric: Metric) -> Result<f64, CompareError> {
    let (sim, data) = same_axis(sim, data)?;
    let pairs: Vec<(f64, f64)> = data.iter().filter_map(|(x, y)| sim.interpolate(x).map(|f| (f, y))).collect();
    if pairs.is_empty() {
        return Err(CompareError::NoOverlap);
    }
    let peak = pairs.iter().map(|p| p.1).fold(0.0, f64::max);
    let (fy, ff) = pairs.iter().fold((0.0, 0.0), |(a, b), (f, y)| (a + f * y, b + f * f));
    let scale = if ff > 0.0 { fy / ff } else { 0.0 };
    let norm = if peak > 0.0 { peak } else { 1.0 };
    let ss: f64 = pairs.iter().map(|(f, y)| ((y - scale * f) / norm).powi(2)).sum();
    Ok(match metric {
        Metric::ChiSquare { noise_fraction } => ss / (noise_fraction * noise_fraction),
        Metric::Rmse => (ss / pairs.len() as f64).sqrt(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub best_parameter: f64,
    pub uncertainty: f64,
    pub objective_curve: Vec<(f64, f64)>,
    pub metric: String,
}

/// Settings of an end-face angle fit.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleFit {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
    pub metric: Metric,
    pub options: PropagateOptions,
}

impl AngleFit {
    pub fn new(lo: f64, hi: f64, steps: usize) -> Self {
        Self { lo, hi, steps, metric: Metric::chi_square(), options: PropagateOptions::default() }
    }
}

/// Front-face profile of `spec`, in meters along the face, optionally
/// convolved with `kernel`.
pub fn simulate_front_face(
    spec: &GeometrySpec,
    sim: &SimParams,
    kernel: Option<&ProfileSeries>,
    options: &PropagateOptions,
) -> Result<ProfileSeries, CompareError> {
    let built = build(spec, sim)?;
    let history = propagate(&built.initial_state(), &built.lattice, options)?;
    let raw = built.front_profile(&history).ok_or(GeometryError::NotBraggFamily)?;
    let pitch = sim.column_pitch();
    let raw = raw.with_calibration(pitch, 0.0);
    match kernel {
        Some(k) => convolve_profile(&raw, k),
        None => Ok(raw),
    }
}

/// Parabola through three equally spaced samples: vertex and curvature.
fn parabola(x: [f64; 3], f: [f64; 3]) -> Option<(f64, f64)> {
    let h = x[1] - x[0];
    let second = f[2] - 2.0 * f[1] + f[0];
    if !(second > 0.0) {
        return None;
    }
    let vertex = x[1] - 0.5 * h * (f[2] - f[0]) / second;
    Some((vertex, second / (h * h)))
}

/// Grid scan of the end-face angle followed by parabolic refinement. The
/// uncertainty is the half-width at which the objective rises by one.
pub fn fit_geometry_angle(
    data: &ProfileSeries,
    template: &GeometrySpec,
    sim: &SimParams,
    kernel: Option<&ProfileSeries>,
    fit: &AngleFit,
) -> Result<FitResult, CompareError> {
    if fit.steps < 3 || !(fit.hi > fit.lo) {
        return Err(CompareError::Range { lo: fit.lo, hi: fit.hi, steps: fit.steps });
    }
    let (dmin, dmax) = data.values().iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    if dmax - dmin <= 1e-12 * dmax.max(f64::MIN_POSITIVE) {
        return Err(CompareError::NoInteriorMinimum("data are flat; widen the scan or check the input".into()));
    }
    let step = (fit.hi - fit.lo) / (fit.steps - 1) as f64;
    let angles: Vec<f64> = (0..fit.steps).map(|i| fit.lo + i as f64 * step).collect();
    let values: Vec<f64> = angles
        .par_iter()
        .map(|&a| {
            let profile = simulate_front_face(&template.with_angle(a), sim, kernel, &fit.options)?;
            compare(&profile, data, fit.metric)
        })
        .collect::<Result<_, _>>()?;
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let curve: Vec<(f64, f64)> = angles.iter().copied().zip(values.iter().copied()).collect();
    if best == 0 || best == fit.steps - 1 {
        return Err(CompareError::NoInteriorMinimum(format!(
            "objective is smallest at the scan edge {:.4}°; widen the range",
            angles[best]
        )));
    }
    let x = [angles[best - 1], angles[best], angles[best + 1]];
    let f = [values[best - 1], values[best], values[best + 1]];
    let (vertex, curvature) = parabola(x, f)
        .ok_or_else(|| CompareError::NoInteriorMinimum("objective is flat around its minimum".into()))?;
    Ok(FitResult {
        best_parameter: vertex.clamp(x[0], x[2]),
        uncertainty: (2.0 / curvature).sqrt(),
        objective_curve: curve,
        metric: fit.metric.label().into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(values: Vec<f64>) -> ProfileSeries {
        ProfileSeries::on_lattice("s", 0, values).unwrap()
    }

    #[test]
    fn delta_kernel_is_identity() {
        let s = series(vec![0.0, 1.0, 3.0, 2.0, 0.5]);
        let k = ProfileSeries::on_lattice("k", 0, vec![1.0]).unwrap();
        assert_eq!(convolve_profile(&s, &k).unwrap().values(), s.values());
    }

    #[test]
    fn two_boxes_make_a_triangle() {
        let mut v = vec![0.0; 12];
        v[4..7].iter_mut().for_each(|x| *x = 1.0);
        let k = ProfileSeries::on_lattice("k", -1, vec![1.0, 1.0, 1.0]).unwrap();
        let out = convolve_profile(&series(v), &k).unwrap();
        let expect = [0.0, 0.0, 0.0, 1.0, 2.0, 3.0, 2.0, 1.0, 0.0, 0.0, 0.0, 0.0].map(|x| x / 3.0);
        for (a, b) in out.values().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn compare_examples() {
        let d = series(vec![0.0, 1.0, 4.0, 1.0, 0.0]);
        assert_eq!(compare(&d, &d, Metric::chi_square()).unwrap(), 0.0);
        assert!(compare(&d.scaled(2.0), &d, Metric::Rmse).unwrap() < 1e-15);
        let shifted = |o: usize| {
            let mut v = vec![0.0; 9];
            v[2 + o] = 1.0;
            v[3 + o] = 4.0;
            v[4 + o] = 1.0;
            series(v)
        };
        let base = shifted(0);
        let m1 = compare(&shifted(1), &base, Metric::chi_square()).unwrap();
        let m2 = compare(&shifted(2), &base, Metric::chi_square()).unwrap();
        assert!(m1 > 0.0 && m2 > m1);
        let far = ProfileSeries::on_lattice("f", 100, vec![1.0, 2.0]).unwrap();
        assert!(matches!(compare(&far, &base, Metric::Rmse), Err(CompareError::NoOverlap)));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        let s = ProfileSeries::new("a", PositionUnit::Meters, vec![1e-3, 2.000000000000001e-3], vec![0.1, 1.0 / 3.0])
            .unwrap();
        save_profile(&p, &s).unwrap();
        let back = load_profile(&p, &CsvFormat::new(CsvUnit::Meters)).unwrap();
        assert_eq!(back.positions(), s.positions());
        assert_eq!(back.values(), s.values());

        let mm = dir.path().join("mm.csv");
        std::fs::write(&mm, "z_mm,counts\n0.5,10\n1.5,20\n").unwrap();
        let m = load_profile(&mm, &CsvFormat::new(CsvUnit::Millimeters)).unwrap();
        assert_eq!(m.positions(), &[0.5e-3, 1.5e-3]);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "z,counts\n0,1\n1,NaN\n2,1\n").unwrap();
        let err = load_profile(&bad, &CsvFormat::new(CsvUnit::Meters)).unwrap_err();
        assert!(matches!(err, CompareError::Invalid { line: 3, .. }), "{err}");
        std::fs::write(&bad, "z,counts\n0,1\n1,x\n").unwrap();
        let err = load_profile(&bad, &CsvFormat::new(CsvUnit::Meters)).unwrap_err();
        assert!(err.to_string().starts_with("line 3"), "{err}");
    }

    #[test]
    fn gaussian_kernel_has_unit_area() {
        let k = gaussian_kernel(2e-4, 1e-6);
        assert!((k.total() * 1e-6 - 1.0).abs() < 1e-12);
        assert_eq!(k.argmax_in(-1.0, 1.0).unwrap().1, 0.0);
    }
}
