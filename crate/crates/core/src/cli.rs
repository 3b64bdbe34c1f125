//! Configuration-driven runs.
//!
//! A run reads a [`RunConfig`] (JSON, user units: mm, Å, degrees, Å³, fm),
//! resolves it to SI crystal and lattice parameters, executes one scenario
//! and writes a run directory:
//!
//! ```text
//! <out>/profiles/*.csv   position,value curves
//! <out>/fields/*.csv     coarse intensity maps (column x row block)
//! <out>/manifest.json    resolved parameters, checks, hashes, wall time
//! ```

use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::compare::{
    self, convolve_profile, fit_geometry_angle, gaussian_kernel, load_profile, save_columns, save_profile,
    simulate_front_face, AngleFit, CompareError, CsvFormat, CsvUnit, Metric,
};
use crate::geometry::{build, reflection_points, GeometryError, GeometrySpec, Padding, ReflectionPoint};
use crate::lattice::{
    exit_profiles, integrated_intensity_scan, propagate, propagate_with, Direction, EngineError, FieldHistory, FieldMaps,
    LatticeGeometry, NodeKind, PendellosungScan, PropagateOptions, ScanError, StateVector, UnitaryParams,
};
use crate::oracles::{self, OracleError};
use crate::params::{
    darwin_width, pendellosung_period, sim_from_crystal, CrystalSpec, ParamError, Resolution, SimParams,
    SimResiduals, SpecWarning, SILICON_LATTICE_CONSTANT, SILICON_SCATTERING_LENGTH,
};
use crate::pathcomb::{self, PathSpec};
use crate::profile::{PositionUnit, ProfileSeries};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "QIDD_OUTPUT_ROOT";
/// Output root used when the environment variable is unset.
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";
/// Tolerance on intensity conservation checks.
pub const CONSERVATION_TOLERANCE: f64 = 1e-10;
/// Longest side of a written field map, in cells.
pub const FIELD_MAP_TARGET: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Laue,
    Bragg,
    Mixed,
    Corner,
    Sweep,
    Fit,
    OracleCheck,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Laue => "laue",
            Scenario::Bragg => "bragg",
            Scenario::Mixed => "mixed",
            Scenario::Corner => "corner",
            Scenario::Sweep => "sweep",
            Scenario::Fit => "fit",
            Scenario::OracleCheck => "oracle-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    /// Silicon, (111) reflection.
    Si111,
}

/// Crystal block in user units.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    /// Fills `V_cell`, `F_H` and `d` (and `theta_B` by Bragg's law).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<Material>,
    /// Thickness, mm.
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub thickness_mm: Option<f64>,
    /// Thickness in Pendellösung lengths, as an alternative to `D`.
    #[serde(rename = "D_over_Delta_H", default, skip_serializing_if = "Option::is_none")]
    pub thickness_ratio: Option<f64>,
    /// Wavelength, Å.
    #[serde(rename = "lambda", default, skip_serializing_if = "Option::is_none")]
    pub wavelength_a: Option<f64>,
    /// Bragg angle, degrees.
    #[serde(rename = "theta_B", default, skip_serializing_if = "Option::is_none")]
    pub bragg_angle_deg: Option<f64>,
    /// Unit-cell volume, Å³.
    #[serde(rename = "V_cell", default, skip_serializing_if = "Option::is_none")]
    pub cell_volume_a3: Option<f64>,
    /// Structure-factor magnitude, fm.
    #[serde(rename = "F_H", default, skip_serializing_if = "Option::is_none")]
    pub structure_factor_fm: Option<f64>,
    /// Plane spacing, Å.
    #[serde(rename = "d", default, skip_serializing_if = "Option::is_none")]
    pub plane_spacing_a: Option<f64>,
}

/// Exactly one of the two is required.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

/// Geometry block. Lengths in mm, angles in degrees.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    /// Deepest crystal height in rows; derived from `crystal.D` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<usize>,
    /// Front face from entry to corner in columns; overrides `face_length`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_columns: Option<usize>,
    /// Front face from entry to corner, mm. Defaults to `4·D`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back_face_angle: Option<f64>,
    /// Corner scenario: entry distance from the corner, mm. Defaults to 6.2.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<Padding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IoConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Write `fields/*.csv`.
    #[serde(default = "yes")]
    pub fields: bool,
    /// Row/column block size of the field maps; chosen automatically when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field_stride: Option<usize>,
}

impl Default for IoConfig {
    fn default() -> Self {
        Self { out: None, fields: true, field_stride: None }
    }
}

/// Beam kernel: an analytic Gaussian or a measured profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    /// Gaussian full width at half maximum, mm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fwhm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default = "millimeters")]
    pub unit: CsvUnit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    #[serde(default = "millimeters")]
    pub unit: CsvUnit,
    #[serde(default = "yes")]
    pub header: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "fit_lo")]
    pub lo: f64,
    #[serde(default = "fit_hi")]
    pub hi: f64,
    #[serde(default = "fit_steps")]
    pub steps: usize,
    #[serde(default = "chi_square")]
    pub metric: Metric,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { lo: fit_lo(), hi: fit_hi(), steps: fit_steps(), metric: chi_square() }
    }
}

fn yes() -> bool {
    true
}
fn millimeters() -> CsvUnit {
    CsvUnit::Millimeters
}
fn fit_lo() -> f64 {
    91.0
}
fn fit_hi() -> f64 {
    91.7
}
fn fit_steps() -> usize {
    15
}
fn chi_square() -> Metric {
    Metric::chi_square()
}

/// A complete run description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default)]
    pub crystal: CrystalConfig,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub io: IoConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataConfig>,
    #[serde(default)]
    pub fit: FitConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub gamma: Option<f64>,
    pub layers: Option<u64>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("{table}{failed} of {total} checks failed")]
    ChecksFailed { failed: usize, total: usize, table: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

impl CliError {
    /// Process exit status: 2 for invalid configuration, 3 for violated
    /// runtime invariants, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Param(_) | CliError::Geometry(_) => 2,
            CliError::Compare(CompareError::Geometry(_)) => 2,
            CliError::Invariant(_) => 3,
            _ => 1,
        }
    }
}

fn config_error(message: impl Into<String>) -> CliError {
    CliError::Config(message.into())
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}

/// Parse a config file. Relative kernel and data paths are taken relative
/// to the file's directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig, CliError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(io_error(path))?;
    let mut config = parse_config(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let rebase = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    if let Some(k) = config.kernel.as_mut().and_then(|k| k.path.as_mut()) {
        rebase(k);
    }
    if let Some(d) = config.data.as_mut() {
        rebase(&mut d.path);
    }
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    serde_json::from_str(text).map_err(|e| config_error(format!("invalid config: {e}")))
}

/// Built-in configuration used when no file is given.
pub fn preset(scenario: Scenario) -> RunConfig {
    let reference = CrystalConfig {
        material: Some(Material::Si111),
        thickness_mm: Some(1.0),
        wavelength_a: Some(4.43),
        bragg_angle_deg: Some(44.9),
        ..Default::default()
    };
    let bragg_sim = SimConfig { layers: None, gamma: Some(PI / 50.0) };
    let mut config = RunConfig { scenario: Some(scenario), ..Default::default() };
    match scenario {
        Scenario::Laue | Scenario::Sweep => {
            let ratio = if scenario == Scenario::Laue { 100.0 } else { 20.0 };
            config.crystal = CrystalConfig { thickness_mm: None, thickness_ratio: Some(ratio), ..reference };
            config.sim = SimConfig { layers: None, gamma: Some(PI / 100.0) };
        }
        Scenario::Bragg => {
            config.crystal = reference;
            config.sim = bragg_sim;
        }
        Scenario::Mixed | Scenario::Fit => {
            config.crystal = reference;
            config.sim = bragg_sim;
            config.geometry.back_face_angle = Some(91.35);
            config.kernel = Some(KernelConfig { fwhm: Some(0.13), path: None, unit: CsvUnit::Millimeters });
            config.io.fields = scenario == Scenario::Mixed;
        }
        Scenario::Corner => {
            config.crystal = reference;
            config.sim = bragg_sim;
            config.geometry.back_face_angle = Some(91.35);
            config.geometry.entry_offset = Some(6.2);
            config.kernel = Some(KernelConfig { fwhm: Some(0.13), path: None, unit: CsvUnit::Millimeters });
        }
        Scenario::OracleCheck => config.io.fields = false,
    }
    config
}

impl RunConfig {
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(g) = overrides.gamma {
            self.sim = SimConfig { layers: None, gamma: Some(g) };
        }
        if let Some(n) = overrides.layers {
            self.sim = SimConfig { layers: Some(n), gamma: None };
        }
        if let Some(out) = &overrides.out {
            self.io.out = Some(out.clone());
        }
    }

    pub fn scenario(&self) -> Result<Scenario, CliError> {
        self.scenario.ok_or_else(|| config_error("scenario required"))
    }

    /// Crystal in SI units.
    pub fn resolve_crystal(&self) -> Result<CrystalSpec, CliError> {
        let c = &self.crystal;
        if c.thickness_mm.is_none() && c.thickness_ratio.is_none() {
            return Err(config_error("crystal.D required"));
        }
        let si = c.material.map(|Material::Si111| CrystalSpec::silicon_111(1.0, 1.0, 1.0));
        let wavelength = c.wavelength_a.ok_or_else(|| config_error("crystal.lambda required"))? * 1e-10;
        let cell_volume = match (c.cell_volume_a3, si) {
            (Some(v), _) => v * 1e-30,
            (None, Some(m)) => m.cell_volume,
            (None, None) => return Err(config_error("crystal.V_cell required (or crystal.material)")),
        };
        let structure_factor = match (c.structure_factor_fm, si) {
            (Some(f), _) => f * 1e-15,
            (None, Some(m)) => m.structure_factor,
            (None, None) => return Err(config_error("crystal.F_H required (or crystal.material)")),
        };
        let plane_spacing = match (c.plane_spacing_a, si) {
            (Some(d), _) => d * 1e-10,
            (None, Some(m)) => m.plane_spacing,
            (None, None) => return Err(config_error("crystal.d required (or crystal.material)")),
        };
        let bragg_angle = match c.bragg_angle_deg {
            Some(t) => t.to_radians(),
            None => {
                let s = wavelength / (2.0 * plane_spacing);
                if !(s > 0.0 && s < 1.0) {
                    return Err(config_error("crystal.theta_B required: lambda > 2d admits no Bragg angle"));
                }
                s.asin()
            }
        };
        let mut spec = CrystalSpec { thickness: 1.0, wavelength, bragg_angle, cell_volume, structure_factor, plane_spacing };
        spec.thickness = match (c.thickness_mm, c.thickness_ratio) {
            (Some(_), Some(_)) => return Err(config_error("crystal.D and crystal.D_over_Delta_H are exclusive")),
            (Some(d), None) => d * 1e-3,
            (None, Some(r)) => r * pendellosung_period(&spec),
            (None, None) => return Err(config_error("crystal.D required")),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn resolution(&self) -> Result<Resolution, CliError> {
        match (self.sim.layers, self.sim.gamma) {
            (Some(n), None) => Ok(Resolution::Layers(n)),
            (None, Some(g)) => Ok(Resolution::Gamma(g)),
            _ => Err(config_error("exactly one of sim.layers and sim.gamma required")),
        }
    }

    /// Output directory: the configured path, else `$QIDD_OUTPUT_ROOT/<scenario>`.
    pub fn output_dir(&self) -> Result<PathBuf, CliError> {
        if let Some(out) = &self.io.out {
            return Ok(out.clone());
        }
        let root = std::env::var_os(OUTPUT_ROOT_ENV).map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from);
        Ok(root.join(self.scenario()?.name()))
    }

    /// Lattice geometry for a Bragg-family scenario.
    pub fn geometry_spec(&self, scenario: Scenario, spec: &CrystalSpec, sim: &SimParams) -> Result<GeometrySpec, CliError> {
        let g = &self.geometry;
        let angle = g.back_face_angle.unwrap_or(90.0);
        let h = match g.h {
            Some(h) => h,
            None => ((spec.thickness / sim.row_pitch()).round() as usize).max(2) - 1,
        };
        let columns = match (g.n_columns, g.face_length) {
            (Some(c), _) => c,
            (None, Some(l)) => (l * 1e-3 / sim.column_pitch()).round() as usize,
            (None, None) => (4.0 * spec.thickness / sim.column_pitch()).round() as usize,
        };
        let mut out = match scenario {
            Scenario::Bragg => {
                if g.back_face_angle.is_some_and(|a| a != 90.0) {
                    return Err(config_error("geometry.back_face_angle applies to mixed, corner and fit"));
                }
                GeometrySpec::bragg(columns, h)
            }
            Scenario::Mixed | Scenario::Fit => GeometrySpec::tilted(columns, h, angle),
            Scenario::Corner => {
                let mut c = GeometrySpec::corner(h, g.entry_offset.unwrap_or(6.2) * 1e-3, angle);
                c.face_length = g.face_length.map(|l| l * 1e-3);
                c
            }
            _ => return Err(config_error(format!("scenario {} has no Bragg geometry", scenario.name()))),
        };
        if let Some(p) = g.padding {
            out.padding = p;
        }
        out.grid_rows = g.grid_rows;
        Ok(out)
    }

    fn kernel(&self, sim: &SimParams) -> Result<Option<ProfileSeries>, CliError> {
        let Some(k) = &self.kernel else { return Ok(None) };
        match (k.fwhm, &k.path) {
            (Some(w), None) => {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(config_error("kernel.fwhm must be positive"));
                }
                Ok(Some(gaussian_kernel(w * 1e-3, sim.column_pitch())))
            }
            (None, Some(p)) => {
                let series = load_profile(p, &CsvFormat::new(k.unit))?;
                let area = series.total();
                if !(area > 0.0) {
                    return Err(config_error("kernel profile has zero area"));
                }
                Ok(Some(series.scaled(1.0 / area)))
            }
            _ => Err(config_error("exactly one of kernel.fwhm and kernel.path required")),
        }
    }

    fn data(&self) -> Result<Option<ProfileSeries>, CliError> {
        let Some(d) = &self.data else { return Ok(None) };
        let format = CsvFormat { header: d.header, ..CsvFormat::new(d.unit) };
        Ok(Some(load_profile(&d.path, &format)?))
    }
}

/// One row of the manifest's check table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self { name: name.into(), value, tolerance, pass: value <= tolerance }
    }
}

/// Every parameter the run resolved, in SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub n: u64,
    pub gamma: f64,
    pub n_gamma: f64,
    pub dx_m: f64,
    pub dz_m: f64,
    pub column_pitch_m: f64,
    pub row_pitch_m: f64,
    pub delta_h_m: f64,
    pub theta_d_rad: f64,
    pub thickness_m: f64,
    pub thickness_ratio: f64,
    pub theta_b_rad: f64,
    pub wavelength_m: f64,
    pub cell_volume_m3: f64,
    pub structure_factor_m: f64,
    pub plane_spacing_m: f64,
    pub residuals: SimResiduals,
    pub warnings: Vec<SpecWarning>,
}

impl Resolved {
    fn new(spec: &CrystalSpec, sim: &SimParams, warnings: Vec<SpecWarning>) -> Self {
        Self {
            n: sim.layers,
            gamma: sim.gamma,
            n_gamma: sim.layers as f64 * sim.gamma,
            dx_m: sim.dx,
            dz_m: sim.dz,
            column_pitch_m: sim.column_pitch(),
            row_pitch_m: sim.row_pitch(),
            delta_h_m: pendellosung_period(spec),
            theta_d_rad: darwin_width(spec),
            thickness_m: spec.thickness,
            thickness_ratio: spec.thickness_ratio(),
            theta_b_rad: spec.bragg_angle,
            wavelength_m: spec.wavelength,
            cell_volume_m3: spec.cell_volume,
            structure_factor_m: spec.structure_factor,
            plane_spacing_m: spec.plane_spacing,
            residuals: sim.residuals(spec),
            warnings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeReport {
    pub columns: usize,
    pub rows: usize,
    pub entry_column: usize,
    pub entry_row: usize,
    pub crystal_sites: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_face_angle_deg: Option<f64>,
    #[serde(default)]
    pub reflection_points: Vec<PointReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub label: String,
    pub coordinate: f64,
    pub position_m: f64,
}

impl From<&ReflectionPoint> for PointReport {
    fn from(p: &ReflectionPoint) -> Self {
        Self { label: p.label.into(), coordinate: p.coordinate, position_m: p.position }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub scenario: Scenario,
    pub version: String,
    pub threads: usize,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<Resolved>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<LatticeReport>,
    pub checks: Vec<Check>,
    pub results: serde_json::Map<String, serde_json::Value>,
    pub outputs: Vec<OutputFile>,
    /// SHA-256 over the output list; independent of timing and threads.
    pub content_hash: String,
    pub wall_time_s: f64,
}

/// Outcome of [`run`].
#[derive(Debug, Clone)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

struct Writer {
    root: PathBuf,
    files: Vec<String>,
}

impl Writer {
    fn new(root: &Path) -> Result<Self, CliError> {
        for sub in ["profiles", "fields"] {
            let dir = root.join(sub);
            fs::create_dir_all(&dir).map_err(io_error(&dir))?;
        }
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    fn path(&mut self, relative: &str) -> PathBuf {
        self.files.push(relative.to_string());
        self.root.join(relative)
    }

    fn profile(&mut self, relative: &str, series: &ProfileSeries) -> Result<(), CliError> {
        let path = self.path(relative);
        Ok(save_profile(path, series)?)
    }

    fn columns(&mut self, relative: &str, series: &[&ProfileSeries]) -> Result<(), CliError> {
        let path = self.path(relative);
        Ok(save_columns(path, series)?)
    }

    fn maps(&mut self, maps: &FieldMaps) -> Result<(), CliError> {
        let blocks = maps.row_blocks.len();
        for (name, values) in [("transmitted", &maps.transmitted), ("reflected", &maps.reflected)] {
            let path = self.path(&format!("fields/{name}.csv"));
            let mut out = BufWriter::new(File::create(&path).map_err(io_error(&path))?);
            let header: Vec<String> = maps.row_blocks.iter().map(|r| format!("row_{r}")).collect();
            writeln!(out, "column,{}", header.join(",")).map_err(io_error(&path))?;
            for (s, column) in maps.snapshot_columns.iter().enumerate() {
                write!(out, "{column}").map_err(io_error(&path))?;
                for v in &values[s * blocks..(s + 1) * blocks] {
                    write!(out, ",{v:?}").map_err(io_error(&path))?;
                }
                writeln!(out).map_err(io_error(&path))?;
            }
            out.flush().map_err(io_error(&path))?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<(Vec<OutputFile>, String), CliError> {
        self.files.sort();
        self.files.dedup();
        let mut outputs = Vec::new();
        let mut all = Sha256::new();
        for relative in &self.files {
            let path = self.root.join(relative);
            let bytes = fs::read(&path).map_err(io_error(&path))?;
            let digest = hex::encode(Sha256::digest(&bytes));
            all.update(relative.as_bytes());
            all.update([0]);
            all.update(digest.as_bytes());
            all.update(b"\n");
            outputs.push(OutputFile { path: relative.clone(), bytes: bytes.len() as u64, sha256: digest });
        }
        Ok((outputs, hex::encode(all.finalize())))
    }
}

struct Outcome {
    resolved: Option<Resolved>,
    lattice: Option<LatticeReport>,
    checks: Vec<Check>,
    results: serde_json::Map<String, serde_json::Value>,
    fatal: Vec<String>,
}

impl Outcome {
    fn new(resolved: Option<Resolved>) -> Self {
        Self { resolved, lattice: None, checks: Vec::new(), results: Default::default(), fatal: Vec::new() }
    }

    fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.into(), serde_json::to_value(value).expect("results serialise"));
    }

    /// A check whose failure aborts the run with [`CliError::Invariant`].
    fn invariant(&mut self, check: Check) {
        if !check.pass {
            self.fatal.push(format!("{} = {:e} exceeds {:e}", check.name, check.value, check.tolerance));
        }
        self.checks.push(check);
    }
}

/// Execute `config` and write its run directory.
pub fn run(config: &RunConfig) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let scenario = config.scenario()?;
    let out_dir = config.output_dir()?;
    let resolved = if scenario == Scenario::OracleCheck {
        None
    } else {
        let spec = config.resolve_crystal()?;
        let sim = sim_from_crystal(&spec, config.resolution()?)?;
        Some((spec, sim))
    };
    let mut writer = Writer::new(&out_dir)?;
    let outcome = match (scenario, resolved) {
        (Scenario::OracleCheck, _) => run_oracle_check(&mut writer)?,
        (Scenario::Laue, Some((spec, sim))) => run_laue(config, &spec, &sim, &mut writer)?,
        (Scenario::Sweep, Some((spec, sim))) => run_sweep(&spec, &sim, &mut writer)?,
        (Scenario::Fit, Some((spec, sim))) => run_fit(config, &spec, &sim, &mut writer)?,
        (s, Some((spec, sim))) => run_bragg(config, s, &spec, &sim, &mut writer)?,
        (_, None) => unreachable!("only oracle-check runs without a crystal"),
    };
    let (outputs, content_hash) = writer.finish()?;
    let manifest = Manifest {
        scenario,
        version: env!("CARGO_PKG_VERSION").into(),
        threads: rayon::current_num_threads(),
        config: config.clone(),
        resolved: outcome.resolved,
        lattice: outcome.lattice,
        checks: outcome.checks,
        results: outcome.results,
        outputs,
        content_hash,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    fs::write(&path, text + "\n").map_err(io_error(&path))?;
    if !outcome.fatal.is_empty() {
        return Err(CliError::Invariant(outcome.fatal.join("; ")));
    }
    if scenario == Scenario::OracleCheck {
        let failed = manifest.checks.iter().filter(|c| !c.pass).count();
        if failed > 0 {
            let table = format_checks(&manifest.checks);
            return Err(CliError::ChecksFailed { failed, total: manifest.checks.len(), table });
        }
    }
    Ok(RunReport { out_dir, manifest })
}

fn resolved(spec: &CrystalSpec, sim: &SimParams) -> Resolved {
    Resolved::new(spec, sim, spec.validate().unwrap_or_default())
}

fn field_stride(config: &RunConfig, lattice: &LatticeGeometry) -> Option<usize> {
    config.io.fields.then(|| {
        config
            .io
            .field_stride
            .unwrap_or_else(|| lattice.columns().max(lattice.rows()).div_ceil(FIELD_MAP_TARGET))
            .max(1)
    })
}

fn lattice_report(lattice: &LatticeGeometry, entry_column: usize) -> LatticeReport {
    LatticeReport {
        columns: lattice.columns(),
        rows: lattice.rows(),
        entry_column,
        entry_row: lattice.entry_row(),
        crystal_sites: lattice.crystal_sites(),
        spec: None,
        fitted_face_angle_deg: None,
        reflection_points: Vec::new(),
    }
}

/// Laue exit profile against `Γ = -p/n`, direct-beam side at `Γ = -1`.
fn laue_axis(profile: &ProfileSeries, layers: u64, label: &str) -> ProfileSeries {
    let n = layers as f64;
    let mut pairs: Vec<(f64, f64)> = profile
        .iter()
        .map(|(offset, v)| (offset / 2.0, v))
        .filter(|(p, _)| p.abs() <= n)
        .map(|(p, v)| (-p / n, v))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (x, y) = pairs.into_iter().unzip();
    ProfileSeries::new(label, PositionUnit::Dimensionless, x, y).expect("exit profile is valid")
}

fn run_laue(config: &RunConfig, spec: &CrystalSpec, sim: &SimParams, writer: &mut Writer) -> Result<Outcome, CliError> {
    let layers = usize::try_from(sim.layers).map_err(|_| config_error("sim.layers too large"))?;
    let built = build(&GeometrySpec::laue_layers(layers), sim)?;
    let options = PropagateOptions { field_stride: field_stride(config, &built.lattice), ..Default::default() };
    let mut scan = PendellosungScan { gamma: sim.gamma, layers: Vec::new(), diffracted: Vec::new(), transmitted: Vec::new() };
    let history = propagate_with(&built.initial_state(), &built.lattice, &options, |column, state| {
        let offset = column.wrapping_sub(built.entry_column);
        if column >= built.entry_column && offset.is_multiple_of(2) {
            scan.layers.push(offset as u64 / 2);
            scan.diffracted.push(state.reflected_intensity());
            scan.transmitted.push(state.transmitted_intensity());
        }
    })?;
    let mut outcome = Outcome::new(Some(resolved(spec, sim)));
    outcome.lattice = Some(lattice_report(&built.lattice, built.entry_column));
    outcome.invariant(Check::at_most("unitarity_max_drift", history.max_norm_drift(), 1e-12));
    outcome.invariant(Check::at_most("boundary_loss", history.lost, 0.0));
    let (d, t) = exit_profiles(&history);
    let d = laue_axis(&d, sim.layers, "diffracted");
    let t = laue_axis(&t, sim.layers, "transmitted");
    writer.profile("profiles/diffracted.csv", &d)?;
    writer.profile("profiles/transmitted.csv", &t)?;
    writer.columns("profiles/integrated.csv", &[&scan.profile(Direction::Reflected), &scan.profile(Direction::Transmitted)])?;
    if let Some(maps) = &history.maps {
        writer.maps(maps)?;
    }
    outcome.result("diffracted_total", d.total());
    outcome.result("transmitted_total", t.total());
    Ok(outcome)
}

fn run_sweep(spec: &CrystalSpec, sim: &SimParams, writer: &mut Writer) -> Result<Outcome, CliError> {
    let layers = usize::try_from(sim.layers).map_err(|_| config_error("sim.layers too large"))?;
    let scan = integrated_intensity_scan(sim.gamma, layers, &PropagateOptions::default())?;
    let d = scan.profile(Direction::Reflected);
    let t = scan.profile(Direction::Transmitted);
    writer.columns("profiles/integrated.csv", &[&d, &t])?;
    writer.profile("profiles/integrated_diffracted.csv", &d)?;
    let mut outcome = Outcome::new(Some(resolved(spec, sim)));
    let drift = d.values().iter().zip(t.values()).map(|(a, b)| (a + b - 1.0).abs()).fold(0.0, f64::max);
    outcome.invariant(Check::at_most("conservation_max_error", drift, 1e-12));
    let period = scan.oscillation_period();
    if let Some(p) = period {
        outcome.checks.push(Check::at_most("period_relative_error", (p - 1.0).abs(), 0.02));
    }
    let delta_h = pendellosung_period(spec);
    outcome.result("period_over_delta_h", period);
    outcome.result("period_m", period.map(|p| p * delta_h));
    outcome.result("diffracted_maxima", scan.diffracted_maxima());
    Ok(outcome)
}

fn run_bragg(
    config: &RunConfig,
    scenario: Scenario,
    spec: &CrystalSpec,
    sim: &SimParams,
    writer: &mut Writer,
) -> Result<Outcome, CliError> {
    let gspec = config.geometry_spec(scenario, spec, sim)?;
    let built = build(&gspec, sim)?;
    let kernel = config.kernel(sim)?;
    let options = PropagateOptions { field_stride: field_stride(config, &built.lattice), ..Default::default() };
    let history = propagate(&built.initial_state(), &built.lattice, &options)?;
    let mut outcome = Outcome::new(Some(resolved(spec, sim)));
    let points = reflection_points(&gspec, sim)?;
    let mut report = lattice_report(&built.lattice, built.entry_column);
    report.fitted_face_angle_deg = built.fitted_face_angle();
    report.reflection_points = points.iter().map(PointReport::from).collect();
    report.spec = Some(gspec.clone());
    outcome.lattice = Some(report);
    completeness_checks(&mut outcome, &history);

    let pitch = sim.column_pitch();
    let front = built.front_profile(&history).ok_or(GeometryError::NotBraggFamily)?.with_calibration(pitch, 0.0);
    writer.profile("profiles/front.csv", &front)?;
    if let Some(back) = built.back_profile(&history) {
        writer.profile("profiles/back.csv", &back.with_calibration(pitch, 0.0))?;
    }
    let shown = match &kernel {
        Some(k) => {
            let c = convolve_profile(&front, k)?.relabel("front_convolved");
            writer.profile("profiles/front_convolved.csv", &c)?;
            c
        }
        None => front.clone(),
    };
    if let Some(maps) = &history.maps {
        writer.maps(maps)?;
    }
    outcome.result("front_total", front.total());
    outcome.result("absorbed_total", history.absorbed);
    outcome.result("residual_internal", history.final_state.norm_sqr());
    outcome.result("displacement_expected_m", geometry_displacement(&points));
    if let Some((a, b)) = echo_peaks(&shown, &points) {
        outcome.result("peak_a_m", a.0);
        outcome.result("peak_b_m", b.0);
        outcome.result("peak_separation_m", b.0 - a.0);
        outcome.result("peak_ratio_a_over_b", if b.1 > 0.0 { a.1 / b.1 } else { f64::INFINITY });
    }
    Ok(outcome)
}

fn completeness_checks(outcome: &mut Outcome, history: &FieldHistory) {
    let accounted = history.absorbed + history.lost + history.final_state.norm_sqr();
    outcome.invariant(Check::at_most("detector_completeness", (accounted - 1.0).abs(), CONSERVATION_TOLERANCE));
    outcome.invariant(Check::at_most("unitarity_max_drift", history.max_norm_drift(), CONSERVATION_TOLERANCE));
}

fn geometry_displacement(points: &[ReflectionPoint]) -> f64 {
    let find = |l: &str| points.iter().find(|p| p.label == l).map_or(0.0, |p| p.position);
    find("B") - find("A")
}

/// The primary peak A near the entry and the first echo B near its
/// predicted position, as `(position, value)`.
pub fn echo_peaks(profile: &ProfileSeries, points: &[ReflectionPoint]) -> Option<((f64, f64), (f64, f64))> {
    let b = geometry_displacement(points);
    if !(b > 0.0) {
        return None;
    }
    let (ia, xa) = profile.argmax_in(-0.5 * b, 0.5 * b)?;
    let (ib, xb) = profile.argmax_in(0.5 * b, 1.5 * b)?;
    Some(((xa, profile.values()[ia]), (xb, profile.values()[ib])))
}

fn run_fit(config: &RunConfig, spec: &CrystalSpec, sim: &SimParams, writer: &mut Writer) -> Result<Outcome, CliError> {
    let template = config.geometry_spec(Scenario::Fit, spec, sim)?;
    let kernel = config.kernel(sim)?;
    let mut outcome = Outcome::new(Some(resolved(spec, sim)));
    let data = match config.data()? {
        Some(d) => {
            outcome.result("data", "file");
            d
        }
        None => {
            outcome.result("data", "synthetic");
            outcome.result("synthetic_angle_deg", template.back_face_angle);
            simulate_front_face(&template, sim, kernel.as_ref(), &PropagateOptions::default())?.relabel("synthetic")
        }
    };
    let fit = AngleFit { metric: config.fit.metric, ..AngleFit::new(config.fit.lo, config.fit.hi, config.fit.steps) };
    let result = fit_geometry_angle(&data, &template, sim, kernel.as_ref(), &fit)?;
    let best = simulate_front_face(&template.with_angle(result.best_parameter), sim, kernel.as_ref(), &fit.options)?;
    let (angles, objective): (Vec<f64>, Vec<f64>) = result.objective_curve.iter().copied().unzip();
    let curve = ProfileSeries::new("objective", PositionUnit::Dimensionless, angles, objective)
        .map_err(CompareError::Profile)?;
    writer.profile("profiles/fit_objective.csv", &curve)?;
    writer.profile("profiles/best_fit.csv", &best.clone().relabel("best_fit"))?;
    writer.profile("profiles/data.csv", &data)?;
    outcome.result("best_angle_deg", result.best_parameter);
    outcome.result("uncertainty_deg", result.uncertainty);
    outcome.result("metric", &result.metric);
    outcome.result("objective_at_best", compare::compare(&best, &data, fit.metric)?);
    Ok(outcome)
}

/// Reduced cross-module equivalence suite: exact counts against brute
/// force, lattice amplitudes against closed forms, limit forms against
/// Takagi-Taupin, the finite-difference integrator against both, and
/// Bragg pre-echo amplitudes against the Narayana sum.
pub fn oracle_suite() -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();

    let mut mismatches = 0u32;
    let mut table = pathcomb::BoundedDyckTable::new();
    for n in 1..=8u32 {
        let all = pathcomb::enumerate_paths(&PathSpec::new(n)).map_err(|e| config_error(e.to_string()))?;
        for p in -(n as i64)..=n as i64 {
            let count = all.iter().filter(|w| w.end_offset() == p).count() as u64;
            mismatches += u32::from(pathcomb::count_paths_to_node(n, p) != count.into());
        }
        let dyck = pathcomb::enumerate_paths(&PathSpec::dyck(n)).map_err(|e| config_error(e.to_string()))?;
        mismatches += u32::from(pathcomb::catalan(n) != (dyck.len() as u64).into());
        for k in 1..=n {
            let count = dyck.iter().filter(|w| w.peaks() == k).count() as u64;
            mismatches += u32::from(pathcomb::narayana(n, k) != count.into());
            for h in 1..=n {
                let bounded = dyck.iter().filter(|w| w.peaks() == k && w.max_height() <= h as i64).count() as u64;
                mismatches += u32::from(table.get(n, k, h) != bounded.into());
            }
        }
    }
    checks.push(Check::at_most("pathcomb_vs_enumeration_mismatches", mismatches as f64, 0.0));

    let mut worst: f64 = 0.0;
    for &n in &[5u64, 15] {
        for &gamma in &[PI / 20.0, PI / 4.0] {
            let (d, t) = laue_lattice_amplitudes(n, gamma)?;
            for p in -(n as i64)..=n as i64 {
                let i = (p + n as i64) as usize;
                worst = worst.max((d[i] - oracles::qi_amplitude_diffracted(n, p, gamma).abs()).abs());
                worst = worst.max((t[i] - oracles::qi_amplitude_transmitted(n, p, gamma).abs()).abs());
            }
        }
    }
    checks.push(Check::at_most("lattice_vs_closed_form_amplitude", worst, 1e-10));

    let mut worst: f64 = 0.0;
    for &(n, gamma) in &[(40.0, 0.05), (400.0, 0.01)] {
        let ratio = 2.0 * n * gamma / PI;
        for i in 0..=20 {
            let p = n * (-1.0 + 0.1 * i as f64) * 0.999;
            let g = -p / n;
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
            let gg = gamma * gamma;
            worst = worst.max(rel(oracles::limit_intensity_diffracted(n, p, gamma), gg * oracles::tt_intensity_diffracted(g, ratio)));
            worst = worst.max(rel(oracles::limit_intensity_transmitted(n, p, gamma), gg * oracles::tt_intensity_transmitted(g, ratio)));
        }
    }
    checks.push(Check::at_most("limit_vs_takagi_taupin_identity", worst, 1e-12));

    let pde = oracles::tt_integrate_pde(1.0, 1024, false)?;
    let central: Vec<(f64, f64)> = pde.diffracted_profile().iter().filter(|(g, _)| g.abs() <= 0.9).collect();
    let peak = central.iter().map(|(g, _)| oracles::tt_intensity_diffracted(*g, 1.0)).fold(0.0, f64::max);
    let err = central.iter().map(|(g, v)| (v - oracles::tt_intensity_diffracted(*g, 1.0)).abs()).fold(0.0, f64::max)
        / peak;
    checks.push(Check::at_most("pde_vs_takagi_taupin_k1024", err, 0.05));

    let (h, gamma) = (40usize, PI / 50.0);
    let built = build(&GeometrySpec::bragg(4 * h, h), &unit_sim(gamma))?;
    let history = propagate(&built.initial_state(), &built.lattice, &PropagateOptions::default())?;
    let front = built.front_profile(&history).ok_or(GeometryError::NotBraggFamily)?;
    let mut worst: f64 = 0.0;
    for (x, v) in front.iter() {
        let k = x as i64;
        if k >= 2 && k % 2 == 0 && k <= 2 * h as i64 {
            let n = (k / 2) as u64;
            worst = worst.max((v.sqrt() - oracles::bragg_amplitude_exact(n, gamma).abs()).abs());
        }
    }
    checks.push(Check::at_most("bragg_pre_echo_vs_narayana", worst, 1e-12));

    let built = build(&GeometrySpec::laue_layers(200), &unit_sim(PI / 8.0))?;
    let history = propagate(&built.initial_state(), &built.lattice, &PropagateOptions::default())?;
    checks.push(Check::at_most("laue_unitarity_max_drift", history.max_norm_drift(), 1e-12));
    Ok(checks)
}

/// Lattice parameters with unit pitch and the given node strength.
fn unit_sim(gamma: f64) -> SimParams {
    SimParams { layers: 1, gamma, dx: 2.0, dz: 2.0 }
}

/// `|ψ_H|`, `|ψ_0|` at exit nodes `p = -n..=n` of an `n`-bilayer slab.
pub fn laue_lattice_amplitudes(n: u64, gamma: f64) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let columns = 2 * n as usize + 1;
    let rows = 2 * columns + 3;
    let entry = rows / 2;
    let lattice = LatticeGeometry::uniform(columns, rows, entry, NodeKind::Crystal(UnitaryParams::new(gamma)))
        .map_err(|e| CliError::Geometry(e.into()))?;
    let history = propagate(&StateVector::delta(rows, entry, Direction::Transmitted), &lattice, &Default::default())?;
    let s = &history.final_state;
    let (mut d, mut t) = (Vec::new(), Vec::new());
    for p in -(n as i64)..=n as i64 {
        let r = (entry as i64 + 2 * p) as usize;
        d.push(s.beta(r - 1).norm());
        t.push(s.alpha(r + 1).norm());
    }
    Ok((d, t))
}

fn run_oracle_check(writer: &mut Writer) -> Result<Outcome, CliError> {
    let checks = oracle_suite()?;
    let mut outcome = Outcome::new(None);
    let path = writer.path("profiles/oracle_checks.csv");
    let mut out = BufWriter::new(File::create(&path).map_err(io_error(&path))?);
    writeln!(out, "check,value,tolerance,pass").map_err(io_error(&path))?;
    for c in &checks {
        writeln!(out, "{},{:?},{:?},{}", c.name, c.value, c.tolerance, c.pass).map_err(io_error(&path))?;
    }
    out.flush().map_err(io_error(&path))?;
    outcome.result("passed", checks.iter().filter(|c| c.pass).count());
    outcome.result("total", checks.len());
    outcome.checks = checks;
    Ok(outcome)
}

/// Pass/fail table of a manifest's checks.
pub fn format_checks(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    checks
        .iter()
        .map(|c| {
            let status = if c.pass { "PASS" } else { "FAIL" };
            format!("{status}  {:<width$}  {:>12.4e}  (tol {:.1e})\n", c.name, c.value, c.tolerance)
        })
        .collect()
}

/// Silicon (111) material constants in config units: `V_cell` Å³, `F_H` fm, `d` Å.
pub fn silicon_111_constants() -> (f64, f64, f64) {
    let a = SILICON_LATTICE_CONSTANT * 1e10;
    (a * a * a, 4.0 * 2f64.sqrt() * SILICON_SCATTERING_LENGTH * 1e15, a / 3f64.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_thickness_is_reported_by_field() {
        let c = parse_config(r#"{"scenario":"laue","crystal":{"material":"si111","lambda":4.43},"sim":{"gamma":0.1}}"#)
            .unwrap();
        let e = c.resolve_crystal().unwrap_err();
        assert_eq!(e.to_string(), "crystal.D required");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn exactly_one_resolution() {
        let mut c = preset(Scenario::Laue);
        c.sim = SimConfig { layers: Some(3), gamma: Some(0.1) };
        assert!(c.resolution().is_err());
        c.apply(&Overrides { layers: Some(7), ..Default::default() });
        assert_eq!(c.resolution().unwrap(), Resolution::Layers(7));
    }

    #[test]
    fn explicit_constants_match_material() {
        let (v, f, d) = silicon_111_constants();
        let mut c = preset(Scenario::Bragg);
        let from_material = c.resolve_crystal().unwrap();
        c.crystal.material = None;
        c.crystal.cell_volume_a3 = Some(v);
        c.crystal.structure_factor_fm = Some(f);
        c.crystal.plane_spacing_a = Some(d);
        let explicit = c.resolve_crystal().unwrap();
        assert!((explicit.cell_volume / from_material.cell_volume - 1.0).abs() < 1e-14);
        assert!((explicit.plane_spacing / from_material.plane_spacing - 1.0).abs() < 1e-14);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse_config(r#"{"scenario":"laue","crystl":{}}"#).is_err());
    }
}
