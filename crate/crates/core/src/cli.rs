//! Batch front end: TOML scenario files, experiment presets, and the run
//! directory layout.
//!
//! A scenario is merged over its preset (tables merge key by key, arrays
//! and scalars replace) and then over built-in defaults. The fully resolved
//! scenario is written back as `manifest.toml`, which is itself a valid
//! scenario file, so a run can be repeated from its manifest alone.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::forward::{solve_scattering, SolverSettings};
use crate::geometry::{SplineBasis, SurfaceProfile};
use crate::inversion::{recursive_newton, window_guess, Checkpoint, InversionConfig, InversionState, IterationRecord};
use crate::synth::{make_dataset, measured_field, odd_wavenumbers, Grid, MeasurementSet, NoiseDistribution, NoiseSpec};
use crate::verification::{run_suite, VerifySettings};
use crate::waves::IncidentConfig;
use crate::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Points of the uniform `x1` grid used for profile CSVs.
const PROFILE_SAMPLES: usize = 401;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Scattered far/near fields of the configured surface.
    Forward,
    /// Noisy phaseless datasets.
    Synth,
    /// Reconstruction from far-field intensities.
    InvertFar,
    /// Reconstruction from near-field intensities.
    InvertNear,
    /// Translation-invariance and solver property suite.
    Verify,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Forward => "forward",
            Mode::Synth => "synth",
            Mode::InvertFar => "invert-far",
            Mode::InvertNear => "invert-near",
            Mode::Verify => "verify",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rough-imager",
    version,
    about = "Scattering by locally rough surfaces and phaseless surface reconstruction"
)]
pub struct Args {
    #[arg(value_enum)]
    pub mode: Mode,
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "output")]
    pub out: PathBuf,
    /// Overrides `noise.seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    pub threads: Option<usize>,
}

/// A failure classified by exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownPreset(_) | Error::Parse(_) | Error::Io(_) => {
                CliError::Config(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn key_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProfileSection {
    /// A profile preset name, `spline`, or `unknown` (data files only).
    pub name: String,
    pub vertices: Option<Vec<[f64; 2]>>,
    /// Coefficients when `name = "spline"`; the basis has one function per
    /// coefficient on `(-basis_radius, basis_radius)`.
    pub coefficients: Option<Vec<f64>>,
    pub basis_radius: f64,
    pub shift: f64,
}

impl Default for ProfileSection {
    fn default() -> Self {
        ProfileSection {
            name: "example1".into(),
            vertices: None,
            coefficients: None,
            basis_radius: 1.0,
            shift: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IncidentSection {
    /// One entry per incident configuration; each holds one angle or a
    /// superposed pair.
    pub angles: Vec<Vec<f64>>,
    pub degrees: bool,
}

impl Default for IncidentSection {
    fn default() -> Self {
        IncidentSection {
            angles: vec![vec![-30.0, 30.0]],
            degrees: true,
        }
    }
}

impl IncidentSection {
    fn radians(&self) -> Vec<Vec<f64>> {
        let f = if self.degrees {
            std::f64::consts::PI / 180.0
        } else {
            1.0
        };
        self.angles.iter().map(|a| a.iter().map(|t| t * f).collect()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrequencySection {
    /// `k = 1, 3, ..., 2 count - 1` unless `list` is given.
    pub count: usize,
    pub list: Option<Vec<f64>>,
}

impl Default for FrequencySection {
    fn default() -> Self {
        FrequencySection { count: 4, list: None }
    }
}

impl FrequencySection {
    fn wavenumbers(&self) -> Vec<f64> {
        self.list.clone().unwrap_or_else(|| odd_wavenumbers(self.count))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Far,
    Near,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub kind: GridKind,
    pub n_f: usize,
    pub height: f64,
    pub half_width: f64,
    pub points: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            kind: GridKind::Far,
            n_f: 200,
            height: 1.0,
            half_width: 1.0,
            points: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub delta: f64,
    pub seed: u64,
    pub distribution: NoiseDistribution,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            delta: 0.05,
            seed: 0,
            distribution: NoiseDistribution::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub radius: f64,
    pub grading: u32,
    pub points_per_wavelength: f64,
    pub min_nodes: usize,
    pub eta: Option<f64>,
    /// Resolution of the data-generating solver relative to the inversion
    /// solver.
    pub data_mesh_ratio: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = SolverSettings::default();
        SolverSection {
            radius: s.radius,
            grading: s.grading,
            points_per_wavelength: s.points_per_wavelength,
            min_nodes: s.min_nodes,
            eta: None,
            data_mesh_ratio: 1.5,
        }
    }
}

impl SolverSection {
    fn settings(&self) -> SolverSettings {
        SolverSettings {
            radius: self.radius,
            grading: self.grading,
            points_per_wavelength: self.points_per_wavelength,
            min_nodes: self.min_nodes,
            eta: self.eta,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InversionSection {
    /// Number `M` of spline basis functions.
    pub basis: usize,
    pub radius: f64,
    pub rho: f64,
    pub tau: f64,
    pub max_inner: usize,
    pub divergence_limit: usize,
    /// Explicit initial coefficients; otherwise `initial_value` on the
    /// 1-based index window `initial_window`.
    pub initial: Option<Vec<f64>>,
    pub initial_window: [usize; 2],
    pub initial_value: f64,
    /// Noise level used in the stopping rule; defaults to `noise.delta`.
    pub assumed_delta: Option<f64>,
}

impl Default for InversionSection {
    fn default() -> Self {
        InversionSection {
            basis: 10,
            radius: 1.0,
            rho: 0.8,
            tau: 1.5,
            max_inner: 25,
            divergence_limit: 3,
            initial: None,
            initial_window: [2, 4],
            initial_value: 0.1,
            assumed_delta: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Dataset files to invert instead of synthesising data; relative
    /// paths are taken from the scenario file's directory.
    pub files: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub k: f64,
    /// Degrees.
    pub theta: f64,
    /// Degrees.
    pub pair: [f64; 2],
    pub shift: f64,
    pub n_f: usize,
    pub min_nodes: usize,
    pub lattice_radius: f64,
    pub lattice_min_nodes: usize,
    pub flat_wavenumbers: Vec<f64>,
}

impl Default for VerifySection {
    fn default() -> Self {
        let v = VerifySettings::default();
        VerifySection {
            k: v.k,
            theta: v.theta.to_degrees().round(),
            pair: [v.pair[0].to_degrees().round(), v.pair[1].to_degrees().round()],
            shift: v.shift,
            n_f: v.n_f,
            min_nodes: v.settings.min_nodes,
            lattice_radius: v.lattice_settings.radius,
            lattice_min_nodes: v.lattice_settings.min_nodes,
            flat_wavenumbers: v.flat_wavenumbers,
        }
    }
}

/// Provenance written into the manifest; ignored when read back.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub mode: String,
    pub version: String,
    pub threads: usize,
    pub status: String,
}

/// A fully resolved scenario.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Scenario {
    pub preset: Option<String>,
    pub profile: ProfileSection,
    pub incident: IncidentSection,
    pub frequencies: FrequencySection,
    pub grid: GridSection,
    pub noise: NoiseSection,
    pub solver: SolverSection,
    pub inversion: InversionSection,
    pub data: DataSection,
    pub verify: VerifySection,
    pub run: Option<RunSection>,
}

/// Names accepted for `preset`.
pub const SCENARIO_PRESETS: [&str; 9] = [
    "example1-shape-only",
    "example2-two-wave",
    "example3-piecewise",
    "example4-multiscale",
    "example5-multiscale",
    "example6-piecewise-near",
    "example7-multiscale-near",
    "desk-far",
    "desk-near",
];

/// TOML text of a scenario preset.
pub fn preset_text(name: &str) -> Option<&'static str> {
    Some(match name {
        "example1-shape-only" => {
            r#"
[profile]
name = "example1"
[incident]
angles = [[-30.0]]
[frequencies]
count = 10
[grid]
kind = "far"
[inversion]
basis = 10
initial_window = [2, 4]
initial_value = 0.1
"#
        }
        "example2-two-wave" => {
            r#"
[profile]
name = "example1"
[incident]
angles = [[-30.0, 30.0]]
[frequencies]
count = 13
[grid]
kind = "far"
[inversion]
basis = 10
initial_window = [2, 4]
initial_value = 0.1
"#
        }
        "example3-piecewise" => {
            r#"
[profile]
name = "example3-piecewise"
[incident]
angles = [[-30.0, 30.0]]
[frequencies]
count = 18
[grid]
kind = "far"
[inversion]
basis = 40
initial_window = [5, 15]
initial_value = 0.05
"#
        }
        "example4-multiscale" => {
            r#"
[profile]
name = "example4-multiscale"
[incident]
angles = [[-30.0, 30.0]]
[frequencies]
count = 30
[grid]
kind = "far"
[inversion]
basis = 40
initial_window = [10, 30]
initial_value = 0.05
"#
        }
        "example5-multiscale" => {
            r#"
[profile]
name = "example5-multiscale"
[incident]
angles = [[-30.0, 30.0]]
[frequencies]
count = 35
[grid]
kind = "far"
[inversion]
basis = 40
initial_window = [25, 35]
initial_value = 0.05
"#
        }
        "example6-piecewise-near" => {
            r#"
[profile]
name = "example3-piecewise"
[incident]
angles = [[-30.0], [30.0]]
[frequencies]
count = 18
[grid]
kind = "near"
[inversion]
basis = 40
initial_value = 0.0
"#
        }
        "example7-multiscale-near" => {
            r#"
[profile]
name = "example5-multiscale"
[incident]
angles = [[-30.0], [30.0]]
[frequencies]
count = 30
[grid]
kind = "near"
[inversion]
basis = 40
initial_value = 0.0
"#
        }
        "desk-far" => {
            r#"
[profile]
name = "example1"
[incident]
angles = [[-30.0, 30.0]]
[frequencies]
count = 4
[grid]
kind = "far"
[noise]
delta = 0.01
[inversion]
basis = 10
initial_window = [2, 4]
initial_value = 0.1
"#
        }
        "desk-near" => {
            r#"
[profile]
name = "example1"
[incident]
angles = [[-30.0]]
[frequencies]
count = 4
[grid]
kind = "near"
[noise]
delta = 0.01
[inversion]
basis = 10
initial_value = 0.0
"#
        }
        _ => return None,
    })
}

/// Tables merge key by key; everything else in `top` replaces `base`.
fn merge(base: &mut toml::Value, top: toml::Value) {
    match (base, top) {
        (toml::Value::Table(b), toml::Value::Table(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(existing) => merge(existing, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, t) => *b = t,
    }
}

/// Parses scenario text, applying its preset.
pub fn parse_scenario(text: &str) -> Result<Scenario, CliError> {
    let user: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
    let preset = user.get("preset").map(|p| {
        p.as_str()
            .map(str::to_string)
            .ok_or_else(|| key_err("preset", "expected a string"))
    });
    let mut merged = toml::Value::Table(Default::default());
    if let Some(name) = preset.transpose()? {
        let text = preset_text(&name).ok_or_else(|| {
            key_err(
                "preset",
                format!("unknown preset `{name}`; known: {}", SCENARIO_PRESETS.join(", ")),
            )
        })?;
        merged = toml::from_str(text).map_err(|e| CliError::Config(format!("preset `{name}`: {e}")))?;
    }
    merge(&mut merged, user);
    let scenario: Scenario = merged
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
    Ok(scenario)
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_scenario(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

impl Scenario {
    /// Checks the keys a mode depends on, naming the first offending one.
    pub fn validate(&self, mode: Mode) -> Result<(), CliError> {
        let s = &self.solver;
        if !(s.radius > 0.0) {
            return Err(key_err("solver.radius", "must be positive"));
        }
        if s.grading < 2 {
            return Err(key_err("solver.grading", "must be at least 2"));
        }
        if !(s.points_per_wavelength > 0.0) {
            return Err(key_err("solver.points_per_wavelength", "must be positive"));
        }
        if s.eta == Some(0.0) {
            return Err(key_err("solver.eta", "must be nonzero"));
        }
        if !(s.data_mesh_ratio >= 1.0) {
            return Err(key_err("solver.data_mesh_ratio", "must be at least 1"));
        }
        if mode == Mode::Verify {
            let v = &self.verify;
            if !(v.k > 0.0) {
                return Err(key_err("verify.k", "must be positive"));
            }
            if v.pair[0] == v.pair[1] {
                return Err(key_err("verify.pair", "angles must differ"));
            }
            return Ok(());
        }
        if self.incident.angles.is_empty() {
            return Err(key_err("incident.angles", "needs at least one incident configuration"));
        }
        let ks = self.frequencies.wavenumbers();
        if ks.is_empty() {
            return Err(key_err("frequencies", "no wavenumbers (set count > 0 or a list)"));
        }
        if let Some(k) = ks.iter().find(|k| !(**k > 0.0)) {
            return Err(key_err("frequencies.list", format!("wavenumber {k} is not positive")));
        }
        for a in self.incident.radians() {
            IncidentConfig::new(1.0, a).map_err(|e| key_err("incident.angles", e))?;
        }
        if !(self.noise.delta >= 0.0) || self.noise.delta >= 1.0 {
            return Err(key_err("noise.delta", "must lie in [0, 1)"));
        }
        match self.grid.kind {
            GridKind::Far if self.grid.n_f < 2 => return Err(key_err("grid.n_f", "must be at least 2")),
            GridKind::Near if self.grid.points < 2 => return Err(key_err("grid.points", "must be at least 2")),
            GridKind::Near if !(self.grid.half_width > 0.0) => {
                return Err(key_err("grid.half_width", "must be positive"))
            }
            _ => {}
        }
        let wanted = match mode {
            Mode::InvertFar => Some(GridKind::Far),
            Mode::InvertNear => Some(GridKind::Near),
            _ => None,
        };
        if let Some(w) = wanted {
            if self.grid.kind != w {
                return Err(key_err(
                    "grid.kind",
                    format!("mode {} needs {:?} data", mode.name(), w).to_lowercase(),
                ));
            }
            let inv = &self.inversion;
            if inv.basis == 0 {
                return Err(key_err("inversion.basis", "must be positive"));
            }
            if !(inv.radius > 0.0 && inv.radius <= s.radius) {
                return Err(key_err("inversion.radius", "must lie in (0, solver.radius]"));
            }
            if !(inv.rho > 0.0 && inv.rho < 1.0) {
                return Err(key_err("inversion.rho", "must lie in (0, 1)"));
            }
            if !(inv.tau > 1.0) {
                return Err(key_err("inversion.tau", "must exceed 1"));
            }
            if let Some(init) = &inv.initial {
                if init.len() != inv.basis {
                    return Err(key_err(
                        "inversion.initial",
                        format!("needs {} coefficients", inv.basis),
                    ));
                }
            }
            let [a, b] = inv.initial_window;
            if a == 0 || a > b || b > inv.basis {
                return Err(key_err(
                    "inversion.initial_window",
                    format!("must satisfy 1 <= first <= last <= {}", inv.basis),
                ));
            }
            if let Some(d) = inv.assumed_delta {
                if !(d >= 0.0) {
                    return Err(key_err("inversion.assumed_delta", "must be nonnegative"));
                }
            }
        }
        if self.profile.name == "unknown" && (self.data.files.is_empty() || wanted.is_none()) {
            return Err(key_err(
                "profile.name",
                "`unknown` is only allowed when inverting data files",
            ));
        }
        if self.profile.name != "unknown" {
            self.profile_value().map_err(|e| key_err("profile", e))?;
        }
        Ok(())
    }

    /// The configured surface, or `None` for `unknown`.
    pub fn profile(&self) -> Result<Option<SurfaceProfile>, CliError> {
        if self.profile.name == "unknown" {
            return Ok(None);
        }
        self.profile_value().map(Some).map_err(|e| key_err("profile", e))
    }

    fn profile_value(&self) -> crate::Result<SurfaceProfile> {
        let p = &self.profile;
        let base = if p.name == "spline" {
            let coeffs = p
                .coefficients
                .clone()
                .ok_or_else(|| Error::Config("`spline` needs `coefficients`".into()))?;
            SurfaceProfile::spline(SplineBasis::new(coeffs.len(), p.basis_radius)?, coeffs)?
        } else {
            SurfaceProfile::from_preset(&p.name, p.vertices.clone())?
        };
        Ok(if p.shift != 0.0 { base.shifted(p.shift) } else { base })
    }

    fn grid(&self) -> crate::Result<Grid> {
        match self.grid.kind {
            GridKind::Far => Grid::far(self.grid.n_f),
            GridKind::Near => Grid::near(self.grid.height, self.grid.half_width, self.grid.points),
        }
    }

    fn noise(&self) -> NoiseSpec {
        NoiseSpec {
            delta: self.noise.delta,
            seed: self.noise.seed,
            distribution: self.noise.distribution,
        }
    }

    fn verify_settings(&self) -> VerifySettings {
        let v = &self.verify;
        let base = self.solver.settings();
        VerifySettings {
            profile: self.profile_value().unwrap_or(SurfaceProfile::Example1),
            k: v.k,
            theta: v.theta.to_radians(),
            pair: [v.pair[0].to_radians(), v.pair[1].to_radians()],
            shift: v.shift,
            n_f: v.n_f,
            settings: SolverSettings {
                min_nodes: v.min_nodes,
                ..base.clone()
            },
            lattice_settings: SolverSettings {
                radius: v.lattice_radius,
                min_nodes: v.lattice_min_nodes,
                ..base
            },
            flat_wavenumbers: v.flat_wavenumbers.clone(),
        }
    }

    fn label(&self) -> String {
        if self.profile.shift != 0.0 {
            format!("{} shifted by {}", self.profile.name, self.profile.shift)
        } else {
            self.profile.name.clone()
        }
    }
}

/// Formats `k` for file names: `5` or `2.5`.
fn k_tag(k: f64) -> String {
    format!("{k}")
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Samples `h` on `points` uniform nodes of `[-radius, radius]`.
pub fn profile_csv(profile: &SurfaceProfile, radius: f64, points: usize, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {title}");
    let _ = writeln!(s, "# columns = x1, h");
    for i in 0..points {
        let x = -radius + 2.0 * radius * i as f64 / (points - 1) as f64;
        let _ = writeln!(s, "{x:.10e}, {:.16e}", profile.jet(x)[0]);
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.10e}"))
}

/// Run log text: one line per inner iteration.
pub fn runlog_csv(history: &[IterationRecord]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# one line per residual evaluation; beta and step are those of the step taken from it"
    );
    let _ = writeln!(s, "# columns = k, iteration, err, beta, step_norm, flags");
    for r in history {
        let flags: Vec<String> = r.flags.iter().map(ToString::to_string).collect();
        let _ = writeln!(
            s,
            "{}, {}, {:.10e}, {}, {}, {}",
            r.k,
            r.iteration,
            r.err,
            fmt_opt(r.beta),
            fmt_opt(r.step_norm),
            if flags.is_empty() {
                "-".to_string()
            } else {
                flags.join("|")
            }
        );
    }
    s
}

/// Writes one gnuplot overlay script per `profile_k*.csv` in `dir`.
///
/// Scripts reference files by bare name, so they run from inside the
/// directory wherever it is moved.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut checkpoints: Vec<(f64, String)> = Vec::new();
    for entry in entries {
        let name = entry
            .map_err(|e| io_err(dir, e))?
            .file_name()
            .to_string_lossy()
            .into_owned();
        if let Some(k) = name.strip_prefix("profile_k").and_then(|r| r.strip_suffix(".csv")) {
            if let Ok(kv) = k.parse::<f64>() {
                checkpoints.push((kv, name));
            }
        }
    }
    if checkpoints.is_empty() {
        return Err(CliError::Config(format!(
            "{}: no profile_k*.csv checkpoints to plot",
            dir.display()
        )));
    }
    checkpoints.sort_by(|a, b| a.0.total_cmp(&b.0));
    let has_true = dir.join("profile_true.csv").exists();
    let has_initial = dir.join("profile_initial.csv").exists();
    let mut written = Vec::new();
    for (k, file) in checkpoints {
        let mut curves = Vec::new();
        if has_true {
            curves.push("\"profile_true.csv\" using 1:2 with lines lw 2 title \"true surface\"".to_string());
        }
        if has_initial {
            curves.push("\"profile_initial.csv\" using 1:2 with lines dt 2 title \"initial guess\"".to_string());
        }
        curves.push(format!(
            "\"{file}\" using 1:2 with lines lw 2 title \"reconstruction, k = {k}\""
        ));
        let script = format!(
            "# overlay at k = {k}; run with gnuplot from this directory\n\
             set datafile separator \",\"\n\
             set datafile commentschars \"#\"\n\
             set xlabel \"x1\"\n\
             set ylabel \"x2\"\n\
             set key top right\n\
             set terminal pngcairo size 900,500\n\
             set output \"profile_k{k}.png\"\n\
             plot {}\n",
            curves.join(", \\\n     ")
        );
        let path = dir.join(format!("plot_k{k}.gp"));
        write_file(&path, &script)?;
        written.push(path);
    }
    Ok(written)
}

/// Outcome of a completed run.
#[derive(Debug)]
pub struct RunSummary {
    pub mode: Mode,
    pub files: Vec<PathBuf>,
    /// Lines worth echoing on stdout.
    pub messages: Vec<String>,
    pub exit_code: i32,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_file(&path, text)?;
        self.files.push(path);
        Ok(())
    }
}

fn manifest_text(scenario: &Scenario, mode: Mode, threads: usize, status: &str) -> Result<String, CliError> {
    let mut resolved = scenario.clone();
    resolved.run = Some(RunSection {
        mode: mode.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        threads,
        status: status.into(),
    });
    let body = toml::to_string(&resolved).map_err(|e| CliError::Config(format!("manifest: {e}")))?;
    Ok(format!(
        "# rough-imager run manifest; a valid scenario file that repeats this run\n# rerun with: rough-imager {} --config manifest.toml\n{body}",
        mode.name()
    ))
}

/// Executes `mode` for a resolved scenario, writing into `out`.
/// `base_dir` resolves relative data-file paths.
pub fn run_scenario(
    mode: Mode,
    scenario: &Scenario,
    out: &Path,
    base_dir: &Path,
    threads: usize,
) -> Result<RunSummary, CliError> {
    scenario.validate(mode)?;
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    let mut w = Writer {
        dir: out,
        files: Vec::new(),
    };
    let mut messages = Vec::new();
    let (status, exit_code) = match mode {
        Mode::Forward => {
            run_forward(scenario, &mut w)?;
            ("ok".to_string(), EXIT_OK)
        }
        Mode::Synth => {
            let sets = synthesise(scenario)?;
            for set in &sets {
                w.put(&format!("data_k{}.txt", k_tag(set.k)), &set.to_text())?;
            }
            if let Some(p) = scenario.profile()? {
                w.put(
                    "profile_true.csv",
                    &profile_csv(&p, scenario.solver.radius, PROFILE_SAMPLES, "true surface"),
                )?;
            }
            ("ok".to_string(), EXIT_OK)
        }
        Mode::InvertFar | Mode::InvertNear => run_inversion(scenario, base_dir, &mut w, &mut messages)?,
        Mode::Verify => {
            let reports = run_suite(&scenario.verify_settings())?;
            let mut s = String::from("# columns = property, result, value, threshold, detail\n");
            for r in &reports {
                s.push_str(&r.line());
                s.push('\n');
                messages.push(r.line());
            }
            w.put("verify.csv", &s)?;
            if reports.iter().all(|r| r.passed) {
                ("all properties passed".to_string(), EXIT_OK)
            } else {
                ("some properties failed".to_string(), EXIT_NUMERICAL)
            }
        }
    };
    w.put("manifest.toml", &manifest_text(scenario, mode, threads, &status)?)?;
    messages.push(format!(
        "{}: {status}; {} files in {}",
        mode.name(),
        w.files.len(),
        out.display()
    ));
    Ok(RunSummary {
        mode,
        files: w.files,
        messages,
        exit_code,
    })
}

fn run_forward(scenario: &Scenario, w: &mut Writer<'_>) -> Result<(), CliError> {
    let profile = scenario
        .profile()?
        .ok_or_else(|| key_err("profile.name", "forward mode needs a surface"))?;
    let grid = scenario.grid()?;
    let settings = scenario.solver.settings();
    for k in scenario.frequencies.wavenumbers() {
        let mut s = String::new();
        let _ = writeln!(s, "# kind = {}", grid.kind());
        let _ = writeln!(s, "# k = {k:?}");
        let _ = writeln!(s, "# profile = {}", scenario.label());
        let _ = writeln!(
            s,
            "# field = {}",
            match grid {
                Grid::Far { .. } => "far-field pattern u^inf at angle t",
                Grid::Near { .. } => "u^r + u^s at (x1, height)",
            }
        );
        let _ = writeln!(s, "# columns = j, coordinate, re, im, intensity");
        for (l, angles) in scenario.incident.radians().into_iter().enumerate() {
            let cfg = IncidentConfig::new(k, angles)?;
            let sol = solve_scattering(&profile, &cfg, &settings)?;
            let field = measured_field(&sol, &cfg, &grid)?;
            let _ = writeln!(s, "# block = {l}");
            let _ = writeln!(s, "# incident = {:?}", cfg.angles());
            let _ = writeln!(s, "# mesh_n = {}", sol.mesh().n());
            let _ = writeln!(s, "# residual = {:e}", sol.residual());
            for (j, (x, u)) in grid.coordinates().iter().zip(&field).enumerate() {
                let _ = writeln!(s, "{j}, {x:.16e}, {:.16e}, {:.16e}, {:.16e}", u.re, u.im, u.norm_sqr());
            }
        }
        w.put(&format!("field_k{}.csv", k_tag(k)), &s)?;
    }
    w.put(
        "profile_true.csv",
        &profile_csv(&profile, scenario.solver.radius, PROFILE_SAMPLES, "true surface"),
    )?;
    Ok(())
}

fn synthesise(scenario: &Scenario) -> Result<Vec<MeasurementSet>, CliError> {
    let profile = scenario
        .profile()?
        .ok_or_else(|| key_err("profile.name", "data synthesis needs a surface"))?;
    let data_settings = scenario.solver.settings().refined(scenario.solver.data_mesh_ratio);
    Ok(make_dataset(
        &profile,
        &scenario.label(),
        &scenario.incident.radians(),
        &scenario.frequencies.wavenumbers(),
        &scenario.grid()?,
        &scenario.noise(),
        &data_settings,
    )?)
}

fn write_checkpoints(
    w: &mut Writer<'_>,
    basis: &SplineBasis,
    radius: f64,
    checkpoints: &[Checkpoint],
) -> Result<(), CliError> {
    for c in checkpoints {
        let p = SurfaceProfile::spline(basis.clone(), c.coefficients.clone())?;
        let flags: Vec<String> = c.flags.iter().map(ToString::to_string).collect();
        let title = format!(
            "reconstruction after k = {}; err = {:.6e}; iterations = {}; flags = {}; coefficients = {:?}",
            c.k,
            c.err,
            c.iterations,
            if flags.is_empty() { "-".into() } else { flags.join("|") },
            c.coefficients
        );
        w.put(
            &format!("profile_k{}.csv", k_tag(c.k)),
            &profile_csv(&p, radius, PROFILE_SAMPLES, &title),
        )?;
    }
    Ok(())
}

fn write_state(w: &mut Writer<'_>, state: &InversionState) -> Result<(), CliError> {
    let mut s = String::new();
    let _ = writeln!(s, "# frequency_index = {}", state.frequency_index);
    let _ = writeln!(s, "# iterations = {}", state.iterations);
    let _ = writeln!(s, "# columns = i, coefficient");
    for (i, a) in state.coefficients.iter().enumerate() {
        let _ = writeln!(s, "{}, {a:.16e}", i + 1);
    }
    w.put("state_snapshot.csv", &s)
}

fn run_inversion(
    scenario: &Scenario,
    base_dir: &Path,
    w: &mut Writer<'_>,
    messages: &mut Vec<String>,
) -> Result<(String, i32), CliError> {
    let truth = scenario.profile()?;
    let sets = if scenario.data.files.is_empty() {
        let sets = synthesise(scenario)?;
        for set in &sets {
            w.put(&format!("data_k{}.txt", k_tag(set.k)), &set.to_text())?;
        }
        sets
    } else {
        let mut sets = Vec::new();
        for f in &scenario.data.files {
            let path = base_dir.join(f);
            let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let set =
                MeasurementSet::parse(&text).map_err(|e| key_err("data.files", format!("{}: {e}", path.display())))?;
            if set.grid.kind() != scenario.grid().map_err(CliError::from)?.kind() {
                return Err(key_err(
                    "data.files",
                    format!("{} holds {} data", path.display(), set.grid.kind()),
                ));
            }
            sets.push(set);
        }
        sets
    };
    let inv = &scenario.inversion;
    let basis = SplineBasis::new(inv.basis, inv.radius)?;
    let initial = inv.initial.clone().unwrap_or_else(|| {
        window_guess(
            inv.basis,
            inv.initial_window[0],
            inv.initial_window[1],
            inv.initial_value,
        )
    });
    let radius = scenario.solver.radius;
    if let Some(t) = &truth {
        w.put(
            "profile_true.csv",
            &profile_csv(t, radius, PROFILE_SAMPLES, "true surface"),
        )?;
    }
    let init_profile = SurfaceProfile::spline(basis.clone(), initial.clone())?;
    w.put(
        "profile_initial.csv",
        &profile_csv(
            &init_profile,
            radius,
            PROFILE_SAMPLES,
            &format!("initial guess; coefficients = {initial:?}"),
        ),
    )?;
    let config = InversionConfig {
        basis: basis.clone(),
        rho: inv.rho,
        tau: inv.tau,
        delta: inv.assumed_delta.unwrap_or(scenario.noise.delta),
        max_inner: inv.max_inner,
        initial,
        settings: scenario.solver.settings(),
        divergence_limit: inv.divergence_limit,
    };
    match recursive_newton(&sets, &config) {
        Ok(state) => {
            w.put("runlog.csv", &runlog_csv(&state.history))?;
            write_checkpoints(w, &basis, radius, &state.checkpoints)?;
            w.files.extend(emit_plots(w.dir)?);
            if let Some(last) = state.checkpoints.last() {
                messages.push(format!("final k = {}: err = {:.4e}", last.k, last.err));
            }
            if let Some(t) = &truth {
                let rec = state.profile(&basis)?;
                let dev = (0..PROFILE_SAMPLES)
                    .map(|i| {
                        let x = -radius + 2.0 * radius * i as f64 / (PROFILE_SAMPLES - 1) as f64;
                        (rec.jet(x)[0] - t.jet(x)[0]).abs()
                    })
                    .fold(0.0, f64::max);
                messages.push(format!("max |h_rec - h_true| = {dev:.4e}"));
            }
            Ok(("ok".into(), EXIT_OK))
        }
        Err(failure) => {
            w.put("runlog.csv", &runlog_csv(&failure.state.history))?;
            write_checkpoints(w, &basis, radius, &failure.state.checkpoints)?;
            write_state(w, &failure.state)?;
            let code = CliError::from(failure.error).exit_code();
            let msg = format!(
                "failed at frequency index {}, iteration {}",
                failure.state.frequency_index, failure.state.iterations
            );
            messages.push(msg.clone());
            Ok((msg, code))
        }
    }
}

/// Parses arguments, runs, and returns the process exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let result = (|| -> Result<RunSummary, CliError> {
        let mut scenario = load_scenario(&args.config)?;
        if let Some(seed) = args.seed {
            scenario.noise.seed = seed;
        }
        let threads = args.threads.unwrap_or(0);
        if args.threads == Some(0) {
            return Err(key_err("--threads", "must be positive"));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
        let used = pool.current_num_threads();
        let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
        pool.install(|| run_scenario(args.mode, &scenario, &args.out, &base, used))
    })();
    match result {
        Ok(summary) => {
            for m in &summary.messages {
                println!("{m}");
            }
            summary.exit_code
        }
        Err(e) => {
            eprintln!("rough-imager: {e}");
            e.exit_code()
        }
    }
}
