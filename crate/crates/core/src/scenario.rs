//! End-to-end scenario runs driven by a TOML config.
//!
//! A run goes geometry → kernel → closed-form and Fock-route phase reports →
//! (optionally) the evolution oracle → (optionally) gyrotropic filtering, and
//! cross-checks each stage against the previous ones. Data files contain no
//! timestamps; run metadata goes to a separate `run.log`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{evolve, EvolutionResult, EvolveOptions, DEFAULT_STEP_TOLERANCE};
use crate::fock::{build_fock_system, phases_from_fock, IdentityReport, ModeOccupation};
use crate::geometry::{
    helix_to_trajectory_with, sampled_path_to_trajectory_with, AngularTrajectory, HelixSpec,
    PathOptions, SampledPath, DEFAULT_CLOSURE_TOL, DEFAULT_POLE_TOL,
};
use crate::gyrotropic::{
    regime_sweep, surviving_vacuum_phase_with, FilteredVacuumReport, GyrotropicTensors, SweepGrid,
    DEFAULT_CUTOFF_EPS,
};
use crate::io::write_atomic;
use crate::phase::{mode_resolved_phases, phase_kernel, solid_angle_of_cone, Helicity, PhaseReport};
use crate::plot::{emit_plot_data, regime_map, theta_sweep, turns_accumulation, PlotTable};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub occupations: OccupationConfig,
    #[serde(default)]
    pub media: Option<MediaConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory relative paths are resolved against; set by [`ScenarioConfig::load`].
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub helix: Option<HelixConfig>,
    pub path_file: Option<PathBuf>,
}

/// Helix geometry; give exactly one of `pitch_per_turn` or `theta` (radians).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelixConfig {
    pub radius: f64,
    pub pitch_per_turn: Option<f64>,
    pub theta: Option<f64>,
    pub turns: f64,
    pub samples_per_turn: usize,
}

impl HelixConfig {
    pub fn to_spec(&self) -> Result<HelixSpec> {
        let spec = match (self.pitch_per_turn, self.theta) {
            (Some(pitch), None) => HelixSpec {
                radius: self.radius,
                pitch_per_turn: pitch,
                turns: self.turns,
                samples_per_turn: self.samples_per_turn,
            },
            (None, Some(theta)) => {
                if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
                    return Err(Error::config(format!(
                        "helix theta must lie in (0, π/2], got {theta}"
                    )));
                }
                HelixSpec::with_tilt(self.radius, theta, self.turns, self.samples_per_turn)
            }
            _ => {
                return Err(Error::config(
                    "helix needs exactly one of pitch_per_turn or theta",
                ))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationConfig {
    pub n_r: usize,
    pub n_l: usize,
    pub n_max: usize,
}

impl Default for OccupationConfig {
    fn default() -> Self {
        OccupationConfig {
            n_r: 0,
            n_l: 0,
            n_max: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediaConfig {
    pub eps1: f64,
    pub eps2: f64,
    #[serde(default = "one")]
    pub eps3: f64,
    pub mu1: f64,
    pub mu2: f64,
    #[serde(default = "one")]
    pub mu3: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
}

fn one() -> f64 {
    1.0
}

impl MediaConfig {
    pub fn tensors(&self) -> GyrotropicTensors {
        GyrotropicTensors {
            eps1: self.eps1,
            eps2: self.eps2,
            eps3: self.eps3,
            mu1: self.mu1,
            mu2: self.mu2,
            mu3: self.mu3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    pub enabled: bool,
    /// Record per-step traces for plotting.
    #[serde(default)]
    pub trace: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            enabled: true,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub closure: f64,
    pub pole: f64,
    /// Integrator error target.
    pub integrator: f64,
    /// Oracle geometric phase vs. kernel.
    pub oracle: f64,
    /// Opposite helicities must give opposite oracle phases.
    pub antisymmetry: f64,
    /// Relative agreement of the Fock and closed-form routes.
    pub cross_check: f64,
    /// `|n²|` below this counts as cutoff.
    pub cutoff: f64,
    pub norm_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            closure: DEFAULT_CLOSURE_TOL,
            pole: DEFAULT_POLE_TOL,
            integrator: DEFAULT_STEP_TOLERANCE,
            oracle: 1e-6,
            antisymmetry: 1e-9,
            cross_check: 1e-12,
            cutoff: DEFAULT_CUTOFF_EPS,
            norm_drift: 1e-9,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let named = [
            ("closure", self.closure),
            ("pole", self.pole),
            ("integrator", self.integrator),
            ("oracle", self.oracle),
            ("antisymmetry", self.antisymmetry),
            ("cross_check", self.cross_check),
            ("cutoff", self.cutoff),
            ("norm_drift", self.norm_drift),
        ];
        for (name, v) in named {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "tolerance {name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        if self.integrator == 0.0 {
            return Err(Error::config("tolerance integrator must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Toml,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
    #[serde(default)]
    pub plots: bool,
}

fn default_formats() -> Vec<Format> {
    vec![Format::Toml, Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            formats: default_formats(),
            plots: false,
        }
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("invalid scenario config: {e}")))?;
        cfg.validate_fields()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    fn validate_fields(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        match (&self.geometry.helix, &self.geometry.path_file) {
            (Some(h), None) => {
                h.to_spec()?;
            }
            (None, Some(_)) => {}
            _ => {
                return Err(Error::config(
                    "geometry needs exactly one of helix or path_file",
                ))
            }
        }
        let occ = &self.occupations;
        if occ.n_max < 1 {
            return Err(Error::config("n_max must be at least 1"));
        }
        if occ.n_r > occ.n_max || occ.n_l > occ.n_max {
            return Err(Error::config(format!(
                "occupation ({}, {}) exceeds n_max = {}",
                occ.n_r, occ.n_l, occ.n_max
            )));
        }
        if let Some(m) = &self.media {
            m.tensors().validate()?;
            if !(m.omega.is_finite() && m.omega > 0.0) {
                return Err(Error::config(format!("media omega must be positive, got {}", m.omega)));
            }
        }
        self.tolerances.validate()?;
        if self.output.formats.is_empty() {
            return Err(Error::config("output formats must not be empty"));
        }
        if self.output.dir.as_os_str().is_empty() {
            return Err(Error::config("output dir must not be empty"));
        }
        Ok(())
    }

    pub fn path_options(&self) -> PathOptions {
        PathOptions {
            closure_tol: self.tolerances.closure,
            pole_tol: self.tolerances.pole,
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output.dir)
    }

    /// Builds the wave-vector trajectory from whichever geometry source is configured.
    pub fn trajectory(&self) -> Result<AngularTrajectory> {
        match (&self.geometry.helix, &self.geometry.path_file) {
            (Some(h), None) => {
                let spec = h.to_spec()?;
                helix_to_trajectory_with(&spec, spec.turns, self.path_options())
            }
            (None, Some(p)) => {
                let path = SampledPath::read(self.base_dir.join(p))?;
                sampled_path_to_trajectory_with(&path, self.path_options())
            }
            _ => Err(Error::config("geometry needs exactly one of helix or path_file")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Treat a degenerate azimuth (path through a pole) as an error.
    pub strict: bool,
    /// Recorded in the run log; reserved for randomized checks.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckFailure {
    pub invariant: &'static str,
    pub detail: String,
}

impl fmt::Display for CheckFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.detail)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub phase_report: PhaseReport,
    pub fock_report: PhaseReport,
    pub identities: IdentityReport,
    pub evolution: Option<[EvolutionResult; 2]>,
    pub media: Option<FilteredVacuumReport>,
    pub failures: Vec<CheckFailure>,
    pub files: Vec<PathBuf>,
}

impl ScenarioOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            3
        }
    }
}

/// Process exit status for a failed run.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Consistency(_) => 3,
        Error::Resource(_) | Error::Integration(_) => 4,
        _ => 2,
    }
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE) || a == b
}

/// Runs the full pipeline and writes reports into the configured output directory.
pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<ScenarioOutcome> {
    cfg.validate_fields()?;
    let tol = cfg.tolerances;
    let traj = cfg.trajectory()?;
    if opts.strict && traj.has_degenerate_phi() {
        return Err(Error::config(
            "trajectory passes within the pole tolerance (azimuth undefined); rejected in strict mode",
        ));
    }
    let mut failures = Vec::new();
    let mut fail = |invariant: &'static str, detail: String| {
        failures.push(CheckFailure { invariant, detail })
    };

    let kernel = phase_kernel(&traj)?;
    if let (Some(h), true) = (&cfg.geometry.helix, traj.is_closed()) {
        let spec = h.to_spec()?;
        let expected = spec.turns.round() * solid_angle_of_cone(spec.tilt());
        if (kernel.value - expected).abs() > tol.oracle {
            fail(
                "cyclic solid angle",
                format!("kernel {} vs {} expected", kernel.value, expected),
            );
        }
    }

    let occ = cfg.occupations;
    let phase_report = mode_resolved_phases(kernel, occ.n_r as i64, occ.n_l as i64)?;
    let sys = build_fock_system(occ.n_max)?;
    let identities = sys.identities();
    let fock_report = phases_from_fock(&sys, ModeOccupation::new(occ.n_r, occ.n_l), kernel)?;
    for (a, b) in fock_report.per_mode.iter().zip(&phase_report.per_mode) {
        if !rel_close(a.phase_total, b.phase_total, tol.cross_check)
            || !rel_close(a.phase_quantal, b.phase_quantal, tol.cross_check)
            || !rel_close(a.phase_vacuum, b.phase_vacuum, tol.cross_check)
        {
            fail(
                "fock route equivalence",
                format!("sigma {:?}: fock {a:?} vs closed form {b:?}", a.sigma),
            );
        }
    }
    if fock_report.vacuum_sum != 0.0 || phase_report.vacuum_sum != 0.0 {
        fail(
            "vacuum cancellation",
            format!(
                "vacuum sums {} (fock), {} (closed form)",
                fock_report.vacuum_sum, phase_report.vacuum_sum
            ),
        );
    }

    let evolution = if cfg.oracle.enabled {
        let eopts = EvolveOptions {
            step_tolerance: tol.integrator,
            record_trace: cfg.oracle.trace,
        };
        let right = evolve(&traj, Helicity::Right, eopts)?;
        let left = evolve(&traj, Helicity::Left, eopts)?;
        let geo = right.geometric_phase_numeric;
        if (geo.abs() - kernel.value.abs()).abs() > tol.oracle {
            fail(
                "oracle agreement",
                format!("|numeric geometric phase| {} vs |kernel| {}", geo.abs(), kernel.value.abs()),
            );
        }
        if (geo + left.geometric_phase_numeric).abs() > tol.antisymmetry {
            fail(
                "helicity antisymmetry",
                format!("sigma=+1 gives {geo}, sigma=-1 gives {}", left.geometric_phase_numeric),
            );
        }
        for r in [&right, &left] {
            if r.norm_drift > tol.norm_drift {
                fail("unitarity", format!("norm drift {} for {:?}", r.norm_drift, r.sigma));
            }
        }
        Some([right, left])
    } else {
        None
    };

    let media = cfg
        .media
        .as_ref()
        .map(|m| surviving_vacuum_phase_with(&m.tensors(), m.omega, kernel, tol.cutoff))
        .transpose()?;

    let dir = cfg.output_dir();
    let mut files = Vec::new();
    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, bytes)?;
        files.push(p);
        Ok(())
    };
    for format in &cfg.output.formats {
        match format {
            Format::Toml => {
                put("phase_report.toml".into(), phase_report.to_toml()?.as_bytes())?;
                put("fock_report.toml".into(), fock_report.to_toml()?.as_bytes())?;
                put("fock_identities.toml".into(), identities.to_toml()?.as_bytes())?;
                if let Some(runs) = &evolution {
                    for r in runs {
                        put(format!("evolution_{}.toml", label(r.sigma)), r.to_toml()?.as_bytes())?;
                    }
                }
                if let Some(m) = &media {
                    put("media.toml".into(), m.to_toml()?.as_bytes())?;
                }
            }
            Format::Csv => {
                put("phase_report.csv".into(), &phase_report.to_csv()?)?;
                put("fock_report.csv".into(), &fock_report.to_csv()?)?;
                if let Some(runs) = &evolution {
                    for r in runs {
                        put(format!("evolution_{}.csv", label(r.sigma)), &r.to_csv()?)?;
                        if let Some(bytes) = r.trace_csv()? {
                            put(format!("trace_{}.csv", label(r.sigma)), &bytes)?;
                        }
                    }
                }
                if let Some(m) = &media {
                    put("media.csv".into(), &m.to_csv()?)?;
                }
            }
        }
    }

    if cfg.output.plots {
        let mut tables: Vec<PlotTable> = Vec::new();
        if let Some(h) = &cfg.geometry.helix {
            let spec = h.to_spec()?;
            tables.push(theta_sweep(1e-3, std::f64::consts::FRAC_PI_2, 32, spec.samples_per_turn)?);
            if spec.turns >= 1.0 {
                tables.push(turns_accumulation(&spec)?);
            }
        }
        if let Some(m) = &cfg.media {
            let grid = SweepGrid {
                eps1: (-2.0, 2.0, 41),
                eps2: (-3.0, 3.0, 61),
                mu1: m.mu1,
                mu2: m.mu2,
            };
            tables.push(regime_map(&regime_sweep(&grid, tol.cutoff)?)?);
        }
        files.extend(emit_plot_data(&tables, &dir)?);
    }

    let log = run_log(cfg, opts, &files, &failures);
    write_atomic(&dir.join("run.log"), log.as_bytes())?;

    Ok(ScenarioOutcome {
        phase_report,
        fock_report,
        identities,
        evolution,
        media,
        failures,
        files,
    })
}

fn label(sigma: Helicity) -> &'static str {
    match sigma {
        Helicity::Right => "right",
        Helicity::Left => "left",
    }
}

fn run_log(cfg: &ScenarioConfig, opts: RunOptions, files: &[PathBuf], failures: &[CheckFailure]) -> String {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let mut s = format!(
        "version = {}\nunix_time = {now}\nstrict = {}\nseed = {:?}\nschema_version = {}\n",
        env!("CARGO_PKG_VERSION"),
        opts.strict,
        opts.seed,
        cfg.schema_version
    );
    for f in files {
        s.push_str(&format!("wrote {}\n", f.display()));
    }
    for f in failures {
        s.push_str(&format!("FAILED {f}\n"));
    }
    s
}
