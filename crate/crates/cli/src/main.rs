//! `vacphase` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::{error, info, warn};

use vacphase::evolution::{analytic_residual, EvolveOptions};
use vacphase::gyrotropic::{classify_with, regime_sweep, sweep_csv, GyrotropicTensors, SweepGrid};
use vacphase::io::write_atomic;
use vacphase::phase::quadrature_refine;
use vacphase::scenario::{exit_code_for, Format, RunOptions};
use vacphase::{
    build_fock_system, evolve, mode_resolved_phases, phase_kernel, run_scenario, Error, Helicity,
    Result, ScenarioConfig,
};

#[derive(Parser, Debug)]
#[command(name = "vacphase", version, about = "Geometric and vacuum phases of photons in helical fibers")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Scenario config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Reject trajectories through a pole of the momentum sphere.
    #[arg(long, global = true)]
    strict: bool,
    /// Recorded in the run log.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Phase kernel and mode-resolved phases of the configured geometry.
    Phase {
        /// Also report the kernel at this many doubled sample densities.
        #[arg(long)]
        refine: Option<usize>,
    },
    /// Integrate the photon spin equation along the geometry for both helicities.
    Evolve {
        /// Also check the residual of the closed-form solution.
        #[arg(long)]
        residual: bool,
    },
    /// Operator tables and structural identities of the truncated Fock space.
    Fock {
        /// Truncation per mode; defaults to `occupations.n_max` from the config.
        #[arg(long)]
        n_max: Option<usize>,
    },
    /// Gyrotropic media: mode classification or regime sweep.
    #[command(subcommand)]
    Media(MediaCommand),
    /// Full pipeline with cross-checks.
    Scenario,
}

#[derive(Subcommand, Debug)]
enum MediaCommand {
    /// Classify both circular modes; reads `[media]` from the config unless all values are given.
    Classify(MediaArgs),
    /// Verdicts over an ε₁ × ε₂ grid at fixed μ₁, μ₂.
    Sweep(SweepArgs),
}

#[derive(Args, Debug)]
struct MediaArgs {
    #[arg(long, allow_hyphen_values = true)]
    eps1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    eps2: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    mu2: Option<f64>,
    /// Angular frequency in rad/s.
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long, default_value_t = vacphase::gyrotropic::DEFAULT_CUTOFF_EPS)]
    cutoff: f64,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[arg(long, num_args = 3, value_names = ["FROM", "TO", "N"], allow_hyphen_values = true, default_values = ["-2", "2", "41"])]
    eps1: Vec<String>,
    #[arg(long, num_args = 3, value_names = ["FROM", "TO", "N"], allow_hyphen_values = true, default_values = ["-3", "3", "61"])]
    eps2: Vec<String>,
    #[arg(long, allow_hyphen_values = true, default_value_t = 1.0)]
    mu1: f64,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    mu2: f64,
    #[arg(long, default_value_t = vacphase::gyrotropic::DEFAULT_CUTOFF_EPS)]
    cutoff: f64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            error!("{e}");
            ExitCode::from(exit_code_for(&e) as u8)
        }
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    match &cli.command {
        Command::Phase { refine } => cmd_phase(c, *refine),
        Command::Evolve { residual } => cmd_evolve(c, *residual),
        Command::Fock { n_max } => cmd_fock(c, *n_max),
        Command::Media(MediaCommand::Classify(a)) => cmd_classify(c, a),
        Command::Media(MediaCommand::Sweep(a)) => cmd_sweep(c, a),
        Command::Scenario => cmd_scenario(c),
    }
}

fn load(c: &Common) -> Result<ScenarioConfig> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| Error::Config("--config is required for this command".into()))?;
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(out) = &c.out {
        cfg.output.dir = absolute(out)?;
    }
    Ok(cfg)
}

fn absolute(p: &Path) -> Result<PathBuf> {
    std::env::current_dir()
        .map(|cwd| cwd.join(p))
        .map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })
}

/// Output directory when no config is needed.
fn out_dir(c: &Common, cfg: Option<&ScenarioConfig>) -> Result<PathBuf> {
    match (&c.out, cfg) {
        (Some(o), _) => absolute(o),
        (None, Some(cfg)) => Ok(cfg.output_dir()),
        (None, None) => absolute(Path::new("out")),
    }
}

fn wants(cfg: &ScenarioConfig, f: Format) -> bool {
    cfg.output.formats.contains(&f)
}

fn put(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let p = dir.join(name);
    write_atomic(&p, bytes)?;
    info!("wrote {}", p.display());
    Ok(())
}

fn trajectory(c: &Common, cfg: &ScenarioConfig) -> Result<vacphase::AngularTrajectory> {
    let traj = cfg.trajectory()?;
    if traj.has_degenerate_phi() {
        if c.strict {
            return Err(Error::Config(
                "trajectory passes within the pole tolerance; rejected in strict mode".into(),
            ));
        }
        warn!("trajectory passes within the pole tolerance; azimuth carried forward");
    }
    Ok(traj)
}

fn cmd_phase(c: &Common, refine: Option<usize>) -> Result<i32> {
    let cfg = load(c)?;
    let traj = trajectory(c, &cfg)?;
    let kernel = phase_kernel(&traj)?;
    let occ = cfg.occupations;
    let report = mode_resolved_phases(kernel, occ.n_r as i64, occ.n_l as i64)?;
    let dir = cfg.output_dir();
    if wants(&cfg, Format::Toml) {
        put(&dir, "phase_report.toml", report.to_toml()?.as_bytes())?;
    }
    if wants(&cfg, Format::Csv) {
        put(&dir, "phase_report.csv", &report.to_csv()?)?;
    }
    println!("kernel = {}", kernel.value);
    if let Some(cyc) = kernel.cyclic_solid_angle {
        println!("cyclic_solid_angle = {cyc}");
    }
    println!("multiphoton_phase = {}", report.multiphoton_phase);
    println!("vacuum_sum = {}", report.vacuum_sum);
    if let Some(levels) = refine {
        let r = quadrature_refine(&traj, levels)?;
        for (k, n) in r.kernels.iter().zip(&r.sample_counts) {
            println!("samples = {n}  kernel = {}", k.value);
        }
        if let Some(x) = r.extrapolated {
            println!("extrapolated = {x}");
        }
    }
    Ok(0)
}

fn cmd_evolve(c: &Common, residual: bool) -> Result<i32> {
    let cfg = load(c)?;
    let traj = trajectory(c, &cfg)?;
    let opts = EvolveOptions {
        step_tolerance: cfg.tolerances.integrator,
        record_trace: cfg.oracle.trace,
    };
    let dir = cfg.output_dir();
    for sigma in [Helicity::Right, Helicity::Left] {
        let r = evolve(&traj, sigma, opts)?;
        let tag = match sigma {
            Helicity::Right => "right",
            Helicity::Left => "left",
        };
        if wants(&cfg, Format::Toml) {
            put(&dir, &format!("evolution_{tag}.toml"), r.to_toml()?.as_bytes())?;
        }
        if wants(&cfg, Format::Csv) {
            put(&dir, &format!("evolution_{tag}.csv"), &r.to_csv()?)?;
            if let Some(t) = r.trace_csv()? {
                put(&dir, &format!("trace_{tag}.csv"), &t)?;
            }
        }
        println!(
            "sigma = {:+}  geometric = {}  dynamical = {}  steps = {}",
            i8::from(sigma),
            r.geometric_phase_numeric,
            r.dynamical_phase,
            r.steps
        );
        if residual {
            let rr = analytic_residual(&traj, sigma)?;
            println!(
                "sigma = {:+}  residual = {}  observed_order = {:?}",
                i8::from(sigma),
                rr.max_residual,
                rr.observed_order
            );
            if rr.coarse_grid {
                warn!("fewer than 64 samples per turn; residual is dominated by differencing error");
            }
        }
    }
    Ok(0)
}

fn cmd_fock(c: &Common, n_max: Option<usize>) -> Result<i32> {
    let cfg = match (&c.config, n_max) {
        (None, Some(_)) => None,
        _ => Some(load(c)?),
    };
    let n = n_max
        .or_else(|| cfg.as_ref().map(|cfg| cfg.occupations.n_max))
        .expect("either --n-max or a config is present");
    let sys = build_fock_system(n)?;
    let dir = out_dir(c, cfg.as_ref())?;
    for p in sys.export(&dir)? {
        info!("wrote {}", p.display());
    }
    let ids = sys.identities();
    let text = ids.to_toml()?;
    put(&dir, "fock_identities.toml", text.as_bytes())?;
    print!("{text}");
    Ok(0)
}

fn media_tensors(c: &Common, a: &MediaArgs) -> Result<(GyrotropicTensors, f64)> {
    if let (Some(e1), Some(e2), Some(m1), Some(m2), Some(w)) = (a.eps1, a.eps2, a.mu1, a.mu2, a.omega) {
        return Ok((GyrotropicTensors::planar(e1, e2, m1, m2), w));
    }
    let cfg = load(c)?;
    let m = cfg.media.ok_or_else(|| {
        Error::Config("no [media] section in the config and not all of --eps1 --eps2 --mu1 --mu2 --omega given".into())
    })?;
    let mut t = m.tensors();
    t.eps1 = a.eps1.unwrap_or(t.eps1);
    t.eps2 = a.eps2.unwrap_or(t.eps2);
    t.mu1 = a.mu1.unwrap_or(t.mu1);
    t.mu2 = a.mu2.unwrap_or(t.mu2);
    Ok((t, a.omega.unwrap_or(m.omega)))
}

fn cmd_classify(c: &Common, a: &MediaArgs) -> Result<i32> {
    let (t, omega) = media_tensors(c, a)?;
    let cls = classify_with(&t, omega, a.cutoff)?;
    let text = cls.to_toml()?;
    if c.out.is_some() {
        put(&out_dir(c, None)?, "media_classification.toml", text.as_bytes())?;
    }
    print!("{text}");
    Ok(0)
}

fn triple(v: &[String], name: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::Config(format!("--{name} expects FROM TO N, got {v:?}"));
    let [a, b, n] = v else { return Err(bad()) };
    Ok((
        a.parse().map_err(|_| bad())?,
        b.parse().map_err(|_| bad())?,
        n.parse().map_err(|_| bad())?,
    ))
}

fn cmd_sweep(c: &Common, a: &SweepArgs) -> Result<i32> {
    let grid = SweepGrid {
        eps1: triple(&a.eps1, "eps1")?,
        eps2: triple(&a.eps2, "eps2")?,
        mu1: a.mu1,
        mu2: a.mu2,
    };
    let cells = regime_sweep(&grid, a.cutoff)?;
    put(&out_dir(c, None)?, "regime_map.csv", &sweep_csv(&cells)?)?;
    println!("cells = {}", cells.len());
    Ok(0)
}

fn cmd_scenario(c: &Common) -> Result<i32> {
    let cfg = load(c)?;
    let out = run_scenario(
        &cfg,
        RunOptions {
            strict: c.strict,
            seed: c.seed,
        },
    )?;
    for f in &out.files {
        info!("wrote {}", f.display());
    }
    let k = out.phase_report.kernel;
    println!("kernel = {}", k.value);
    for m in &out.phase_report.per_mode {
        println!(
            "sigma = {:+}  n = {}  quantal = {}  vacuum = {}  total = {}",
            i8::from(m.sigma),
            m.occupation,
            m.phase_quantal,
            m.phase_vacuum,
            m.phase_total
        );
    }
    if let Some([r, _]) = &out.evolution {
        println!("oracle_geometric = {}", r.geometric_phase_numeric);
    }
    if let Some(m) = &out.media {
        println!("net_vacuum_phase = {}", m.net_vacuum_phase);
    }
    for f in &out.failures {
        error!("check failed: {f}");
    }
    Ok(out.exit_code())
}
