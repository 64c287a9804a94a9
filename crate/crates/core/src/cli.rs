//! Command-line front end: `simulate`, `estimate`, `validate` and `curves`.
//!
//! Exit codes: 0 on success, 1 for configuration and input problems, 2 for
//! numerical failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ProjectConfig;
use crate::error::{Error, Result};
use crate::estimator::{self, RunSettings};
use crate::manifest;
use crate::validation;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

pub const REPORT_NAME: &str = "report.toml";
const CURVE_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "pmsm-sat", version, about = "Saturated PMSM simulation and saturation-parameter identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Project configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `paths.out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Noise seed; overrides `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate every planned run and write traces plus a manifest.
    Simulate(Common),
    /// Identify the magnetic parameters and write a report.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Manifest of recorded runs to estimate from instead of simulating.
        #[arg(long)]
        ingest: Option<PathBuf>,
    },
    /// Write angle-sweep, step-response, flux-integration and magnetization CSVs.
    Validate(Common),
    /// Write magnetization-curve CSVs only.
    Curves(Common),
}

struct Context {
    cfg: ProjectConfig,
    out: PathBuf,
    seed: u64,
}

fn context(c: &Common) -> Result<Context> {
    let cfg = ProjectConfig::load(&c.config)?;
    Ok(Context {
        out: c.out.clone().unwrap_or_else(|| cfg.out_dir.clone()),
        seed: c.seed.unwrap_or(cfg.seed),
        cfg,
    })
}

fn mkdir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

pub fn cmd_simulate(c: &Common) -> Result<Vec<PathBuf>> {
    let ctx = context(c)?;
    let cfg = &ctx.cfg;
    let data = estimator::simulate_plan(&cfg.motor, &cfg.plan, &cfg.settings, ctx.seed)?;
    let path = manifest::write_simulation(&ctx.out, &cfg.plan, cfg.settings.noise_amp, &data, ctx.seed)?;
    let mut files: Vec<PathBuf> = (0..data.len())
        .map(|k| ctx.out.join(format!("{}.csv", data[k].run.label(k))))
        .collect();
    files.push(path);
    Ok(files)
}

pub fn cmd_estimate(c: &Common, ingest: Option<&Path>) -> Result<Vec<PathBuf>> {
    let ctx = context(c)?;
    let cfg = &ctx.cfg;
    let ingest = ingest.map(Path::to_path_buf).or_else(|| cfg.ingest.clone());
    let (ident, noise) = match ingest {
        Some(path) => {
            let loaded = manifest::load(&path)?;
            let settings = RunSettings {
                noise_amp: loaded.noise_amp,
                ..cfg.settings.clone()
            };
            let ident = estimator::estimate_from_runs(&cfg.motor, &loaded.plan, &settings, &loaded.runs)?;
            (ident, loaded.noise_amp)
        }
        None => (
            estimator::identify(&cfg.motor, &cfg.plan, &cfg.settings, ctx.seed)?,
            cfg.settings.noise_amp,
        ),
    };
    mkdir(&ctx.out)?;
    let path = ctx.out.join(REPORT_NAME);
    manifest::write_report(&path, &ident, noise)?;
    Ok(vec![path])
}

fn magnetization_files(ctx: &Context, dir: &Path) -> Result<Vec<PathBuf>> {
    let v = &ctx.cfg.validation;
    let curves = validation::magnetization_curves(&ctx.cfg.motor, &v.curve_grid, &v.curve_levels, CURVE_TOL)?;
    let mut files = Vec::new();
    for (axis, other, set) in [("d", "iq", &curves.d), ("q", "id", &curves.q)] {
        for c in set.iter() {
            let path = dir.join(format!("magnetization_phi_{axis}_{other}_{:+.3}A.csv", c.level));
            validation::write_xy_csv(&path, &c.points)?;
            files.push(path);
        }
    }
    Ok(files)
}

pub fn cmd_validate(c: &Common) -> Result<Vec<PathBuf>> {
    let ctx = context(c)?;
    let cfg = &ctx.cfg;
    let v = &cfg.validation;
    let dir = ctx.out.join("validate");
    mkdir(&dir)?;
    let mut files = Vec::new();

    let rows = validation::angle_sweep(&cfg.motor, &v.sweep, &cfg.settings)?;
    let on_d = v.sweep.u_tilde_d != 0.0;
    let xy: Vec<(f64, f64, f64)> = rows
        .iter()
        .map(|r| {
            if on_d {
                (r.magnitude, r.predicted.0, r.simulated.0)
            } else {
                (r.magnitude, r.predicted.1, r.simulated.1)
            }
        })
        .collect();
    let path = dir.join(format!("angle_sweep_{}deg.csv", v.sweep.angle_deg));
    validation::write_xy_csv(&path, &xy)?;
    files.push(path);

    for (k, &u) in v.step_voltages.iter().enumerate() {
        let (sat, lin) = validation::step_response(&cfg.motor, u, v.step_t_end, v.step_dt)
            .map_err(|e| e.in_run(format!("step response {u} V")))?;
        let path = dir.join(format!("step_{k}.csv"));
        validation::write_step_csv(&path, &sat, &lin)?;
        files.push(path);

        let model = sat.phi_d.clone().unwrap_or_default();
        let xy: Vec<(f64, f64, f64)> = validation::flux_by_integration(&sat, &cfg.motor)
            .into_iter()
            .zip(model)
            .map(|((i, measured), m)| (i, m, measured))
            .collect();
        let path = dir.join(format!("flux_integration_{k}.csv"));
        validation::write_xy_csv(&path, &xy)?;
        files.push(path);
    }
    files.extend(magnetization_files(&ctx, &dir)?);
    Ok(files)
}

pub fn cmd_curves(c: &Common) -> Result<Vec<PathBuf>> {
    let ctx = context(c)?;
    let dir = ctx.out.join("curves");
    mkdir(&dir)?;
    magnetization_files(&ctx, &dir)
}

pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Simulate(c) => cmd_simulate(c),
        Command::Estimate { common, ingest } => cmd_estimate(common, ingest.as_deref()),
        Command::Validate(c) => cmd_validate(c),
        Command::Curves(c) => cmd_curves(c),
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
