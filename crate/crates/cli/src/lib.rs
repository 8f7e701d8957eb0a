//! Batch runner for the randomized Chirikov map experiments.

pub mod commands;
pub mod config;
pub mod criteria;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{ControlMode, ExperimentConfig, Model, Profile};
use output::{file_entry, Context, RunManifest};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const WORKERS_ENV: &str = "CHIRIKOV_WORKERS";

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(chirikov::Error),
    Io(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(s) => write!(f, "configuration error: {s}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(s) => write!(f, "i/o error: {s}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<chirikov::Error> for CliError {
    fn from(e: chirikov::Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    /// Invalid parameters are configuration errors; everything else is a runtime failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(chirikov::Error::InvalidParameter { .. }) => EXIT_CONFIG,
            _ => EXIT_FAIL,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "chirikov", version, about = "Numerical checks for the randomized Chirikov standard map")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Uniform contraction of the m-step derivative cocycle
    Contraction(Flags),
    /// Two-point drift ratio P V / V
    Drift(Flags),
    /// K-growth exponents of the composed map's derivatives
    Apriori(Flags),
    /// Top Lyapunov exponent
    Lyapunov(Flags),
    /// Fourier correlation decay
    Correlations(Flags),
    /// Submersion and surjectivity ranks
    Ranks(Flags),
    /// Determinant of the 4x4 phase minor
    Dets(Flags),
    /// Fixed points and small-set constants
    Fixedpoints(Flags),
    /// Steering controllers
    Control(Flags),
    /// Inviscid mixing decay of a passive scalar
    Mix(Flags),
    /// Enhanced dissipation half-lives
    Dissipate(Flags),
    /// Harris and headline rate arithmetic
    Rates(Flags),
    /// Empirical constant of the singular cosine integral
    ClaimProbe(Flags),
    /// The full acceptance battery
    Suite(Flags),
}

impl Command {
    pub fn split(&self) -> (&'static str, &Flags) {
        match self {
            Command::Contraction(f) => ("contraction", f),
            Command::Drift(f) => ("drift", f),
            Command::Apriori(f) => ("apriori", f),
            Command::Lyapunov(f) => ("lyapunov", f),
            Command::Correlations(f) => ("correlations", f),
            Command::Ranks(f) => ("ranks", f),
            Command::Dets(f) => ("dets", f),
            Command::Fixedpoints(f) => ("fixedpoints", f),
            Command::Control(f) => ("control", f),
            Command::Mix(f) => ("mix", f),
            Command::Dissipate(f) => ("dissipate", f),
            Command::Rates(f) => ("rates", f),
            Command::ClaimProbe(f) => ("claim-probe", f),
            Command::Suite(f) => ("suite", f),
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML config file; flags override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
    #[arg(long = "K")]
    pub k: Option<f64>,
    #[arg(long = "A")]
    pub a: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    #[arg(long)]
    pub realizations: Option<u64>,
    #[arg(long)]
    pub grid: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub workers: Option<u64>,
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long, value_enum)]
    pub profile: Option<Profile>,
    #[arg(long, value_enum)]
    pub mode: Option<ControlMode>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub constants_file: Option<String>,
}

impl Flags {
    pub fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            model: self.model,
            k: self.k,
            a: self.a,
            p: self.p,
            q: self.q,
            nu: self.nu,
            steps: self.steps,
            samples: self.samples,
            realizations: self.realizations,
            grid: self.grid,
            seed: self.seed,
            workers: self.workers,
            out: self.out.clone(),
            profile: self.profile,
            mode: self.mode,
            eps: self.eps,
            trials: self.trials,
            constants_file: self.constants_file.clone(),
        }
    }

    /// File values first, then flags on top.
    pub fn merged(&self) -> Result<ExperimentConfig, CliError> {
        let base = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        Ok(base.overlay(&self.to_config()))
    }
}

/// Worker count: config, then the environment, then the machine.
pub fn resolve_workers(cfg: &ExperimentConfig) -> Result<usize, CliError> {
    if let Some(w) = cfg.workers {
        if w == 0 {
            return Err(CliError::Config("workers must be >= 1".into()));
        }
        return Ok(w as usize);
    }
    if let Ok(s) = std::env::var(WORKERS_ENV) {
        return match s.trim().parse::<usize>() {
            Ok(w) if w >= 1 => Ok(w),
            _ => Err(CliError::Config(format!("{WORKERS_ENV}={s} is not a positive integer"))),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn validate(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let pos = |name: &str, v: Option<f64>| match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(CliError::Config(format!("{name} must be positive and finite, got {x}"))),
        _ => Ok(()),
    };
    pos("K", cfg.k)?;
    pos("A", cfg.a)?;
    pos("q", cfg.q)?;
    pos("eps", cfg.eps)?;
    if let Some(p) = cfg.p {
        if !(p > 0.0 && p < 0.5) {
            return Err(CliError::Config(format!("p must lie in (0, 1/2), got {p}")));
        }
    }
    if let Some(nu) = cfg.nu {
        if !(nu >= 0.0 && nu.is_finite()) {
            return Err(CliError::Config(format!("nu must be >= 0, got {nu}")));
        }
    }
    for (name, v) in [("steps", cfg.steps), ("samples", cfg.samples), ("realizations", cfg.realizations), ("grid", cfg.grid), ("trials", cfg.trials)] {
        if v == Some(0) {
            return Err(CliError::Config(format!("{name} must be >= 1")));
        }
    }
    Ok(())
}

fn finish(name: &str, ctx: Context, workers: usize, wall: f64) -> Result<RunManifest, CliError> {
    let mut files = ctx.files.iter().map(|p| file_entry(&ctx.dir, p)).collect::<Result<Vec<_>, _>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    files.dedup_by(|a, b| a.path == b.path);
    let m = RunManifest {
        subcommand: name.to_string(),
        version: VERSION.to_string(),
        pass: ctx.all_pass(),
        config: ctx.cfg,
        config_digest: ctx.digest,
        workers,
        wall_time_seconds: wall,
        checks: ctx.checks,
        files,
    };
    let s = serde_json::to_vec_pretty(&m).map_err(|e| CliError::Io(e.to_string()))?;
    std::fs::write(ctx.dir.join("manifest.json"), s).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(m)
}

fn out_dir(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.out.as_ref().map(PathBuf::from).unwrap_or_else(|| Path::new("out").join(name))
}

/// Runs one subcommand (or the suite) inside a pool of the configured size.
/// Runtime failures are recorded in the manifest instead of propagating.
pub fn run(name: &str, cfg: ExperimentConfig) -> Result<RunManifest, CliError> {
    validate(&cfg)?;
    let workers = resolve_workers(&cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let dir = out_dir(&cfg, name);
    let mut ctx = Context::new(cfg, dir)?;
    let t = Instant::now();
    let res = pool.install(|| {
        if name == "suite" {
            criteria::suite(&mut ctx)
        } else {
            commands::dispatch(name, &mut ctx)
        }
    });
    match res {
        Ok(()) => {}
        Err(e) if e.exit_code() == EXIT_CONFIG => return Err(e),
        Err(e) => ctx.check("runtime", false, e.to_string()),
    }
    finish(name, ctx, workers, t.elapsed().as_secs_f64())
}

/// Parses `args`, runs, prints a summary and returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let (name, flags) = cli.command.split();
    let res = flags.merged().and_then(|cfg| run(name, cfg));
    match res {
        Ok(m) => {
            for c in &m.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            println!("{name}: {} ({:.2} s)", if m.pass { "pass" } else { "FAIL" }, m.wall_time_seconds);
            if m.pass {
                EXIT_PASS
            } else {
                EXIT_FAIL
            }
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
