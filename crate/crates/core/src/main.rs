use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use varfd::cli::{run, ExperimentConfig, ExperimentKind, Overrides, Status};
use varfd::Error;

/// Variable-exponent free-discontinuity experiments.
///
/// Exit codes: 0 all verdicts pass, 1 some verdict fails, 2 configuration
/// error (nothing written), 3 solver non-convergence (partial report).
/// `VARFD_THREADS` caps the worker threads.
#[derive(Parser)]
#[command(name = "varfd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Norm-modular inequality suite.
    Norms(KindArgs),
    /// Truncation operator suite.
    Truncation(KindArgs),
    /// Fundamental estimate (gluing) suite.
    Glue(KindArgs),
    /// Single cell problem.
    Cell(KindArgs),
    /// Bulk density ladder.
    BulkDensity(KindArgs),
    /// Surface density ladder.
    SurfaceDensity(KindArgs),
    /// Separation of bulk and surface scales.
    Separation(KindArgs),
    /// Surface perturbation ladder.
    Perturbation(KindArgs),
    /// One-dimensional homogenization against the oracle.
    #[command(name = "homogenize-1d")]
    Homogenize1d(KindArgs),
    /// Hypothesis validators on a density pair.
    Validate(KindArgs),
}

#[derive(Args)]
struct KindArgs {
    /// Start from this file instead of the defaults of the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    grid_nodes: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
}

impl Flags {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            grid_nodes: self.grid_nodes,
            tolerance: self.tolerance,
        }
    }
}

fn load(kind: ExperimentKind, args: &KindArgs) -> Result<(ExperimentConfig, PathBuf), Error> {
    match &args.config {
        Some(path) => {
            let mut cfg = ExperimentConfig::load(path)?;
            cfg.experiment = kind;
            Ok((cfg, parent(path)))
        }
        None => {
            if args.flags.seed.is_none() {
                return Err(Error::Config("--seed is required without --config".into()));
            }
            Ok((ExperimentConfig::defaults(kind), PathBuf::from(".")))
        }
    }
}

fn parent(path: &Path) -> PathBuf {
    path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn configure(cli: &Cli) -> Result<(ExperimentConfig, PathBuf), Error> {
    use ExperimentKind as K;
    let (cfg, base, flags) = match &cli.command {
        Command::Run { config, flags } => (ExperimentConfig::load(config)?, parent(config), flags),
        Command::Norms(a) => with(load(K::Norms, a)?, a),
        Command::Truncation(a) => with(load(K::Truncation, a)?, a),
        Command::Glue(a) => with(load(K::Glue, a)?, a),
        Command::Cell(a) => with(load(K::Cell, a)?, a),
        Command::BulkDensity(a) => with(load(K::BulkDensity, a)?, a),
        Command::SurfaceDensity(a) => with(load(K::SurfaceDensity, a)?, a),
        Command::Separation(a) => with(load(K::Separation, a)?, a),
        Command::Perturbation(a) => with(load(K::Perturbation, a)?, a),
        Command::Homogenize1d(a) => with(load(K::Homogenize1d, a)?, a),
        Command::Validate(a) => with(load(K::Validate, a)?, a),
    };
    Ok((cfg.effective(&flags.overrides())?, base))
}

fn with((cfg, base): (ExperimentConfig, PathBuf), a: &KindArgs) -> (ExperimentConfig, PathBuf, &Flags) {
    (cfg, base, &a.flags)
}

fn threads() -> Result<(), Error> {
    let Ok(v) = std::env::var("VARFD_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Error::Config(format!("VARFD_THREADS: expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("VARFD_THREADS: {e}")))
}

fn code(s: Status) -> ExitCode {
    ExitCode::from(s as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cfg, base) = match threads().and_then(|()| configure(&cli)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return code(Status::ConfigError);
        }
    };
    let report = match run(&cfg, &base) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return code(Status::ConfigError);
        }
    };
    if let Err(e) = report.write() {
        eprintln!("cannot write artifacts to {}: {e}", cfg.out.display());
        return code(Status::Fail);
    }
    print!("{}", report.to_text());
    code(report.status())
}
