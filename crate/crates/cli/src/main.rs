use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use assb_cli::config::{self, Format};
use assb_cli::{execute, fit_path, CliError};
use clap::Parser;

/// Swap-measurement circuits: trajectories, exact channels and scaling fits.
#[derive(Parser, Debug)]
#[command(name = "assb", version)]
struct Args {
    /// Experiment config (`key = value` lines or a JSON object).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment: baseline-gap, baseline-entropy, u1-purity-collapse,
    /// u1-xy-collapse, nonu1-collapse, single-pauli.
    #[arg(long)]
    preset: Option<String>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout if absent. Fits go to `<stem>.fit.<ext>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json; overrides the config.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads (default: ASSB_THREADS, then all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Add a wall-clock timestamp to the output header.
    #[arg(long)]
    stamp: bool,
}

fn load(args: &Args) -> Result<config::ExperimentConfig, CliError> {
    let mut cfg = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text =
                std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            config::parse(&text)?
        }
        (None, Some(name)) => config::preset(name)?,
        (None, None) => return Err(CliError::Config("give --config or --preset".into())),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output = Some(out.clone());
    }
    if let Some(f) = &args.format {
        cfg.format = Format::parse(f).ok_or_else(|| CliError::Config(format!("unknown format {f:?} (csv, json)")))?;
    }
    Ok(cfg)
}

fn threads(args: &Args) -> Result<Option<usize>, CliError> {
    if let Some(n) = args.threads {
        return Ok(Some(n));
    }
    match std::env::var("ASSB_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("ASSB_THREADS: cannot parse {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn write(path: &std::path::Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn main_inner(args: &Args) -> Result<usize, CliError> {
    let cfg = load(args)?;
    if let Some(n) = threads(args)? {
        if n == 0 {
            return Err(CliError::Config("thread count must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Resource(e.to_string()))?;
    }
    let stamp = args.stamp.then(|| {
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0)
    });
    let out = execute(&cfg, stamp)?;
    match &cfg.output {
        Some(path) => {
            write(path, &out.main)?;
            if let Some(fit) = &out.fit {
                write(&fit_path(path), fit)?;
            }
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            let io = |e: std::io::Error| CliError::Io(e.to_string());
            stdout.write_all(&out.main).map_err(io)?;
            if let Some(fit) = &out.fit {
                stdout.write_all(b"\n").map_err(io)?;
                stdout.write_all(fit).map_err(io)?;
            }
        }
    }
    if cfg.kind == config::Kind::Validate {
        let total = out.rows;
        eprintln!("validate: {} passed, {} failed", total - out.failures, out.failures);
    }
    Ok(out.failures)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(1),
        Err(e) => {
            eprintln!("assb: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
