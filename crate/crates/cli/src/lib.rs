//! Command-line front end: configuration, experiment runners and output.

pub mod config;
pub mod output;
pub mod run;

use std::path::{Path, PathBuf};

use config::ExperimentConfig;
use output::{render, Header};
use run::Outcome;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("resource budget exceeded: {0}")]
    Resource(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) | CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Resource(_) => 3,
        }
    }
}

impl From<assb_core::Error> for CliError {
    fn from(e: assb_core::Error) -> Self {
        match e {
            assb_core::Error::Domain(m) => CliError::Config(m),
            assb_core::Error::Resource(m) => CliError::Resource(m),
            assb_core::Error::Numerical(m) | assb_core::Error::Internal(m) => CliError::Numerical(m),
        }
    }
}

/// `<dir>/<stem>.fit.<ext>` next to `path`.
pub fn fit_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let ext = path.extension().and_then(|s| s.to_str()).unwrap_or("csv");
    path.with_file_name(format!("{stem}.fit.{ext}"))
}

/// Rendered main table and optional fit table.
pub struct Rendered {
    pub main: Vec<u8>,
    pub fit: Option<Vec<u8>>,
    /// Rows in the main table.
    pub rows: usize,
    pub failures: usize,
}

pub fn execute(cfg: &ExperimentConfig, stamp: Option<u64>) -> Result<Rendered, CliError> {
    let outcome: Outcome = run::run(cfg)?;
    let header = Header {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        stamp,
    };
    Ok(Rendered {
        main: render(&outcome.table, &header, cfg.format)?,
        fit: outcome
            .fit
            .as_ref()
            .map(|f| render(f, &header, cfg.format))
            .transpose()?,
        rows: outcome.table.rows.len(),
        failures: outcome.failures,
    })
}
