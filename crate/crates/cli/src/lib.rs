//! Experiment runners behind the `qsmpc` command.

use std::path::PathBuf;

pub mod config;
pub mod experiments;
pub mod output;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Core(#[from] qsmpc_core::Error),

    #[error("cannot parse configuration: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("CSV output: {0}")]
    Csv(#[from] csv::Error),

    #[error("preflight check failed: {0}")]
    Preflight(String),
}

impl CliError {
    pub(crate) fn config(field: &str, reason: String) -> Self {
        CliError::Config {
            field: field.to_string(),
            reason,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub threads: Option<usize>,
}

impl config::ExperimentConfig {
    /// Applies `o`; a path count also replaces per-`j` counts of a scaling run.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(paths) = o.paths {
            self.n_paths = paths;
            if let Some(s) = &mut self.scaling {
                s.paths = None;
            }
        }
        if o.threads.is_some() {
            self.threads = o.threads;
        }
    }
}

/// Runs `cfg` and writes its CSV files and manifest into `out`.
pub fn execute(cfg: &config::ExperimentConfig, out: &std::path::Path) -> Result<experiments::Report> {
    let report = experiments::run(cfg)?;
    let names = |timing: bool| {
        report
            .tables
            .iter()
            .filter(|t| t.timing == timing)
            .map(output::Table::file_name)
            .collect()
    };
    let manifest = output::Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        core_version: qsmpc_core::VERSION,
        schema_version: cfg.schema_version,
        experiment: cfg.experiment.name(),
        config_sha256: output::config_hash(cfg),
        seed: cfg.seed,
        n_paths: cfg.n_paths,
        threads: cfg.threads,
        parallel: qsmpc_core::parallel::ENABLED,
        files: names(false),
        timing_files: names(true),
        notes: report.notes.clone(),
        config: cfg.clone(),
    };
    output::write_outputs(out, &report.tables, &manifest)?;
    Ok(report)
}
