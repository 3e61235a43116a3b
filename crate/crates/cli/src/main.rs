use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qsmpc::config::{default_preset, preset, Experiment, ExperimentConfig, PRESETS};
use qsmpc::{execute, CliError, Overrides};

#[derive(Parser)]
#[command(name = "qsmpc", version, about = "Stochastic MPC for continuously monitored quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Spin-1 closed loop against the uncontrolled ensemble.
    ThreeLevel(RunArgs),
    /// Terminal fidelity across spin sizes.
    Scaling(RunArgs),
    /// Qubit chain driven into an entangled eigenstate.
    Ising(RunArgs),
    /// Reduced cost against the scenario controller.
    Compare(RunArgs),
    /// Reduced cost against measured collapse statistics.
    ReductionCheck(RunArgs),
    /// List presets, or print one as JSON.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Built-in configuration (see `qsmpc presets`).
    #[arg(long, conflicts_with = "config")]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trajectories.
    #[arg(long)]
    paths: Option<usize>,
    /// Worker threads; all cores when unset.
    #[arg(long, env = "QSMPC_THREADS")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
}

fn load(experiment: Experiment, args: &RunArgs) -> qsmpc::Result<ExperimentConfig> {
    let mut cfg: ExperimentConfig = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            })?;
            serde_json::from_str(&text)?
        }
        (None, name) => {
            let name = name.as_deref().unwrap_or(default_preset(experiment));
            preset(name).ok_or_else(|| CliError::Config {
                field: "preset".into(),
                reason: format!("unknown preset `{name}`"),
            })?
        }
    };
    if cfg.experiment != experiment {
        return Err(CliError::Config {
            field: "experiment".into(),
            reason: format!("config is for `{}`, not `{}`", cfg.experiment.name(), experiment.name()),
        });
    }
    cfg.apply(&Overrides {
        seed: args.seed,
        paths: args.paths,
        threads: args.threads,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn run(experiment: Experiment, args: &RunArgs) -> qsmpc::Result<bool> {
    let cfg = load(experiment, args)?;
    let report = execute(&cfg, &args.out)?;
    for c in &report.checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    for n in &report.notes {
        println!("note: {n}");
    }
    println!("wrote {} files to {}", report.tables.len() + 1, args.out.display());
    Ok(report.checks.iter().all(|c| c.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::ThreeLevel(a) => (Experiment::ThreeLevel, a),
        Command::Scaling(a) => (Experiment::Scaling, a),
        Command::Ising(a) => (Experiment::Ising, a),
        Command::Compare(a) => (Experiment::Compare, a),
        Command::ReductionCheck(a) => (Experiment::ReductionCheck, a),
        Command::Presets { name: None } => {
            for (name, about) in PRESETS {
                println!("{name:<16} {about}");
            }
            return ExitCode::SUCCESS;
        }
        Command::Presets { name: Some(name) } => {
            return match preset(&name) {
                Some(cfg) => {
                    println!("{}", cfg.to_json());
                    ExitCode::SUCCESS
                }
                None => {
                    eprintln!("error: unknown preset `{name}`");
                    ExitCode::from(2)
                }
            };
        }
    };
    match run(experiment, &args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
