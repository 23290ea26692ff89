use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spf_cli::commands;
use spf_cli::{exit_code, ExperimentConfig};

/// Latent-dynamics training workbench: data generation, reduction, surrogate
/// training and the full evaluation suite.
#[derive(Parser)]
#[command(name = "spf", version, about)]
struct Cli {
    /// Flat TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed (mandatory unless the config file provides one).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// KEY=VALUE configuration patch; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/val/test trajectory datasets.
    Generate,
    /// Fit the reducer on the training split.
    FitReducer,
    /// Train the configured framework.
    Train,
    /// Roll the trained model out on the test split and score it.
    Evaluate {
        /// Model container (default <out>/model.spfd).
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Roll out beyond the training time range.
    Extrapolate {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate under noise-perturbed initial inputs.
    NoiseEval {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train one SPF model per (p, α) grid cell and tabulate the results.
    Sweep,
    /// Merge completed runs into comparison tables and SVG curves.
    Report {
        /// Completed run directories.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        /// Report output directory (default: first run's parent /report).
        #[arg(long)]
        report_out: Option<PathBuf>,
    },
}

fn run(cli: &Cli) -> spf_cli::Result<()> {
    let config = |_cmd: &str| -> spf_cli::Result<ExperimentConfig> {
        ExperimentConfig::resolve(
            cli.config.as_deref(),
            &cli.overrides,
            cli.seed,
            cli.out.as_deref(),
        )
    };
    match &cli.command {
        Command::Generate => commands::cmd_generate(&config("generate")?),
        Command::FitReducer => commands::cmd_fit_reducer(&config("fit-reducer")?),
        Command::Train => commands::cmd_train(&config("train")?),
        Command::Evaluate { model } => {
            commands::cmd_evaluate(&config("evaluate")?, model.as_deref())
        }
        Command::Extrapolate { model } => {
            commands::cmd_extrapolate(&config("extrapolate")?, model.as_deref())
        }
        Command::NoiseEval { model } => {
            commands::cmd_noise_eval(&config("noise-eval")?, model.as_deref())
        }
        Command::Sweep => commands::cmd_sweep(&config("sweep")?),
        Command::Report { runs, report_out } => {
            let out = report_out.clone().or_else(|| cli.out.clone()).unwrap_or_else(|| {
                runs[0].parent().unwrap_or(&runs[0]).join("report")
            });
            commands::cmd_report(runs, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err) as u8)
        }
    }
}
