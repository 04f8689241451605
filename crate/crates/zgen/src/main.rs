use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zgen::commands::{self, CliError, CliResult, GenerateOptions, Run};
use zgen::config::Protocol;

#[derive(Parser)]
#[command(name = "zgen", version, about = "Synthetic tabular data with controlled outliers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Master seed; overrides ZGEN_SEED and the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Harness worker threads (0 = one per core). Results do not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Train the GAN, target model and (optionally) cVAE.
    Fit(Common),
    /// Write synthetic rows from a trained model.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        target_model: Option<PathBuf>,
        #[arg(long)]
        cvae_model: Option<PathBuf>,
        #[arg(short = 'n', long)]
        rows: Option<usize>,
        /// Drop rows that match a training row.
        #[arg(long, overrides_with = "no_filter")]
        filter: bool,
        #[arg(long)]
        no_filter: bool,
        /// Outlier spec file (TOML).
        #[arg(long)]
        outliers: Option<PathBuf>,
        /// Outlier percentage, overriding the spec.
        #[arg(long)]
        percent: Option<f64>,
        /// Add the `__outlier` mask column.
        #[arg(long)]
        mask: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run an evaluation protocol.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        protocol: Option<Protocol>,
    },
    /// Compare correlation structure of synthetic tables against a real one.
    Correlate {
        /// Real table.
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Output directory.
        #[arg(short, long, default_value = "out")]
        output: PathBuf,
        #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, default_values_t = [-0.5, 0.5])]
        scale: Vec<f64>,
        #[arg(long, default_value_t = 16)]
        cell: usize,
        /// Synthetic tables.
        #[arg(required = true)]
        synthetic: Vec<PathBuf>,
    },
    /// Fit, generate and evaluate in one go.
    Pipeline(Common),
}

fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("ZGEN_SEED") {
        Ok(s) => s.trim().parse().map(Some).map_err(|_| CliError::Config(format!("ZGEN_SEED must be an unsigned integer, got `{s}`"))),
        Err(_) => Ok(None),
    }
}

fn load(c: &Common) -> CliResult<Run> {
    Run::load(&c.config, c.seed, env_seed()?, c.workers)
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit(c) => {
            commands::fit(&load(&c)?)?;
        }
        Command::Generate { common, model, target_model, cvae_model, rows, filter, no_filter, outliers, percent, mask, output } => {
            let opts = GenerateOptions {
                model,
                target_model,
                cvae_model,
                rows,
                filter: if no_filter { Some(false) } else if filter { Some(true) } else { None },
                outliers,
                percent,
                mask,
                output,
            };
            commands::generate(&load(&common)?, &opts)?;
        }
        Command::Evaluate { common, protocol } => {
            commands::evaluate(&load(&common)?, protocol)?;
        }
        Command::Correlate { real, schema, output, scale, cell, synthetic } => {
            for line in commands::correlate(&real, schema.as_deref(), &synthetic, &output, (scale[0], scale[1]), cell)? {
                println!("{line}");
            }
        }
        Command::Pipeline(c) => {
            commands::pipeline(&load(&c)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
