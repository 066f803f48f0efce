use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use volterra_sim::config::Mode;
use volterra_sim::run::{run, RunRequest};
use volterra_sim::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Simulate,
    RateStudy,
    Validate,
}

/// Simulate stochastic Volterra equations driven by pure-jump Lévy noise.
///
/// Exit codes: 0 success, 2 configuration or validation error, 3 numerical
/// failure, 4 resource cap exceeded.
#[derive(Debug, Parser)]
#[command(name = "volterra-sim", version)]
struct Cli {
    #[arg(value_enum)]
    mode: ModeArg,
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides `seed` in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Truncation level N; overrides `level`.
    #[arg(long)]
    level: Option<usize>,
    /// Replicate count; overrides `replicates` and `study.replicates`.
    #[arg(long)]
    replicates: Option<usize>,
    /// Manifest whose artifact checksums are re-verified (validate mode).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config_text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(source) => {
            let e = Error::Io {
                path: cli.config.display().to_string(),
                source,
            };
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let req = RunRequest {
        mode: match cli.mode {
            ModeArg::Simulate => Mode::Simulate,
            ModeArg::RateStudy => Mode::RateStudy,
            ModeArg::Validate => Mode::Validate,
        },
        config_text,
        out_dir: cli.out,
        seed: cli.seed,
        level: cli.level,
        replicates: cli.replicates,
        check_manifest: cli.manifest,
    };
    match run(&req) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
