use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fairrank::harness::{load_config, run_experiment, validate_config};
use fairrank::{par, Error};

#[derive(Parser)]
#[command(name = "fairrank", version, about = "Provider-fair re-ranking experiments")]
struct Cli {
    /// Worker threads for folds, grid points and users (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

const VALIDATION_FAILURE: u8 = 1;
const RUNTIME_FAILURE: u8 = 2;

fn fail(code: &str, message: impl std::fmt::Display, status: u8) -> ExitCode {
    eprintln!("error[{code}]: {message}");
    ExitCode::from(status)
}

fn fail_with(e: &Error) -> ExitCode {
    let status = match e {
        Error::Config(_) => VALIDATION_FAILURE,
        _ => RUNTIME_FAILURE,
    };
    fail(e.code(), e, status)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            return fail("E_ARGUMENT", "--workers must be positive", VALIDATION_FAILURE);
        }
        if let Err(e) = par::set_workers(n) {
            return fail("E_ARGUMENT", e, RUNTIME_FAILURE);
        }
    }

    let path = match &cli.command {
        Command::Run { config } | Command::Validate { config } => config,
    };
    let config = match load_config(path) {
        Ok(c) => c,
        Err(e @ Error::Io { .. }) => return fail(e.code(), e, VALIDATION_FAILURE),
        Err(e) => return fail_with(&e),
    };
    let violations = validate_config(&config);
    if !violations.is_empty() {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        let summary = format!("{} violation(s) in {}", violations.len(), path.display());
        return fail("E_CONFIG", summary, VALIDATION_FAILURE);
    }

    match cli.command {
        Command::Validate { .. } => {
            println!("{}: ok", path.display());
            ExitCode::SUCCESS
        }
        Command::Run { .. } => match run_experiment(&config) {
            Ok(outcome) => {
                println!(
                    "lambda*={} apcr={:.6} gain={:+.2}% output={}",
                    outcome.pick.lambda,
                    outcome.pick.apcr,
                    outcome.pick.relative_gain * 100.0,
                    outcome.output.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail_with(&e),
        },
    }
}
