//! `cortical`: train capacity-achieving input distributions, sweep peak
//! bounds, compute numerical baselines and run self-checks.

mod commands;
mod config;
mod error;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Settings;
use error::CliError;

const SETTINGS_HELP: &str = "Settings: key=value, --key value, or a config file with one `key = value` per line \
(# starts a comment). Command-line settings override the file.";

#[derive(Debug, Parser)]
#[command(name = "cortical", version, about, after_help = SETTINGS_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Rest {
    /// Experiment name or config file, followed by settings
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "ARGS")]
    args: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one experiment and write trace, PMF, plots and summary.json.
    ///
    /// Experiments: awgn-peak (A, d), mimo-peak (r2), cauchy-log (A, gamma),
    /// cauchy-peak (A, gamma), rayleigh (a). Training keys: steps, disc_steps,
    /// batch_size, alpha, latent_dim, capacity_window, generator_lr,
    /// discriminator_lr, grad_clip, generator_anneal. Also: seed, out,
    /// reference (true/false).
    Run(Rest),
    /// Train one run per peak bound and write sweep.csv and plots.
    ///
    /// Accepts the `run` keys except A, plus grid (comma-separated) and threads.
    Sweep(Rest),
    /// Numerical baselines.
    #[command(subcommand)]
    Baseline(Baseline),
    /// Self-checks; exit status 1 on failure.
    #[command(subcommand)]
    Check(Check),
}

#[derive(Debug, Subcommand)]
enum Baseline {
    /// Blahut-Arimoto capacity: bsc (p), noiseless (n), awgn-peak (A),
    /// cauchy-peak (A, gamma), rayleigh (a); also tol, max_iter, out.
    Ba(Rest),
    /// Shannon and McKellips upper bounds in bits (A, d).
    Bounds(Rest),
}

#[derive(Debug, Subcommand)]
enum Check {
    /// Finite-difference gradient check over random architectures (count, seed).
    Grad(Rest),
    /// Discriminator-only mutual information on Gaussian pairs (rho, steps,
    /// batch_size, discriminator_lr, seed).
    Discriminator(Rest),
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let (rest, f): (&Rest, fn(&Settings) -> Result<(), CliError>) = match &cli.command {
        Command::Run(r) => (r, commands::run),
        Command::Sweep(r) => (r, commands::sweep),
        Command::Baseline(Baseline::Ba(r)) => (r, commands::baseline_ba),
        Command::Baseline(Baseline::Bounds(r)) => (r, commands::baseline_bounds),
        Command::Check(Check::Grad(r)) => (r, commands::check_grad),
        Command::Check(Check::Discriminator(r)) => (r, commands::check_discriminator),
    };
    f(&Settings::from_args(&rest.args)?)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
