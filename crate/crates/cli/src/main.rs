use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

mod commands;
mod config;
mod error;
mod report;

use commands::Options;
use config::RunConfig;
use error::{CliError, CliResult};
use report::Render;

/// Triple Hopf analysis of the prey / predator / top-predator food chain.
#[derive(Debug, Parser)]
#[command(name = "tritrophic", version)]
struct Cli {
    /// Flat JSON config with either model parameters or a Hopf setup.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,

    /// Directory for CSV output.
    #[arg(long, global = true)]
    csv_dir: Option<PathBuf>,

    /// Fan independent work out over N threads.
    #[arg(long, global = true, value_name = "N", value_parser = clap::value_parser!(u32).range(1..))]
    parallel: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// The six equilibria with existence and residuals.
    Equilibria,
    /// Eigenvalues of the Jacobian at the interior planar equilibrium p3.
    Spectrum,
    /// Parameters d2, rho, k that place a triple Hopf point at p3.
    Constraints,
    /// Closed-form cycle predictions from the averaged field.
    Predict {
        /// Also scan a grid for sign changes to confirm there are no other zeros.
        #[arg(long)]
        grid_scan: bool,
    },
    /// Locate the predicted cycles in the full ODE over a list of ε.
    Verify {
        /// Comma-separated ε values, all positive.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        epsilon: Option<Vec<f64>>,
    },
    /// Rerun the built-in worked example against its reference values.
    ReproduceExample,
    /// Write F201 and F202 of the averaged field on an (r, w) grid as CSV.
    DumpField {
        /// Use the quadrature-based field instead of the closed form.
        #[arg(long)]
        numerical: bool,
    },
}

fn print<R: Render + Serialize>(report: &R, json: bool) {
    if json {
        println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
    } else {
        print!("{}", report.render());
    }
}

fn load(cli: &Cli) -> CliResult<RunConfig> {
    match &cli.config {
        Some(path) => RunConfig::load(path),
        None => Err(CliError::Config("missing --config PATH".into())),
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let opts = Options { threads: cli.parallel.map(|n| n as usize) };
    let csv_dir = cli.csv_dir.as_deref();
    match &cli.command {
        Command::Equilibria => print(&commands::equilibria(&load(cli)?)?, cli.json),
        Command::Spectrum => print(&commands::spectrum(&load(cli)?)?, cli.json),
        Command::Constraints => print(&commands::constraints(&load(cli)?)?, cli.json),
        Command::Predict { grid_scan } => print(&commands::predict(&load(cli)?, *grid_scan)?, cli.json),
        Command::Verify { epsilon } => {
            if let Some(list) = epsilon {
                commands::check_epsilons(list)?;
            }
            let report = commands::verify(&load(cli)?, epsilon.clone(), csv_dir, opts)?;
            print(&report, cli.json);
            let failed = report.failures();
            if failed > 0 {
                return Err(CliError::Unconverged(format!("{failed} cycle searches did not converge")));
            }
        }
        Command::ReproduceExample => {
            if cli.config.is_some() {
                return Err(CliError::Config("reproduce-example uses fixed inputs and takes no --config".into()));
            }
            print(&commands::reproduce_example()?, cli.json)
        }
        Command::DumpField { numerical } => {
            let report = commands::dump_field(&load(cli)?, *numerical, csv_dir, opts)?;
            if csv_dir.is_some() {
                print(&report, cli.json);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
