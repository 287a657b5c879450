use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rotor_cli::{config::RunConfig, CliError, Frame, Outcome, SCAN_FILE, STATE_FILE};
use rotor_core::explosion::PrecessionModel;

#[derive(Parser)]
#[command(name = "gyro", version, about = "Cogwheel-state preparation and magnetic precession pipeline")]
struct Cli {
    /// Run configuration; the NO2+ preset defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `[output] directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Turn physics warnings into exit code 3.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Jvec,
    Detector,
}

#[derive(Subcommand)]
enum Command {
    /// Drive |J,J> into the cogwheel superposition and write the state.
    Prepare {
        /// Write the ideal superposition instead of propagating the pulse.
        #[arg(long)]
        analytic: bool,
    },
    /// Simulate the pump-probe delay scan for a prepared state.
    Scan {
        #[arg(long)]
        state: Option<PathBuf>,
        /// Overrides `[scan] seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the precession frequency and convert it to |g_r|.
    Extract {
        #[arg(long)]
        table: Option<PathBuf>,
        /// Defaults to jvec when the table carries <J> columns.
        #[arg(long, value_enum)]
        model: Option<ModelArg>,
    },
    /// Tabulate the angular density, optionally after evolving in the field.
    Density {
        #[arg(long)]
        state: Option<PathBuf>,
        /// Evolution time, microseconds.
        #[arg(long, allow_hyphen_values = true)]
        evolve_us: Option<f64>,
        #[arg(long, value_enum, default_value = "lab")]
        frame: Frame,
    },
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    match cli.command {
        Command::Prepare { analytic } => rotor_cli::prepare(&cfg, &out, cli.strict, analytic),
        Command::Scan { state, seed } => {
            let state = state.unwrap_or_else(|| out.join(STATE_FILE));
            rotor_cli::scan(&cfg, &state, &out, seed, cli.strict)
        }
        Command::Extract { table, model } => {
            let table = table.unwrap_or_else(|| out.join(SCAN_FILE));
            let model = model.map(|m| match m {
                ModelArg::Jvec => PrecessionModel::Jvec,
                ModelArg::Detector => PrecessionModel::Detector,
            });
            rotor_cli::extract(&cfg, &table, &out, model)
        }
        Command::Density { state, evolve_us, frame } => {
            let state = state.unwrap_or_else(|| out.join(STATE_FILE));
            rotor_cli::density(&cfg, &state, &out, evolve_us, frame)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("gyro: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
