use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use micromaser::cli::{cmd_predict, cmd_run, cmd_sweep, error_json, exit_code, parse_values, SweepAxis};
use micromaser::config::{parse_config_with, Overrides};
use micromaser::{Error, Result};

#[derive(Parser)]
#[command(name = "micromaser", version, about = "Cavity thermalization by repeated atom collisions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file.
    #[arg(long)]
    config: PathBuf,
    /// Override run.collisions_max.
    #[arg(long)]
    collisions: Option<usize>,
    /// Override field.dim.
    #[arg(long)]
    dim: Option<usize>,
    /// Only print errors.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate one configuration per value of a parameter.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// N, T_a, g or tau.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Print the closed-form predictions without simulating.
    Predict {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { collisions: self.collisions, dim: self.dim }
    }

    fn read(&self) -> Result<String> {
        std::fs::read_to_string(&self.config).map_err(|e| Error::Io(format!("{}: {e}", self.config.display())))
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run { common, out } => {
            let config = parse_config_with(&common.read()?, common.overrides())?;
            let summary = cmd_run(&config, &out)?;
            if !common.quiet {
                println!("{}", summary.line());
            }
        }
        Command::Sweep { common, out, axis, values } => {
            let axis: SweepAxis = axis.parse()?;
            let values = parse_values(&values)?;
            let summary = cmd_sweep(&common.read()?, common.overrides(), axis, &values, &out)?;
            if !common.quiet {
                print!("{}", summary.table());
            }
        }
        Command::Predict { common } => {
            let config = parse_config_with(&common.read()?, common.overrides())?;
            let text = cmd_predict(&config)?;
            if !common.quiet {
                print!("{text}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let quiet = match &cli.command {
        Command::Run { common, .. } | Command::Sweep { common, .. } | Command::Predict { common } => common.quiet,
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(if quiet { "error" } else { "warn" }))
        .init();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
