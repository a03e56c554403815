use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stochastic_transport::config::ExperimentConfig;
use stochastic_transport::experiment::{
    cmd_hypotheses, cmd_solve, cmd_uniqueness, cmd_verify_weak, cmd_wong_zakai, CommandOutcome,
    RunSetup, HYPOTHESIS_SAMPLES, WEAK_TOLERANCE,
};
use stochastic_transport::Result;

/// Pathwise solver and verification lab for the stochastic transport equation.
#[derive(Parser, Debug)]
#[command(name = "stlab", version)]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed (overrides `seed`).
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Use this path instead of sampling one.
    #[arg(long, global = true, value_name = "CSV")]
    path_file: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve once and dump snapshots, path, norms and manifest.
    Solve {
        #[arg(long, default_value_t = 16)]
        snapshots: usize,
    },
    /// Check the weak formulation on a dense run or a saved one.
    VerifyWeak {
        /// Directory written by `solve` (its snapshots must sit on path knots).
        #[arg(long, value_name = "DIR")]
        run_dir: Option<PathBuf>,
        #[arg(long, default_value_t = WEAK_TOLERANCE)]
        tolerance: f64,
    },
    /// Semi-Lagrangian versus upwind over a grid ladder.
    Uniqueness {
        #[arg(long, default_value_t = 16)]
        snapshots: usize,
    },
    /// Convergence of piecewise-linear path approximants.
    WongZakai {
        /// Repeat over this many consecutive seeds and keep the worst case.
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long, default_value_t = 16)]
        snapshots: usize,
    },
    /// Audit the drift against the uniqueness hypotheses.
    Hypotheses {
        #[arg(long, default_value_t = HYPOTHESIS_SAMPLES)]
        samples: usize,
    },
}

fn run(cli: &Cli) -> Result<CommandOutcome> {
    let config_path = cli.config.as_ref().ok_or_else(|| {
        stochastic_transport::Error::Config("--config <FILE> is required".into())
    })?;
    let config = ExperimentConfig::load(config_path)?;
    let setup = RunSetup::new(config, cli.out.clone(), cli.seed, cli.path_file.as_deref())?;
    match &cli.command {
        Command::Solve { snapshots } => cmd_solve(&setup, *snapshots),
        Command::VerifyWeak { run_dir, tolerance } => cmd_verify_weak(&setup, run_dir.as_deref(), *tolerance),
        Command::Uniqueness { snapshots } => cmd_uniqueness(&setup, *snapshots),
        Command::WongZakai { seeds, snapshots } => cmd_wong_zakai(&setup, *seeds, *snapshots),
        Command::Hypotheses { samples } => cmd_hypotheses(&setup, *samples),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
