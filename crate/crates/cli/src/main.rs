use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use spdelab_cli::commands::{cmd_bound, cmd_check, cmd_eig, cmd_lyapunov, cmd_simulate};
use spdelab_cli::{canned, exit_code, ConfigError, Options};

#[derive(Parser)]
#[command(
    name = "spdelab",
    version,
    about = "Simulate and analyse semilinear SPDEs with Wiener and jump noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file, or the name of a canned scenario.
    #[arg(long)]
    scenario: String,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "t-end")]
    t_end: Option<f64>,
    /// Output directory.
    #[arg(long, env = "SPDELAB_OUT", default_value = "spdelab_out")]
    out: PathBuf,
    /// Worker threads for ensembles (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

impl From<Common> for Options {
    fn from(c: Common) -> Self {
        Options {
            scenario: c.scenario,
            paths: c.paths,
            seed: c.seed,
            dt: c.dt,
            t_end: c.t_end,
            out: c.out,
            threads: c.threads,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Principal eigenpair of the elliptic operator.
    Eig(Common),
    /// Structural condition checks with witnesses.
    Check(Common),
    /// Blow-up thresholds and time bounds.
    Bound(Common),
    /// Monte Carlo ensemble.
    Simulate(Common),
    /// Generator bound certificate and global-existence experiment.
    Lyapunov(Common),
    /// List canned scenarios, or print one.
    Scenarios { name: Option<String> },
}

fn run(cli: Cli) -> Result<()> {
    let written = match cli.command {
        Command::Eig(c) => cmd_eig(&c.into())?,
        Command::Check(c) => cmd_check(&c.into())?,
        Command::Bound(c) => cmd_bound(&c.into())?,
        Command::Simulate(c) => cmd_simulate(&c.into())?,
        Command::Lyapunov(c) => cmd_lyapunov(&c.into())?,
        Command::Scenarios { name: None } => {
            canned::names().for_each(|n| println!("{n}"));
            return Ok(());
        }
        Command::Scenarios { name: Some(n) } => {
            let text = canned::canned(&n)
                .ok_or_else(|| ConfigError(format!("no canned scenario '{n}'")))?;
            print!("{text}");
            return Ok(());
        }
    };
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
