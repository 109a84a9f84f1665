//! `hnoma`: reproducible experiments on the hybrid uplink NOMA game.
//!
//! Exit codes: 0 on success, 1 on usage or configuration errors, 2 when a
//! run completed but the mathematical solution is invalid.

mod commands;
mod config;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use commands::{OutputFormat, Protocol};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hnoma", version, about = "Evolutionary-game analysis and simulation of hybrid uplink NOMA")]
struct Cli {
    /// Experiment configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override for simulation commands.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for the simulator (affects speed only, never results).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Output directory for generated files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// File format for trajectory and table outputs.
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for OutputFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => OutputFormat::Csv,
            FormatArg::Json => OutputFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    SuBs,
    SuU,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the stable state for the configured cost model.
    Ess,
    /// Integrate the replicator dynamics and export the trajectory.
    Replicator,
    /// Monte-Carlo slot simulation at a fixed policy.
    Simulate,
    /// Run a state-updating protocol (su-bs or su-u).
    Adaptive {
        #[arg(value_enum)]
        protocol: ProtocolArg,
    },
    /// Solve the equilibrium along a parameter axis and tabulate throughputs.
    Sweep,
    /// Closed-form throughput comparison at a state or silence probability.
    Throughput,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                ExitCode::SUCCESS
            } else {
                let _ = e.print();
                ExitCode::from(1)
            };
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    if let Some(n) = cli.workers {
        // affects scheduling only; results are partition-independent
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    let path = cli
        .config
        .ok_or_else(|| anyhow::anyhow!("--config <PATH> is required"))?;
    let loaded = config::load(&path)?;
    let format: OutputFormat = cli.format.into();
    match cli.command {
        Command::Ess => commands::cmd_ess(&loaded),
        Command::Replicator => commands::cmd_replicator(&loaded, &cli.out, format),
        Command::Simulate => commands::cmd_simulate(&loaded, &cli.out, cli.seed),
        Command::Adaptive { protocol } => {
            let p = match protocol {
                ProtocolArg::SuBs => Protocol::SuBs,
                ProtocolArg::SuU => Protocol::SuU,
            };
            commands::cmd_adaptive(&loaded, p, &cli.out, cli.seed, format)
        }
        Command::Sweep => commands::cmd_sweep(&loaded, &cli.out, format),
        Command::Throughput => commands::cmd_throughput(&loaded),
    }
}
