use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lagrangeflow_cli::{catalog, run_files, RunOptions};

#[derive(Parser)]
#[command(name = "lagrangeflow", version, about = "Eulerian and Lagrangian conservation-law scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files and write their artifacts.
    Run {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        /// Scenarios to run in parallel.
        #[arg(long)]
        jobs: Option<usize>,
        /// Write each scenario to DIR/<name>.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Write wall_time_s = 0 so reports are byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// List built-in fluxes, pressure laws and initial profiles.
    Catalog,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            configs,
            jobs,
            out,
            no_timing,
        } => run_files(
            &configs,
            &RunOptions {
                jobs,
                out,
                timing: !no_timing,
            },
        ),
        Command::Catalog => {
            print!("{}", catalog());
            0
        }
    };
    ExitCode::from(code as u8)
}
