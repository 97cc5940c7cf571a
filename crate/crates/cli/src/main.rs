use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use dg_cli::{cmd_assemble, cmd_convergence, cmd_solve, CliError};
use elliptic_dg::mesh::RefinementMode;

#[derive(Parser)]
#[command(name = "dg-elliptic", version, about = "DG internal-penalty elliptic solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    H,
    P,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem once.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads for operator application.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Run a uniform h- or p-refinement study.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        levels: usize,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Write the explicit operator matrix in coordinate format.
    Assemble {
        #[arg(long)]
        config: PathBuf,
        /// Assemble the first-order operator over auxiliary and primal fields.
        #[arg(long)]
        with_auxiliary: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
}

fn threads(command: &Command) -> usize {
    match command {
        Command::Solve { threads, .. } | Command::Convergence { threads, .. } | Command::Assemble { threads, .. } => {
            *threads
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Solve { config, .. } => cmd_solve(&config),
        Command::Convergence {
            config, mode, levels, ..
        } => {
            let mode = match mode {
                Mode::H => RefinementMode::H,
                Mode::P => RefinementMode::P,
            };
            cmd_convergence(&config, mode, levels)
        }
        Command::Assemble {
            config,
            with_auxiliary,
            out,
            ..
        } => cmd_assemble(&config, with_auxiliary, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let n = threads(&cli.command);
    if n == 0 {
        eprintln!("error: --threads must be at least 1");
        return ExitCode::from(2);
    }
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(1);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
