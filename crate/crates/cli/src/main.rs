use clap::{Parser, Subcommand};
use hodograph_cli::commands::{run, Command};
use hodograph_cli::{CliError, RunConfig};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hodograph", version, about = "Hodograph solutions of u_t + (u.grad)u = g + A u")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Velocity field on a space-time grid.
    Solve(Args),
    /// Blow-up sheets, the first catastrophe and no-blow-up certificates.
    Blowup(Args),
    /// Periodicity of e^{tA} and of the solution.
    Period(Args),
    /// Hodograph solution against exact characteristics (exit 3 on failure).
    Compare(Args),
    /// solve/blowup/compare for the rotating-frame preset with singular A.
    Coriolis3d(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the task seed.
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(cmd: Command, args: &Args) -> Result<(), CliError> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.set_seed(seed);
    }
    let outcome = run(cmd, &cfg)?;
    let mut w: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    outcome.output.write(&mut w)?;
    w.flush()?;
    match outcome.gate {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match &cli.command {
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Blowup(a) => (Command::Blowup, a),
        Cmd::Period(a) => (Command::Period, a),
        Cmd::Compare(a) => (Command::Compare, a),
        Cmd::Coriolis3d(a) => (Command::Coriolis3d, a),
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        // the reader closed stdout early, as `| head` does
        Err(CliError::Io(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hodograph: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
