use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use dstring_cli::{run, CliError, Command, RunConfig};

/// Damped string coupled to a scalar-field reservoir.
#[derive(Debug, Parser)]
#[command(name = "dstring", version)]
struct Args {
    command: Command,
    /// Flat key=value config file.
    #[arg(long)]
    config: PathBuf,
    /// Prefix for `<prefix><command>.csv` and `<prefix>summary.txt`.
    #[arg(long, default_value = "")]
    out: String,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn execute(args: Args) -> Result<(), CliError> {
    let cfg = RunConfig::load(&args.config, args.command, args.out)?;
    with_threads(args.threads, || run(&cfg).map(|_| ()))
}

#[cfg(feature = "parallel")]
fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError> {
    match threads {
        None => f(),
        Some(0) => Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?
            .install(f),
    }
}

#[cfg(not(feature = "parallel"))]
fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T, CliError>) -> Result<T, CliError> {
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    f()
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dstring: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
