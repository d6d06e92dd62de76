use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use hgf_cli::{run, CliError, Overrides, RunConfig};

/// Runs simulations, identity checks, oracles and diagnostics of the
/// hyperbolic geometric flow from a TOML configuration.
#[derive(Debug, Parser)]
#[command(name = "hgf", version)]
struct Args {
    /// Run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for random presets (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Resolution ladder, e.g. `32,64,128` (overrides the configured ladder).
    #[arg(long, value_delimiter = ',')]
    ladder: Option<Vec<usize>>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = RunConfig::load(&args.config).and_then(|mut c| {
        c.apply(&Overrides { out: args.out, seed: args.seed, ladder: args.ladder });
        run(&c)
    });
    match result {
        Ok(o) => {
            if !args.quiet {
                print!("{}", o.summary);
            }
            ExitCode::from(o.status)
        }
        Err(e) => {
            eprintln!("hgf: {e}");
            ExitCode::from(CliError::exit_status(&e))
        }
    }
}
