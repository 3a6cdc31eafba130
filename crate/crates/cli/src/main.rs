//! `ssm-resolve`: command-line front end for spectral-submanifold analysis.

mod args;
mod commands;
mod error;
mod output;
mod svg;

use clap::Parser;

use args::{Cli, Command, Tolerances};
use commands::Context;
use error::CliResult;

fn run(cli: Cli) -> CliResult<()> {
    let file = commands::read_config(cli.global.config.as_deref())?;
    let ctx = Context {
        tol: Tolerances::resolve(&cli.global.tol, file.as_ref())?,
        seed: cli.global.seed,
        quiet: cli.global.quiet,
    };
    if let Some(n) = cli.global.jobs {
        if n == 0 {
            return Err(error::CliError::Usage("--jobs must be at least 1".into()));
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Analyze(a) => commands::analyze(a, &ctx),
        Command::Beam(a) => commands::beam(a, &ctx),
        Command::Frc(a) => commands::frc(a, &ctx),
        Command::Isola(a) => commands::isola(a, &ctx),
        Command::Verify(a) => commands::verify(a, &ctx),
    }
}

fn main() {
    let cli = Cli::parse();
    let level = if cli.global.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
