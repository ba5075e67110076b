//! `strainmix` command-line tool.

mod args;
mod compare;
mod failure;
mod figure;
mod fit;
mod output;
mod plaf;
mod report;
mod simulate;
mod study;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::failure::Failure;

fn main() -> ExitCode {
    // Usage errors are input errors (exit 1); clap would use 2, which is
    // reserved for inference failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(failure::EXIT_INPUT)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    if let Err(e) = configure_pool(cli.command.jobs()) {
        eprintln!("error: {e:#}");
        return ExitCode::from(failure::EXIT_INPUT);
    }
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    let outcome = match &cli.command {
        Command::Fit(a) => fit::run(a, &command_line),
        Command::Simulate(a) => simulate::run(a, &command_line),
        Command::Study(a) => study::run(a, &command_line),
        Command::Compare(a) => compare::run(a, &command_line),
        Command::Plaf(a) => plaf::run(a, &command_line),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}

fn configure_pool(jobs: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = jobs {
        anyhow::ensure!(n > 0, "--jobs must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}
