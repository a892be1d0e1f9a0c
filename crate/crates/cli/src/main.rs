//! `pasql`: experiment harness for periodic agent-state Q-learning.

mod args;
mod commands;
mod setup;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use setup::Usage;

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.global.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    let g = &cli.global;
    match &cli.command {
        Command::Learn(a) => commands::learn(g, a)?,
        Command::Eval(a) => commands::eval(g, a)?,
        Command::Search(a) => commands::search(g, a)?,
        Command::Limit(a) => commands::limit(g, a)?,
        Command::Bound(a) => commands::bound(g, a)?,
        Command::Chain(a) => commands::chain(g, a)?,
        Command::Convergence(a) => commands::convergence(g, a)?,
        Command::Repro(a) => return commands::repro_tables(g, a),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some reference checks failed");
            ExitCode::from(1)
        }
        Err(e) if e.is::<Usage>() => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
