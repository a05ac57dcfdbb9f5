mod cli;
mod commands;
mod manifest;
mod resolve;

use clap::Parser;

use crate::cli::{Cli, Command};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::Ed(args) => commands::ed(&cli.common, args),
        Command::Scan(args) => commands::scan(&cli.common, args),
        Command::Gfmc(args) => commands::gfmc(&cli.common, args),
        Command::Sweep(args) => commands::sweep(&cli.common, args),
        Command::Extrapolate(args) => commands::extrapolate(&cli.common, args),
    }
}
