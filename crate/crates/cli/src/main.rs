use std::process::ExitCode;

use clap::Parser;

mod commands;
mod config;
mod verify;

use config::{Cli, Command};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = config::resolve(cli.command, cli.opts).and_then(|cfg| match cfg.command {
        Command::Steady => commands::run_steady(&cfg),
        Command::Evolve => commands::run_evolve(&cfg),
        Command::Verify => verify::run_verify(&cfg),
        Command::Sweep => commands::run_sweep(&cfg),
        Command::MassTau => commands::run_mass_tau(&cfg),
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
