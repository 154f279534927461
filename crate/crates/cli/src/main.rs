mod args;
mod commands;
mod failure;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn configure_threads() {
    let Ok(value) = std::env::var("WCLUSTER_THREADS") else {
        return;
    };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("could not size the thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring WCLUSTER_THREADS={value:?}; expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    configure_threads();
    let outcome = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::GciScan(a) => commands::gci_scan(a),
        Command::Distance(a) => commands::distance(a),
        Command::Barycenter(a) => commands::barycenter(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
