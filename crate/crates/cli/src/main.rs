use std::process::ExitCode;

use clap::Parser;

mod args;
mod commands;

use args::{Cli, Command};

const EXIT_FAILURE: u8 = 1;
const EXIT_NO_REGISTRATION: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_FAILURE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }

    let result = match cli.command {
        Command::Register(a) => commands::register(a),
        Command::Match(a) => commands::match_pair(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Render(a) => commands::render(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let failed = e
                .downcast_ref::<msreg_core::Error>()
                .is_some_and(|e| e.is_registration_failure());
            ExitCode::from(if failed { EXIT_NO_REGISTRATION } else { EXIT_FAILURE })
        }
    }
}
