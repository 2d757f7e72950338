use std::process::ExitCode;

use clap::Parser;
use jstdiff_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("JSTDIFF_LOG", "warn"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jstdiff: error: {}", e.to_string().replace(['\n', '\r'], " "));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
