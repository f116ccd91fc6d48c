//! `gptw`: batch front end. Exit 0 when every check passes, 1 on a failed
//! check or solve, 2 on a configuration error (nothing is written then).

mod commands;
mod config;
mod report;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, ConfigError};
use report::Run;

const THREADS_VAR: &str = "GPTW_THREADS";

fn threads() -> Result<(), ConfigError> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| ConfigError::Invalid(format!("{THREADS_VAR}={value} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| ConfigError::Invalid(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match cli.resolve() {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if cli.flags.print_config {
        print!("{}", cfg.to_toml());
        return ExitCode::SUCCESS;
    }
    let cmd = match cfg.validate().and_then(|cmd| threads().map(|_| cmd)) {
        Ok(cmd) => cmd,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let mut run = match Run::new(&cfg.output) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: cannot create {}: {e}", cfg.output.display());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = run.write("config.toml", cfg.to_toml()) {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let error = commands::dispatch(cmd, &cfg, &mut run).err().map(|e| e.to_string());
    if let Some(e) = &error {
        eprintln!("error: {e}");
    }
    match run.finish(cmd.name(), error) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("checks failed; see {}", cfg.output.join("report.json").display());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: cannot write report: {e}");
            ExitCode::from(1)
        }
    }
}
