// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod inputs;
mod manifest;

use std::process::ExitCode;

use clap::Parser;
use netcoh::NetcohError;

use args::{Cli, Command};

const EXIT_MODEL: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Failures of the estimators themselves, as opposed to bad input.
fn exit_code(e: &NetcohError) -> u8 {
    match e {
        NetcohError::EstimatorDoesNotExist(_)
        | NetcohError::Singular(_)
        | NetcohError::IsolatedNewNodes(_)
        | NetcohError::NoEvents
        | NetcohError::TooLarge { .. } => EXIT_MODEL,
        _ => EXIT_USAGE,
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>, String> {
    match std::env::var("NETCOH_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| format!("NETCOH_THREADS must be a positive integer, got '{v}'")),
        _ => Ok(flag),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let threads = match thread_count(cli.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: cannot set up {t} threads: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a, threads),
        Command::Predict(a) => commands::predict(a, threads),
        Command::Cv(a) => commands::cv(a, threads),
        Command::Simulate(a) => commands::simulate(a, threads),
        Command::Sparsify(a) => commands::sparsify(a, threads),
        Command::Theory(a) => commands::theory(a, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_failures_exit_with_2() {
        assert_eq!(exit_code(&NetcohError::NoEvents), EXIT_MODEL);
        assert_eq!(exit_code(&NetcohError::Singular("x".into())), EXIT_MODEL);
        assert_eq!(
            exit_code(&NetcohError::InvalidInput("x".into())),
            EXIT_USAGE
        );
    }
}
