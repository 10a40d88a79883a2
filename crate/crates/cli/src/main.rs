#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod output;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Command, CommandFactory, FromArgMatches};

use args::{Cli, Threads};

/// Exit status for failures of the numerical machinery; user errors exit 1.
const EXIT_NUMERICAL: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .filter_map(|e| e.downcast_ref::<tlsecho::Error>())
        .any(tlsecho::Error::is_numerical);
    if numerical {
        EXIT_NUMERICAL
    } else {
        1
    }
}

/// Lets values such as `--phase -0.5` reach flag validation.
fn allow_negatives(cmd: Command) -> Command {
    let names: Vec<String> = cmd.get_subcommands().map(|s| s.get_name().to_owned()).collect();
    names
        .iter()
        .fold(cmd.allow_negative_numbers(true), |c, n| c.mut_subcommand(n, allow_negatives))
}

fn main() -> ExitCode {
    let parsed = allow_negatives(Cli::command())
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m));
    let cli = match parsed {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    if let Threads::Count(n) = cli.global.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
