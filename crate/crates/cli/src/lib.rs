//! Command-line harness: dataset generation, training, optimization and
//! scheme comparison.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;

use std::io::Write;

pub use args::{Cli, Command, Scheme};
pub use commands::{
    cmd_bcd, cmd_compare, cmd_config, cmd_generate, cmd_params, cmd_train, compare_csv, CompareRow,
    COMPARE_HEADER,
};
pub use config::{Profile, RunConfig};
pub use error::{CliError, CliResult, ExitKind};

pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Config(a) => cmd_config(a, out),
        Command::Generate(a) => cmd_generate(a, out).map(drop),
        Command::Train(a) => cmd_train(a, out).map(drop),
        Command::Bcd(a) => cmd_bcd(a, out).map(drop),
        Command::Compare(a) => cmd_compare(a, out).map(drop),
        Command::Params(a) => cmd_params(a, out),
    }
}
