use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = ris_cli::Cli::parse();
    let stdout = std::io::stdout();
    match ris_cli::run(&cli, &mut stdout.lock()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
