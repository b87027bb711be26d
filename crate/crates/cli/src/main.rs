use std::process::ExitCode;

fn main() -> ExitCode {
    match gstiefel_landing_cli::main_with(std::env::args()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
