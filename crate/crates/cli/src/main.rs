use std::process::ExitCode;

fn main() -> ExitCode {
    match lilklucb_cli::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lilklucb: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
