use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(dialogue_lab::cli::run(std::env::args()) as u8)
}
