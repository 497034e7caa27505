use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(bellsim_cli::run(std::env::args()) as u8)
}
