use std::process::ExitCode;

fn main() -> ExitCode {
    snce::cli::run(std::env::args_os())
}
