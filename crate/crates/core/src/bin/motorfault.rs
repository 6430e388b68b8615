use std::process::ExitCode;

fn main() -> ExitCode {
    motorfault::cli::main_with_args(std::env::args_os())
}
