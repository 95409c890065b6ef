use std::process::ExitCode;

fn main() -> ExitCode {
    twinet::cli::main_with_args(std::env::args_os())
}
