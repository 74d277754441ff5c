use std::process::ExitCode;

fn main() -> ExitCode {
    rhd::cli::main_with_args(std::env::args_os())
}
