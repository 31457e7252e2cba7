use std::process::ExitCode;

fn main() -> ExitCode {
    sihmm::cli::main_with_args(std::env::args_os())
}
