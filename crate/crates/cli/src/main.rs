use std::process::ExitCode;

fn main() -> ExitCode {
    pathnat_cli::main_with(std::env::args_os())
}
