use std::process::ExitCode;

fn main() -> ExitCode {
    tweetsense_cli::main_with(std::env::args_os())
}
