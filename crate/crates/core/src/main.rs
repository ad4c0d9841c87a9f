use std::process::ExitCode;

fn main() -> ExitCode {
    contract_rl::cli::main_with(std::env::args_os())
}
