use std::process::ExitCode;

fn main() -> ExitCode {
    hawkfs::cli::main_with_args(std::env::args_os())
}
