use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(krd_core::cli::dispatch(std::env::args_os()) as u8)
}
