use std::process::ExitCode;

use mustcall_core::diagnostics::cli::{color_enabled, run_cli};

fn main() -> ExitCode {
    let code = run_cli(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr(), color_enabled());
    ExitCode::from(code as u8)
}
