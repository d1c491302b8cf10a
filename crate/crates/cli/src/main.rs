use std::process::ExitCode;

fn main() -> ExitCode {
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    let code = numdiff_cli::run(std::env::args_os(), &mut numdiff_cli::Io { stdout: &mut out, stderr: &mut err });
    ExitCode::from(code as u8)
}
