use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match naffo::cli::run_with_args(std::env::args_os(), &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let _ = out.flush();
            if failure.code == naffo::cli::EXIT_SUCCESS {
                print!("{}", failure.message);
            } else {
                eprintln!("naffo: {}", failure.message.trim_end());
            }
            ExitCode::from(failure.code)
        }
    }
}
