use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use lastexit_core::cli::{exit_code, run, Args, RunConfig};

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = RunConfig::from_file(&args.config)
        .map(|c| c.log_level)
        .unwrap_or(log::LevelFilter::Warn);
    env_logger::Builder::new().filter_level(level).init();

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match run(&args, &mut out) {
        Ok(outcome) => {
            let _ = out.flush();
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
