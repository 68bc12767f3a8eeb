use std::process::ExitCode;

use clap::Parser;
use hartree_lab::config::{resolve, Cli};
use hartree_lab::run_and_summarize;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let cfg = match resolve(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match run_and_summarize(&cfg) {
        Ok(out) => {
            for c in &out.checks {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            let failed = out.failed();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                let names: Vec<_> = failed.iter().map(|c| c.name.as_str()).collect();
                eprintln!("check failed: {}", names.join(", "));
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
