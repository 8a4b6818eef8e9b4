use std::process::ExitCode;

use clap::Parser;
use robust_sparse_cli::args::Cli;
use robust_sparse_cli::run;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Exit status 2 is reserved for indeterminate verdicts.
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    let print_only = cli.print_config;
    let (cfg, threads) = match cli.resolve() {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    if print_only {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    match run(&cfg, threads) {
        Ok(outcome) => {
            for f in &outcome.files {
                eprintln!("wrote {}", f.display());
            }
            println!("{}", serde_json::to_string_pretty(&outcome.summary).expect("summary serializes"));
            ExitCode::from(outcome.exit_code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
