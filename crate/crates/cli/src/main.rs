use std::process::ExitCode;

use split_gibbs::config::{parse_config, USAGE};
use split_gibbs::runner::execute;
use split_gibbs::Error;

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" || args[0] == "help" {
        println!("{USAGE}");
        return ExitCode::SUCCESS;
    }
    let config = match parse_config(&args) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("error: {err}");
            eprintln!("run 'split-gibbs --help' for usage");
            return ExitCode::from(1);
        }
    };
    match execute(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ Error::Usage(_)) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
