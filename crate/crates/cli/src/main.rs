use std::process::ExitCode;

use rhgnn_cli::config::{cli, Command, RunConfig};

fn main() -> ExitCode {
    let m = cli().get_matches();
    let (name, sub) = m.subcommand().expect("subcommand is required");
    let command = Command::from_name(name).expect("registered subcommand");
    let result = RunConfig::from_matches(command, sub).and_then(|cfg| rhgnn_cli::execute(&cfg));
    match result {
        Ok(outcome) => {
            for (k, v) in &outcome.metrics {
                println!("metric {k} {v}");
            }
            eprintln!("wrote {}", outcome.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
