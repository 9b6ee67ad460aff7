use std::process::ExitCode;

use clap::Parser;

use mindex_cli::{commands::write_json, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => {
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            ExitCode::SUCCESS
        }
        Err((err, out)) => {
            let report = err.report();
            eprintln!("{}", serde_json::to_string(&report).expect("report serializes"));
            if let Some(dir) = out.filter(|d| d.is_dir()) {
                let _ = write_json(&dir.join("error.json"), &report);
            }
            ExitCode::from(report.exit_code)
        }
    }
}
