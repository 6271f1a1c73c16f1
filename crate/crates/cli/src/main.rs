use std::process::ExitCode;

use anyhow::Result;
use clap::Parser;
use tfnn_cli::commands::{execute, write_outputs, Cli, Command, Globals};
use tfnn_cli::suite::run_suite;

fn run(cli: Cli) -> Result<ExitCode> {
    let g = Globals {
        seed: cli.seed,
        samples: cli.samples,
        out_dir: cli.out_dir.clone(),
    };
    if let Command::Suite(args) = &cli.command {
        let csv = g.resolve(&args.csv);
        let report = run_suite(args.config.as_deref(), &g.out_dir, g.samples, &csv)?;
        for row in &report.rows {
            println!("{}", row.to_csv());
        }
        for (name, err) in &report.errors {
            eprintln!("experiment {name} failed: {err}");
        }
        println!("wrote {}", csv.display());
        return Ok(if report.is_success() { ExitCode::SUCCESS } else { ExitCode::FAILURE });
    }
    let outcome = execute(&cli.command, &g)?;
    println!("{}", outcome.summary);
    if let Some(out) = cli.command.outputs() {
        for path in write_outputs(&outcome, out, &g)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
