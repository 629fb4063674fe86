use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use refined_sobolev::harness::{self, Suite};

/// Refined Sobolev scale experiments.
///
/// Reports go to `<root>/<suite>/{rows.csv, report.json, trend.svg}`, where
/// the root is `--output-root`, else `$HSPHI_OUTPUT_ROOT`, else
/// `./hsphi-output`.
#[derive(Parser)]
#[command(name = "refsob", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suite named in a TOML configuration.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// List the available suites.
    ListSuites,
    /// Print a suite's purpose and its default configuration.
    Describe { suite: String },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> refined_sobolev::Result<ExitCode> {
    match cli.command {
        Command::Run { config, output_root } => {
            let exp = harness::load_config(&config)?;
            let root = output_root.unwrap_or_else(harness::output_root);
            let (report, dir) = harness::run_and_write(&exp, &root)?;
            for row in report.rows.iter().filter(|r| r.verdict != harness::RowVerdict::Pass) {
                eprintln!(
                    "{}: N={} {} [{}] = {:e}",
                    row.verdict.as_str(),
                    row.resolution,
                    row.quantity,
                    row.parameters,
                    row.value
                );
            }
            let s = report.summary;
            println!(
                "{} ({}): {} pass, {} fail, {} inconclusive -> {}",
                report.suite,
                report.config_hash,
                s.pass,
                s.fail,
                s.inconclusive,
                dir.display()
            );
            Ok(if report.any_failed() { ExitCode::from(1) } else { ExitCode::SUCCESS })
        }
        Command::ListSuites => {
            for suite in Suite::ALL {
                println!("{:<24}{}", suite.name(), suite.summary());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Describe { suite } => {
            print!("{}", Suite::from_name(&suite)?.describe());
            Ok(ExitCode::SUCCESS)
        }
    }
}
