use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use setkoop::runner::{run_path, RunOptions, Status};
use setkoop::CHECKS;

/// Runs numerical checks of set-valued Koopman, Liouville and
/// Perron-Frobenius operators on a declared control system.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the checks listed in a scenario file.
    Run {
        config: PathBuf,
        /// Overrides `output_dir` of the scenario.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Overrides `controls.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Run the checks concurrently.
        #[arg(long)]
        parallel: bool,
        /// Overrides `time.step`.
        #[arg(long)]
        step: Option<f64>,
    },
    /// List the available checks.
    ListChecks,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListChecks => {
            for c in CHECKS {
                let linear = if c.needs_linear_feedback {
                    " [linear_feedback]"
                } else {
                    ""
                };
                println!(
                    "{:<18} {:<17} {}{}",
                    c.name, c.module, c.description, linear
                );
                println!("{:<36} {}", "", c.anchor);
            }
            ExitCode::SUCCESS
        }
        Command::Run {
            config,
            output_dir,
            seed,
            parallel,
            step,
        } => {
            let options = RunOptions {
                output_dir,
                seed,
                step,
                parallel,
            };
            match run_path(&config, &options) {
                Ok(report) => {
                    for r in &report.rows {
                        println!(
                            "{:<18} {:<8} worst={:e} tol={:e}",
                            r.check,
                            r.status.as_str(),
                            r.worst_defect,
                            r.tolerance
                        );
                        if let Status::Error(msg) | Status::Diverged(msg) = &r.status {
                            eprintln!("{}: {msg}", r.check);
                        }
                    }
                    println!(
                        "summary: {}",
                        report.output_dir.join("summary.csv").display()
                    );
                    ExitCode::from(report.exit_code() as u8)
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
