use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ddsolve::bench::{run_to_dir, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ddsolve", version, about = "Volume and substructured Schwarz solvers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method of an experiment config and write CSV/JSON outputs.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the built-in invariant checks on small problems.
    Verify,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run { config, out, threads, seed } => {
            let result = ExperimentConfig::load(&config).and_then(|c| run_to_dir(&c, &out, threads, seed));
            match result {
                Ok(summary) => {
                    for r in &summary.runs {
                        println!(
                            "{:<10} iters {:>4}  converged {:<5}  err {:.3e}  L(n) {:>6}  bytes {}",
                            r.method, r.iters, r.converged, r.final_error, r.cost, r.bytes
                        );
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Verify => {
            let checks = ddsolve::verify::run_all();
            let mut ok = true;
            for c in &checks {
                println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                ok &= c.passed;
            }
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
