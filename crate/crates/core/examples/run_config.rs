//! Runs a JSON experiment config and prints the per-method summary, the
//! same path `ddsolve run` takes.
//!
//! cargo run --release --example run_config -- configs/poisson_1d.json

use std::path::PathBuf;

use ddsolve::bench::{run_to_dir, ExperimentConfig};

fn main() -> ddsolve::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "configs/poisson_1d.json".into());
    let config = ExperimentConfig::load(&path)?;
    let out = std::env::temp_dir().join("ddsolve-example");
    let summary = run_to_dir(&config, &out, None, 0)?;
    for r in &summary.runs {
        println!("{:<10} iters {:>4}  converged {:<5}  L(n) {:>6}  bytes {}", r.method, r.iters, r.converged, r.cost, r.bytes);
    }
    println!("CSV files in {}", out.display());
    Ok(())
}
