//! Invariant checks on small instances.
//!
//! cargo run --release --example verify

fn main() {
    let checks = ddsolve::verify::run_all();
    for c in &checks {
        println!("{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().any(|c| !c.passed) {
        std::process::exit(1);
    }
}
