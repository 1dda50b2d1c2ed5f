//! Restricting the volume Krylov space to the skeleton gives the
//! substructured Krylov space.
//!
//! cargo run --release --example krylov_check -- [k]

use std::sync::Arc;

use ddsolve::decomp::{build_grid, Layout};
use ddsolve::linear_schwarz::LinearSchwarz;
use ddsolve::problems::assemble_poisson;

fn main() -> ddsolve::Result<()> {
    let grid = build_grid(2, &[31, 31], 1.0 / 32.0)?;
    let (a, f) = assemble_poisson(&grid);
    let layout = Arc::new(Layout::build(&grid, &[2, 2], 2, &a)?);
    let ls = LinearSchwarz::new(a, f, layout)?;
    let k: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8).min(ls.n_skeleton());
    let u0 = vec![0.0; ls.n_global()];
    let rep = ls.check_krylov_restriction(&u0, k, 1)?;
    println!("N_bar = {}, k = {k}", ls.n_skeleton());
    for (p, e) in rep.power_identity_errors.iter().enumerate() {
        println!("  power {:>2}: relative error {e:.2e}", p + 1);
    }
    println!(
        "ranks: restricted volume {}, substructured {}, union {} (equal: {})",
        rep.rank_restricted_volume, rep.rank_substructured, rep.rank_union, rep.spans_equal
    );
    println!("inclusion residual {:.2e}", rep.inclusion_residual);
    Ok(())
}
