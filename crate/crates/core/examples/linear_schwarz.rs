//! Stationary RAS and SRAS on the 1D Poisson problem. The SRAS iterates are
//! the RAS iterates restricted to the skeleton.
//!
//! cargo run --release --example linear_schwarz

use std::sync::Arc;

use ddsolve::decomp::{build_grid, Layout};
use ddsolve::linalg::dense::diff_norm_inf;
use ddsolve::linear_schwarz::{LinearSchwarz, StationaryOptions, Variant};
use ddsolve::problems::assemble_poisson;

fn main() -> ddsolve::Result<()> {
    let grid = build_grid(1, &[199], 1.0 / 200.0)?;
    let (a, f) = assemble_poisson(&grid);
    let layout = Arc::new(Layout::build(&grid, &[5], 4, &a)?);
    let ls = LinearSchwarz::new(a, f, layout)?;
    println!("N_v = {}, N_bar = {}", ls.n_global(), ls.n_skeleton());

    let exact = ls.direct_solve()?;
    let u0: Vec<f64> = (0..ls.n_global()).map(|i| (i as f64 * 0.01).sin()).collect();
    let opts = StationaryOptions { rtol: 1e-8, maxit: 2000, keep_iterates: true, ..Default::default() };
    let ras = ls.solve_stationary(Variant::Ras, &u0, Some(&exact), &opts)?;
    let sk = &ls.layout().skeleton;
    let sras = ls.solve_stationary(Variant::Sras, &sk.restrict(&u0), Some(&exact), &opts)?;

    let gap = ras.iterates.iter().zip(&sras.iterates).map(|(u, v)| diff_norm_inf(&sk.restrict(u), v)).fold(0.0, f64::max);
    println!("RAS  {} iterations, converged {}", ras.iterations(), ras.converged);
    println!("SRAS {} iterations, converged {}", sras.iterations(), sras.converged);
    println!("largest skeleton gap between the iterates: {gap:.2e}");
    for r in ras.rows.iter().step_by(25) {
        println!("  {:>4}  err {:.3e}", r.iter, r.err);
    }
    Ok(())
}
