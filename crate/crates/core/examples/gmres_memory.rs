//! GMRES preconditioned by RAS against GMRES on the SRAS system: iteration
//! counts and stored Krylov basis size.
//!
//! cargo run --release --example gmres_memory

use std::sync::Arc;

use ddsolve::decomp::{build_grid, Layout};
use ddsolve::linalg::GmresOptions;
use ddsolve::linear_schwarz::LinearSchwarz;
use ddsolve::problems::assemble_poisson;

fn main() -> ddsolve::Result<()> {
    let cases: [(&str, Vec<usize>, Vec<usize>, usize); 3] = [
        ("1d, 20 subdomains", vec![999], vec![20], 4),
        ("2d, 2x2", vec![83, 83], vec![2, 2], 4),
        ("2d, 4x4", vec![83, 83], vec![4, 4], 2),
    ];
    let opts = GmresOptions { rtol: 1e-10, maxit: 2000, ..Default::default() };
    for (label, points, counts, overlap) in cases {
        let grid = build_grid(points.len(), &points, 1.0 / (points[0] as f64 + 1.0))?;
        let (a, f) = assemble_poisson(&grid);
        let layout = Arc::new(Layout::build(&grid, &counts, overlap, &a)?);
        let ls = LinearSchwarz::new(a, f, layout)?;
        let r = ls.gmres_ras(&vec![0.0; ls.n_global()], &opts)?;
        let s = ls.gmres_sras(&vec![0.0; ls.n_skeleton()], &opts)?;
        println!("{label}: N_v {} N_bar {}", ls.n_global(), ls.n_skeleton());
        println!("  GMRES-RAS  {:>4} its  {:>10} bytes", r.iterations, r.stored_basis_bytes);
        println!("  GMRES-SRAS {:>4} its  {:>10} bytes", s.iterations, s.stored_basis_bytes);
    }
    Ok(())
}
