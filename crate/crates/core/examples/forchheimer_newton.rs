//! RASPEN, SRASPEN and plain Newton on the 1D Forchheimer problem.
//!
//! cargo run --release --example forchheimer_newton -- [subdomains]

use std::sync::Arc;

use ddsolve::decomp::Layout;
use ddsolve::nonlinear_schwarz::{newton_outer, reference_solution, LocalNewtonOptions, NewtonMethod, NewtonOptions, NonlinearProblem, NonlinearSchwarz};
use ddsolve::problems::Forchheimer;

fn main() -> ddsolve::Result<()> {
    let subdomains: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    let problem = Forchheimer::standard(999, 1.0)?;
    let layout = Arc::new(Layout::build(problem.grid(), &[subdomains], 4, &problem.sparsity()?)?);
    println!("N_v = {}, N = {}, N_bar = {}", layout.n_global(), layout.num_subdomains(), layout.skeleton.len());

    let u0 = vec![0.0; problem.size()];
    let exact = reference_solution(&problem, &u0, 1e-14)?;
    let ns = NonlinearSchwarz::new(&problem, layout, LocalNewtonOptions::default())?;
    for method in [NewtonMethod::Raspen, NewtonMethod::Sraspen, NewtonMethod::PlainNewton] {
        let h = newton_outer(&ns, method, &u0, Some(&exact), &NewtonOptions::default())?;
        println!(
            "{:<8} iterations {:>2}  converged {}  avg inner {:.2}  L(n) {}",
            h.method,
            h.iterations(),
            h.converged,
            h.average_inner(),
            h.rows.last().map_or(0, |r| r.cost)
        );
        for r in &h.rows {
            println!("    {:>2} err {:.3e} res {:.3e} I {:>3} Lin {:>2}", r.iter, r.err, r.res, r.inner_iters, r.local_newton_max);
        }
    }
    Ok(())
}
