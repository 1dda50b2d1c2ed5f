//! RASPEN, SRASPEN and plain Newton on the 2D nonlinear diffusion problem
//! started from u⁰ = 1e5.
//!
//! cargo run --release --example nldiffusion_newton -- [subdomains per axis] [overlap layers]

use std::sync::Arc;

use ddsolve::decomp::Layout;
use ddsolve::nonlinear_schwarz::{newton_outer, reference_solution, LocalNewtonOptions, NewtonMethod, NewtonOptions, NonlinearProblem, NonlinearSchwarz};
use ddsolve::problems::NonlinearDiffusion;

fn main() -> ddsolve::Result<()> {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<usize>().ok());
    let per_axis = args.next().flatten().unwrap_or(2);
    let overlap = args.next().flatten().unwrap_or(4);
    let problem = NonlinearDiffusion::new(83)?;
    let layout = Arc::new(Layout::build(problem.grid(), &[per_axis, per_axis], overlap, &problem.sparsity()?)?);
    println!("N_v = {}, N = {}, N_bar = {}", layout.n_global(), layout.num_subdomains(), layout.skeleton.len());

    let u0 = vec![1e5; problem.size()];
    let exact = reference_solution(&problem, &vec![0.0; problem.size()], 1e-14)?;
    let ns = NonlinearSchwarz::new(&problem, layout, LocalNewtonOptions::default())?;
    for method in [NewtonMethod::Raspen, NewtonMethod::Sraspen, NewtonMethod::PlainNewton] {
        let h = newton_outer(&ns, method, &u0, Some(&exact), &NewtonOptions::default())?;
        println!(
            "{:<8} iterations {:>2}  converged {}  avg inner {:.4}  L(n) {}",
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
