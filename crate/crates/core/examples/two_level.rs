//! Two-level nonlinear RAS/SRAS and two-level RASPEN/SRASPEN on the 2D
//! nonlinear diffusion problem, overlap of two layers on each side.
//!
//! cargo run --release --example two_level -- [subdomains per axis]

use std::sync::Arc;

use ddsolve::decomp::Layout;
use ddsolve::linear_schwarz::{StationaryOptions, StopMode, Variant};
use ddsolve::nonlinear_schwarz::{reference_solution, LocalNewtonOptions, NewtonOptions, NonlinearProblem, NonlinearSchwarz};
use ddsolve::problems::NonlinearDiffusion;
use ddsolve::two_level::{newton_two_level, CoarseNewtonOptions, TwoLevel, TwoLevelMethod};

fn main() -> ddsolve::Result<()> {
    let per_axis: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let problem = NonlinearDiffusion::new(83)?;
    let layout = Arc::new(Layout::build(problem.grid(), &[per_axis, per_axis], 2, &problem.sparsity()?)?);
    let ns = NonlinearSchwarz::new(&problem, layout.clone(), LocalNewtonOptions::default())?;
    let tl = TwoLevel::new(&ns, CoarseNewtonOptions::default())?;
    println!(
        "N_v = {}, N = {}, N_bar = {}, coarse volume {}, coarse skeleton {}",
        layout.n_global(),
        layout.num_subdomains(),
        layout.skeleton.len(),
        tl.volume_space().dim(),
        tl.substructured_space().dim()
    );

    let u0 = vec![1e5; problem.size()];
    let exact = reference_solution(&problem, &vec![0.0; problem.size()], 1e-14)?;
    let stat = StationaryOptions { rtol: 1e-10, maxit: 200, mode: StopMode::Error, keep_iterates: false };
    for variant in [Variant::Ras, Variant::Sras] {
        let init = match variant {
            Variant::Ras => u0.clone(),
            Variant::Sras => layout.skeleton.restrict(&u0),
        };
        let h = tl.solve_stationary(variant, &init, Some(&exact), &stat)?;
        println!("{:<9} iterations {:>3}  converged {}  final err {:.2e}", h.method, h.iterations(), h.converged, h.final_error());
    }
    for method in [TwoLevelMethod::Raspen2l, TwoLevelMethod::Sraspen2l] {
        let h = newton_two_level(&tl, method, &u0, Some(&exact), &NewtonOptions::default())?;
        println!(
            "{:<9} iterations {:>3}  converged {}  avg inner {:.2}  L(n) {}",
            h.method,
            h.iterations(),
            h.converged,
            h.average_inner(),
            h.rows.last().map_or(0, |r| r.cost)
        );
        for r in &h.rows {
            println!("    {:>2} err {:.3e} res {:.3e} I {:>3} Lin {:>2} coarse {:?}", r.iter, r.err, r.res, r.inner_iters, r.local_newton_max, r.coarse_newton_iters);
        }
    }
    Ok(())
}
