//! Quick invariant checks on small instances, used by `ddsolve verify`.

use std::sync::Arc;

use serde::Serialize;

use crate::decomp::{build_grid, Layout};
use crate::error::Result;
use crate::linalg::dense::{diff_norm_inf, norm_inf};
use crate::linalg::GmresOptions;
use crate::linear_schwarz::{LinearSchwarz, StationaryOptions, Variant};
use crate::nonlinear_schwarz::{
    newton_outer, reference_solution, LocalNewtonOptions, NewtonMethod, NewtonOptions, NonlinearSchwarz,
};
use crate::problems::{assemble_poisson, Forchheimer, NonlinearDiffusion};
use crate::two_level::{CoarseNewtonOptions, TwoLevel};

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    diff_norm_inf(a, b) / norm_inf(b).max(f64::MIN_POSITIVE)
}

fn layout_checks(out: &mut Vec<Check>) -> Result<()> {
    let g = build_grid(2, &[23, 23], 1.0 / 24.0)?;
    let (a, _) = assemble_poisson(&g);
    let layout = Layout::build(&g, &[3, 3], 2, &a)?;
    let t = &layout.transfer;
    out.push(check(
        "partition_of_unity",
        t.partition_of_unity_holds() && t.restriction_inverts_prolongation(),
        format!("{} subdomains, N̄ = {}", layout.num_subdomains(), layout.skeleton.len()),
    ));
    Ok(())
}

fn linear_checks(out: &mut Vec<Check>) -> Result<()> {
    let g = build_grid(1, &[99], 0.01)?;
    let (a, f) = assemble_poisson(&g);
    let layout = Arc::new(Layout::build(&g, &[5], 2, &a)?);
    let ls = LinearSchwarz::new(a, f, layout)?;
    let n = ls.n_global();
    let u0: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();

    // RAS iterates restricted to the skeleton equal SRAS iterates
    let mut u = ls.ras_step(&u0)?;
    let mut v = ls.layout().skeleton.restrict(&u);
    let mut gap: f64 = 0.0;
    for _ in 0..20 {
        u = ls.ras_step(&u)?;
        v = ls.sras_step(&v)?;
        gap = gap.max(rel(&ls.layout().skeleton.restrict(&u), &v));
    }
    out.push(check("ras_sras_equivalence", gap < 1e-12, format!("max gap {gap:.2e}")));

    let opts = GmresOptions { rtol: 1e-10, maxit: 500, ..Default::default() };
    let nbar = ls.n_skeleton();
    let r = ls.gmres_ras(&u0, &opts)?;
    let s = ls.gmres_sras(&ls.layout().skeleton.restrict(&u0), &opts)?;
    out.push(check(
        "gmres_iteration_bounds",
        r.iterations <= nbar + 1 && s.iterations <= nbar,
        format!("RAS {} ≤ {}, SRAS {} ≤ {}", r.iterations, nbar + 1, s.iterations, nbar),
    ));

    let rep = ls.check_krylov_restriction(&u0, nbar.min(6), 7)?;
    let worst = rep.power_identity_errors.iter().cloned().fold(0.0, f64::max);
    out.push(check(
        "krylov_restriction",
        worst < 1e-10 && rep.spans_equal,
        format!("power identity {worst:.2e}, ranks {} / {}", rep.rank_restricted_volume, rep.rank_substructured),
    ));

    let sol = ls.direct_solve()?;
    let hist = ls.solve_stationary(Variant::Ras, &u0, Some(&sol), &StationaryOptions { rtol: 1e-8, ..Default::default() })?;
    out.push(check("ras_converges", hist.converged, format!("{} iterations", hist.iterations())));
    Ok(())
}

fn nonlinear_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = Forchheimer::standard(199, 1.0)?;
    let pattern = crate::nonlinear_schwarz::NonlinearProblem::sparsity(&p)?;
    let layout = Arc::new(Layout::build(p.grid(), &[4], 3, &pattern)?);
    let ns = NonlinearSchwarz::new(&p, layout, LocalNewtonOptions::default())?;
    let n = ns.n_global();
    let u0 = vec![0.0; n];
    let sol = reference_solution(&p, &u0, 1e-14)?;

    let mut u = ns.nras_step(&u0)?;
    let mut v = ns.layout().skeleton.restrict(&u);
    let mut gap: f64 = 0.0;
    for _ in 0..10 {
        u = ns.nras_step(&u)?;
        v = ns.nsras_step(&v)?;
        gap = gap.max(rel(&ns.layout().skeleton.restrict(&u), &v));
    }
    out.push(check("nras_nsras_equivalence", gap < 1e-9, format!("max gap {gap:.2e}")));

    let opts = NewtonOptions { rtol: 1e-10, keep_iterates: true, ..Default::default() };
    let r = newton_outer(&ns, NewtonMethod::Raspen, &u0, Some(&sol), &opts)?;
    let s = newton_outer(&ns, NewtonMethod::Sraspen, &u0, Some(&sol), &opts)?;
    let mut igap: f64 = 0.0;
    for (x, y) in r.iterates.iter().zip(&s.iterates) {
        igap = igap.max(rel(&ns.layout().skeleton.restrict(x), y));
    }
    out.push(check(
        "raspen_sraspen_iterates",
        r.converged && s.converged && r.iterations() == s.iterations() && igap < 1e-6,
        format!("{} / {} iterations, max gap {igap:.2e}", r.iterations(), s.iterations()),
    ));
    out.push(check(
        "cost_identity",
        r.cost_identity_holds() && s.cost_identity_holds(),
        format!("L(n) = {} / {}", r.rows.last().map_or(0, |x| x.cost), s.rows.last().map_or(0, |x| x.cost)),
    ));
    Ok(())
}

fn two_level_checks(out: &mut Vec<Check>) -> Result<()> {
    let p = NonlinearDiffusion::new(15)?;
    let pattern = crate::nonlinear_schwarz::NonlinearProblem::sparsity(&p)?;
    let layout = Arc::new(Layout::build(p.grid(), &[2, 2], 2, &pattern)?);
    let ns = NonlinearSchwarz::new(&p, layout, LocalNewtonOptions::default())?;
    let tl = TwoLevel::new(&ns, CoarseNewtonOptions::default())?;
    let sol = reference_solution(&p, &vec![0.0; ns.n_global()], 1e-14)?;

    let c = tl.fas_correction_volume(&sol, None)?;
    let (cs, _) = tl.fas_correction_substructured(&ns.layout().skeleton.restrict(&sol), None)?;
    let worst = norm_inf(&c.correction).max(norm_inf(&cs.correction));
    out.push(check("fas_consistency", worst < 1e-10, format!("‖C₀(u*)‖ = {worst:.2e}")));

    let u: Vec<f64> = sol.iter().enumerate().map(|(i, x)| x + 0.1 * ((i % 5) as f64 - 2.0)).collect();
    let a = tl.two_level_raspen_residual(&u)?;
    let b = tl.two_level_raspen_residual_corrections(&u)?;
    let v = ns.layout().skeleton.restrict(&u);
    let c2 = tl.two_level_sraspen_residual(&v)?;
    let d = tl.two_level_sraspen_residual_corrections(&v)?;
    let gap = diff_norm_inf(&a, &b).max(diff_norm_inf(&c2, &d));
    out.push(check("two_level_residual_forms", gap < 1e-9, format!("max gap {gap:.2e}")));
    Ok(())
}

/// Runs every check. Errors inside a group become failed checks.
pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    let groups: [(&'static str, fn(&mut Vec<Check>) -> Result<()>); 4] = [
        ("layout", layout_checks),
        ("linear", linear_checks),
        ("nonlinear", nonlinear_checks),
        ("two_level", two_level_checks),
    ];
    for (name, f) in groups {
        if let Err(e) = f(&mut out) {
            out.push(check(name, false, format!("error: {e}")));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
