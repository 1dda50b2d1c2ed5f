//! Subdomain solution operators `G_j` and their linearizations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::{Layout, SubdomainMap};
use crate::error::{DdError, Result};
use crate::linalg::dense::{norm2, norm_inf};
use crate::linalg::{CsrMatrix, LuFactor};

use super::NonlinearProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LocalNewtonOptions {
    /// Stop when the Newton step is below `tol (1 + ‖w‖∞)` or the local residual
    /// has dropped by `tol` relative to `1 +` its value at the starting guess.
    pub tol: f64,
    pub max_iter: usize,
    /// Start from `R_j u` (default) instead of zero.
    pub warm_start: bool,
    /// Step halvings tried when a full Newton step does not reduce the residual.
    pub max_halvings: usize,
}

impl Default for LocalNewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 200, warm_start: true, max_halvings: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalSolveReport {
    pub subdomain: usize,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Damped Newton for `R_j F(P_j w + (I − P_j R_j) u) = 0`.
pub fn local_newton(
    problem: &dyn NonlinearProblem,
    map: &SubdomainMap,
    j: usize,
    u: &[f64],
    guess: Option<&[f64]>,
    opts: &LocalNewtonOptions,
) -> Result<(Vec<f64>, LocalSolveReport)> {
    let idx = map.indices();
    let len = idx.len();
    let mut r = vec![0.0; len];
    let mut state = u.to_vec();
    let mut w = match guess {
        Some(g) => g.to_vec(),
        None if opts.warm_start => map.restrict(u),
        None => vec![0.0; len],
    };
    map.replace_into(&w, &mut state);
    problem.residual_rows(&state, idx, &mut r)?;
    let mut rn = norm_inf(&r);
    let target = opts.tol * (1.0 + rn);
    let mut iterations = 0;
    let mut trial_r = vec![0.0; len];
    let mut trial_w = vec![0.0; len];
    loop {
        if rn <= target {
            break;
        }
        if iterations == opts.max_iter {
            return Err(DdError::LocalSolveFailed { subdomain: j, iterations, residual: rn });
        }
        let jac = problem.jacobian_rows(&state, idx)?.select_columns(map.local_of(), len);
        let mut delta = r.clone();
        LuFactor::factor_csr(&jac)?.solve_in_place(&mut delta)?;
        iterations += 1;

        // backtracking on ‖r‖₂, for which the Newton direction is a descent direction
        let merit = norm2(&r);
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut full_step: Option<(Vec<f64>, Vec<f64>)> = None;
        for _ in 0..=opts.max_halvings {
            for ((t, wi), d) in trial_w.iter_mut().zip(&w).zip(&delta) {
                *t = wi - alpha * d;
            }
            map.replace_into(&trial_w, &mut state);
            let ok = problem.residual_rows(&state, idx, &mut trial_r).is_ok();
            let tn = norm2(&trial_r);
            if ok && tn.is_finite() {
                if alpha == 1.0 {
                    full_step = Some((trial_w.clone(), trial_r.clone()));
                }
                if tn <= (1.0 - 1e-4 * alpha) * merit {
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            // no decrease along the Newton direction: keep the plain Newton step
            let Some((fw, fr)) = full_step else {
                return Err(DdError::LocalSolveFailed { subdomain: j, iterations, residual: rn });
            };
            trial_w = fw;
            trial_r = fr;
            map.replace_into(&trial_w, &mut state);
            alpha = 1.0;
        }
        let full = alpha == 1.0;
        let step = norm_inf(&delta);
        std::mem::swap(&mut w, &mut trial_w);
        std::mem::swap(&mut r, &mut trial_r);
        rn = norm_inf(&r);
        if full && step <= opts.tol * (1.0 + norm_inf(&w)) {
            break;
        }
    }
    Ok((w, LocalSolveReport { subdomain: j, iterations, residual: rn, converged: true }))
}

/// Result of one parallel sweep of subdomain solves at a volume state `u`.
#[derive(Debug, Clone)]
pub struct Sweep {
    pub base: Vec<f64>,
    /// `G_j(u)` for every subdomain.
    pub local: Vec<Vec<f64>>,
    pub reports: Vec<LocalSolveReport>,
}

impl Sweep {
    pub fn run(
        problem: &dyn NonlinearProblem,
        layout: &Layout,
        u: &[f64],
        guesses: Option<&[Vec<f64>]>,
        opts: &LocalNewtonOptions,
    ) -> Result<Self> {
        let maps = layout.transfer.subdomains();
        let solved = maps
            .par_iter()
            .enumerate()
            .map(|(j, m)| local_newton(problem, m, j, u, guesses.map(|g| g[j].as_slice()), opts))
            .collect::<Result<Vec<_>>>()?;
        let (local, reports) = solved.into_iter().unzip();
        Ok(Self { base: u.to_vec(), local, reports })
    }

    /// `Σ P̃_j G_j(u)`.
    pub fn combined(&self, layout: &Layout) -> Vec<f64> {
        let mut out = vec![0.0; self.base.len()];
        for (m, w) in layout.transfer.subdomains().iter().zip(&self.local) {
            m.restricted_prolong_add(w, &mut out);
        }
        out
    }

    /// `u^{(j)} = P_j G_j(u) + (I − P_j R_j) u`.
    pub fn state(&self, layout: &Layout, j: usize) -> Vec<f64> {
        let mut s = self.base.clone();
        layout.transfer.subdomain(j).replace_into(&self.local[j], &mut s);
        s
    }

    pub fn max_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).max().unwrap_or(0)
    }

    pub fn total_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).sum()
    }
}

/// Factored `R_j J(u^{(j)}) P_j` together with the rows `R_j J(u^{(j)})`.
pub struct LocalJacobians {
    rows: Vec<CsrMatrix>,
    factors: Vec<LuFactor>,
}

impl LocalJacobians {
    pub fn at_sweep(problem: &dyn NonlinearProblem, layout: &Layout, sweep: &Sweep) -> Result<Self> {
        let built = (0..layout.num_subdomains())
            .into_par_iter()
            .map(|j| {
                let m = layout.transfer.subdomain(j);
                let rows = problem.jacobian_rows(&sweep.state(layout, j), m.indices())?;
                let lu = LuFactor::factor_csr(&rows.select_columns(m.local_of(), m.len()))?;
                Ok((rows, lu))
            })
            .collect::<Result<Vec<_>>>()?;
        let (rows, factors) = built.into_iter().unzip();
        Ok(Self { rows, factors })
    }

    /// First-order change of every `G_j` along the volume direction `d`:
    /// `R_j d − (R_j J P_j)⁻¹ R_j J d`.
    pub fn local_derivatives(&self, layout: &Layout, d: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.rows
            .par_iter()
            .zip(self.factors.par_iter())
            .zip(layout.transfer.subdomains().par_iter())
            .map(|((rows, lu), m)| {
                let mut b = rows.matvec(d)?;
                lu.solve_in_place(&mut b)?;
                Ok(m.restrict(d).iter().zip(&b).map(|(x, y)| x - y).collect())
            })
            .collect()
    }

    /// `Σ P̃_j (R_j J P_j)⁻¹ R_j J w`.
    pub fn apply(&self, layout: &Layout, w: &[f64]) -> Result<Vec<f64>> {
        let sols = self
            .rows
            .par_iter()
            .zip(self.factors.par_iter())
            .map(|(rows, lu)| {
                let mut b = rows.matvec(w)?;
                lu.solve_in_place(&mut b)?;
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![0.0; w.len()];
        for (m, x) in layout.transfer.subdomains().iter().zip(&sols) {
            m.restricted_prolong_add(x, &mut out);
        }
        Ok(out)
    }
}
