//! Outer Newton driver shared by plain Newton, RASPEN, SRASPEN and the
//! two-level variants.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, DdError, Result};
use crate::history::{relative_error, CounterSnapshot, NewtonRow, OuterNewtonHistory};
use crate::linalg::dense::{norm2, norm_inf};
use crate::linalg::{gmres, stored_basis_bytes, DenseLU, FnOperator, GmresOptions};

/// Residual of a nonlinear system at one point, plus what its linearization needs.
pub struct Evaluation<C> {
    pub residual: Vec<f64>,
    /// Volume approximation associated with the point (used for errors).
    pub volume: Vec<f64>,
    /// Largest local Newton count over the subdomains (0 when there are none).
    pub local_newton_max: usize,
    pub coarse_newton_iters: Option<usize>,
    pub cache: C,
}

/// Jacobian of a system at a point.
pub trait Linearization: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, w: &[f64]) -> Result<Vec<f64>>;

    /// Direct solve when the system has a cheaper path than dense assembly.
    fn solve_direct(&self, _rhs: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Dense matrix assembled from `dim` matvecs.
    fn assemble(&self) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            let col = self.apply(&e)?;
            e[c] = 0.0;
            for (r, v) in col.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }
}

pub trait NewtonSystem: Sync {
    type Cache: Send + Sync;

    fn dim(&self) -> usize;
    fn evaluate(&self, x: &[f64]) -> Result<Evaluation<Self::Cache>>;
    fn linearize<'s>(&'s self, x: &'s [f64], eval: &'s Evaluation<Self::Cache>) -> Result<Box<dyn Linearization + 's>>;
    fn counters(&self) -> CounterSnapshot;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum JacobianSolver {
    /// Sparse direct solve when available, otherwise dense assembly and LU.
    Direct,
    Gmres { rtol: f64, maxit: usize },
}

impl Default for JacobianSolver {
    fn default() -> Self {
        Self::Gmres { rtol: 1e-12, maxit: 1000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineSearch {
    /// Always take the full step.
    None,
    /// Halve only when the residual cannot be evaluated or is not finite.
    Fallback,
    /// Backtracking with the Armijo condition on `‖residual‖₂`.
    Armijo,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NewtonOptions {
    /// Relative error (with a reference) or relative residual target.
    pub rtol: f64,
    pub maxit: usize,
    pub solver: JacobianSolver,
    pub line_search: LineSearch,
    pub max_halvings: usize,
    pub keep_iterates: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            maxit: 50,
            solver: JacobianSolver::default(),
            line_search: LineSearch::Fallback,
            max_halvings: 30,
            keep_iterates: false,
        }
    }
}

/// Errors that end an outer iteration as divergence rather than as a failure.
fn is_breakdown(e: &DdError) -> bool {
    matches!(
        e,
        DdError::NonFinite | DdError::SingularMatrix { .. } | DdError::LocalSolveFailed { .. } | DdError::CoarseSolveFailed { .. }
    )
}

/// Newton's method on `system` from `x0`. Each row `k ≥ 1` records the iterate
/// `x_k`, the inner iterations `I(k)` of the update producing it and the local
/// Newton depth `L_in^k` of the residual evaluation at `x_{k−1}`.
pub fn newton_solve<S: NewtonSystem>(
    name: &str,
    system: &S,
    x0: &[f64],
    reference: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<OuterNewtonHistory> {
    let n = system.dim();
    check_len(n, x0.len())?;
    let clock = Instant::now();
    let start = system.counters();
    let mut hist = OuterNewtonHistory::new(name);
    let mut x = x0.to_vec();
    let mut eval = system.evaluate(&x)?;
    let res0 = norm_inf(&eval.residual);
    let err_of = |e: &Evaluation<S::Cache>| reference.map_or(f64::NAN, |r| relative_error(&e.volume, r));
    let done = |e: &Evaluation<S::Cache>, err: f64| {
        let res = norm_inf(&e.residual);
        match reference {
            Some(_) => err <= opts.rtol || res == 0.0,
            None => res <= opts.rtol * res0,
        }
    };
    let mut err = err_of(&eval);
    let mut cost = 0;
    hist.rows.push(NewtonRow {
        iter: 0,
        err,
        res: res0,
        inner_iters: 0,
        local_newton_max: 0,
        cost: 0,
        wall_ms: clock.elapsed().as_secs_f64() * 1e3,
        coarse_newton_iters: eval.coarse_newton_iters,
    });
    if opts.keep_iterates {
        hist.iterates.push(x.clone());
    }
    let mut converged = done(&eval, err);
    for k in 1..=opts.maxit {
        if converged {
            break;
        }
        let rhs: Vec<f64> = eval.residual.iter().map(|v| -v).collect();
        let step = {
            let lin = match system.linearize(&x, &eval) {
                Ok(l) => l,
                Err(e) if is_breakdown(&e) => {
                    hist.diverged = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            match opts.solver {
                JacobianSolver::Gmres { rtol, maxit } => {
                    let op = FnOperator::new(n, |w: &[f64], y: &mut [f64]| {
                        y.copy_from_slice(&lin.apply(w)?);
                        Ok(())
                    });
                    let g = gmres(&op, &rhs, &vec![0.0; n], &GmresOptions { rtol, maxit, ..Default::default() })?;
                    hist.max_basis_bytes = hist.max_basis_bytes.max(stored_basis_bytes(n, g.iterations));
                    (g.solution, g.iterations)
                }
                JacobianSolver::Direct => match lin.solve_direct(&rhs) {
                    Some(s) => (s?, 1),
                    None => (DenseLU::factor(&lin.assemble()?)?.solve(&rhs)?, n),
                },
            }
        };
        let (delta, inner) = step;
        let local = eval.local_newton_max;

        let rn = norm2(&eval.residual);
        let mut alpha = 1.0;
        let mut next = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
            match system.evaluate(&trial) {
                Ok(e) => {
                    let tn = norm2(&e.residual);
                    let accept = match opts.line_search {
                        LineSearch::None => true,
                        LineSearch::Fallback => tn.is_finite(),
                        LineSearch::Armijo => tn.is_finite() && tn <= (1.0 - 1e-4 * alpha) * rn,
                    };
                    if accept {
                        next = Some((trial, e));
                        break;
                    }
                }
                Err(e) if is_breakdown(&e) => {
                    if opts.line_search == LineSearch::None {
                        break;
                    }
                }
                Err(e) => return Err(e),
            }
            alpha *= 0.5;
        }
        let Some((xn, en)) = next else {
            hist.diverged = true;
            break;
        };
        x = xn;
        eval = en;
        err = err_of(&eval);
        cost += local + inner;
        hist.rows.push(NewtonRow {
            iter: k,
            err,
            res: norm_inf(&eval.residual),
            inner_iters: inner,
            local_newton_max: local,
            cost,
            wall_ms: clock.elapsed().as_secs_f64() * 1e3,
            coarse_newton_iters: eval.coarse_newton_iters,
        });
        if opts.keep_iterates {
            hist.iterates.push(x.clone());
        }
        if !norm_inf(&eval.residual).is_finite() {
            hist.diverged = true;
            break;
        }
        converged = done(&eval, err);
    }
    hist.converged = converged;
    let c = system.counters();
    hist.counters = CounterSnapshot {
        raw_solves: c.raw_solves - start.raw_solves,
        parallel_rounds: c.parallel_rounds - start.parallel_rounds,
    };
    hist.solution = eval.volume;
    Ok(hist)
}
