//! Nonlinear RAS/SRAS, the RASPEN/SRASPEN fixed-point residuals with their
//! exact Jacobians, and the outer Newton driver.

mod local;
mod newton;
mod problem;

use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::decomp::Layout;
use crate::error::{check_len, DdError, Result};
use crate::history::{relative_error, ConvergenceHistory, CounterSnapshot, HistoryRow, OuterNewtonHistory, SolveCounters};
use crate::linalg::{CsrMatrix, LuFactor};
use crate::linear_schwarz::{StationaryOptions, StopMode, Variant};

pub use local::{local_newton, LocalJacobians, LocalNewtonOptions, LocalSolveReport, Sweep};
pub use newton::{newton_solve, Evaluation, JacobianSolver, LineSearch, Linearization, NewtonOptions, NewtonSystem};
pub use problem::{LinearProblem, NonlinearProblem};

/// Error growth factor after which a stationary iteration is declared divergent.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// A nonlinear problem on an overlapping layout with instrumented local solves.
pub struct NonlinearSchwarz<'p> {
    problem: &'p dyn NonlinearProblem,
    layout: Arc<Layout>,
    opts: LocalNewtonOptions,
    counters: SolveCounters,
}

impl<'p> NonlinearSchwarz<'p> {
    pub fn new(problem: &'p dyn NonlinearProblem, layout: Arc<Layout>, opts: LocalNewtonOptions) -> Result<Self> {
        check_len(layout.n_global(), problem.size())?;
        Ok(Self { problem, layout, opts, counters: SolveCounters::default() })
    }

    pub fn problem(&self) -> &'p dyn NonlinearProblem {
        self.problem
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn layout_arc(&self) -> Arc<Layout> {
        self.layout.clone()
    }

    pub fn options(&self) -> &LocalNewtonOptions {
        &self.opts
    }

    pub fn counters(&self) -> &SolveCounters {
        &self.counters
    }

    pub fn n_global(&self) -> usize {
        self.layout.n_global()
    }

    pub fn n_skeleton(&self) -> usize {
        self.layout.skeleton.len()
    }

    /// `G_j(u)` from `guess` (`R_j u` unless disabled).
    pub fn local_solve(&self, j: usize, u: &[f64], guess: Option<&[f64]>) -> Result<(Vec<f64>, LocalSolveReport)> {
        check_len(self.n_global(), u.len())?;
        let out = local_newton(self.problem, self.layout.transfer.subdomain(j), j, u, guess, &self.opts)?;
        self.counters.add(out.1.iterations, out.1.iterations);
        Ok(out)
    }

    /// All `G_j(u)`, solved concurrently. Cost: every local Newton step is a
    /// solve; the parallel depth is the largest local Newton count.
    pub fn sweep(&self, u: &[f64], guesses: Option<&[Vec<f64>]>) -> Result<Sweep> {
        check_len(self.n_global(), u.len())?;
        let s = Sweep::run(self.problem, &self.layout, u, guesses, &self.opts)?;
        self.counters.add(s.total_iterations(), s.max_iterations());
        Ok(s)
    }

    /// `Σ P̃_j G_j(u)`.
    pub fn nras_step(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.sweep(u, None)?.combined(&self.layout))
    }

    /// `Σ Ḡ_j(v) = R̄ Σ P̃_j G_j(P̄ v)`; also returns the volume sweep.
    pub fn nsras_step_with_volume(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.skeleton_sweep(v, None)?;
        let u = s.combined(&self.layout);
        Ok((self.layout.skeleton.restrict(&u), u))
    }

    /// Sweep at `P̄ v`. Interior values of `P̄ v` are zero, so iterations pass
    /// the previous local solutions as `guesses`.
    pub fn skeleton_sweep(&self, v: &[f64], guesses: Option<&[Vec<f64>]>) -> Result<Sweep> {
        let sk = &self.layout.skeleton;
        check_len(sk.len(), v.len())?;
        self.sweep(&sk.extend(v), guesses)
    }

    pub fn nsras_step(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.nsras_step_with_volume(v)?.0)
    }

    /// `𝓕(u) = u − Σ P̃_j G_j(u)` and the sweep behind it.
    pub fn raspen_residual(&self, u: &[f64]) -> Result<(Vec<f64>, Sweep)> {
        self.raspen_residual_from(u, None)
    }

    fn raspen_residual_from(&self, u: &[f64], guesses: Option<&[Vec<f64>]>) -> Result<(Vec<f64>, Sweep)> {
        let s = self.sweep(u, guesses)?;
        let g = s.combined(&self.layout);
        Ok((u.iter().zip(&g).map(|(a, b)| a - b).collect(), s))
    }

    /// `𝓕̄(v) = v − R̄ Σ P̃_j G_j(P̄ v)` and the sweep behind it.
    pub fn sraspen_residual(&self, v: &[f64]) -> Result<(Vec<f64>, Sweep)> {
        self.sraspen_residual_from(v, None)
    }

    fn sraspen_residual_from(&self, v: &[f64], guesses: Option<&[Vec<f64>]>) -> Result<(Vec<f64>, Sweep)> {
        let sk = &self.layout.skeleton;
        check_len(sk.len(), v.len())?;
        let s = self.sweep(&sk.extend(v), guesses)?;
        let g = sk.restrict(&s.combined(&self.layout));
        Ok((v.iter().zip(&g).map(|(a, b)| a - b).collect(), s))
    }

    /// Factors the local Jacobians at the states of `sweep`.
    pub fn local_jacobians(&self, sweep: &Sweep) -> Result<LocalJacobians> {
        LocalJacobians::at_sweep(self.problem, &self.layout, sweep)
    }

    /// `J_𝓕 w = Σ P̃_j (R_j J(u^{(j)}) P_j)⁻¹ R_j J(u^{(j)}) w`.
    pub fn raspen_jacobian_apply(&self, jac: &LocalJacobians, w: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_global(), w.len())?;
        let out = jac.apply(&self.layout, w)?;
        self.counters.add(self.layout.num_subdomains(), 1);
        Ok(out)
    }

    /// `J_𝓕̄ w = R̄ J_𝓕(P̄ v) P̄ w`, with `jac` taken from the sweep at `P̄ v`.
    pub fn sraspen_jacobian_apply(&self, jac: &LocalJacobians, w: &[f64]) -> Result<Vec<f64>> {
        let sk = &self.layout.skeleton;
        check_len(sk.len(), w.len())?;
        Ok(sk.restrict(&self.raspen_jacobian_apply(jac, &sk.extend(w))?))
    }

    /// Dense `N̄ × N̄` substructured Jacobian, one parallel round per column.
    pub fn sraspen_jacobian(&self, jac: &LocalJacobians) -> Result<DMatrix<f64>> {
        let nb = self.n_skeleton();
        let mut m = DMatrix::zeros(nb, nb);
        let mut e = vec![0.0; nb];
        for c in 0..nb {
            e[c] = 1.0;
            let col = self.sraspen_jacobian_apply(jac, &e)?;
            e[c] = 0.0;
            for (r, v) in col.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }

    /// Nonlinear RAS (from `initial` of length `N_v`) or SRAS (length `N̄`).
    /// Errors of SRAS iterates are measured on the volume sweep producing them.
    pub fn solve_stationary(
        &self,
        variant: Variant,
        initial: &[f64],
        reference: Option<&[f64]>,
        opts: &StationaryOptions,
    ) -> Result<ConvergenceHistory> {
        let sk = &self.layout.skeleton;
        let name = match variant {
            Variant::Ras => "nras",
            Variant::Sras => "nsras",
        };
        let mut previous: Option<Vec<Vec<f64>>> = None;
        let step = |x: &[f64]| -> Result<StepOutcome> {
            let (next, volume) = match variant {
                Variant::Ras => {
                    let u = self.nras_step(x)?;
                    (u.clone(), u)
                }
                Variant::Sras => {
                    let s = self.skeleton_sweep(x, previous.as_deref())?;
                    let u = s.combined(&self.layout);
                    if self.opts.warm_start {
                        previous = Some(s.local);
                    }
                    (sk.restrict(&u), u)
                }
            };
            Ok(StepOutcome { next, volume, coarse_newton_iters: None })
        };
        let init_volume = match variant {
            Variant::Ras => {
                check_len(self.n_global(), initial.len())?;
                initial.to_vec()
            }
            Variant::Sras => {
                check_len(sk.len(), initial.len())?;
                sk.extend(initial)
            }
        };
        let initial_err = match (variant, reference) {
            (_, None) => f64::NAN,
            (Variant::Ras, Some(r)) => relative_error(initial, r),
            (Variant::Sras, Some(r)) => relative_error(initial, &sk.restrict(r)),
        };
        stationary_loop(name, &self.counters, initial, init_volume, initial_err, reference, opts, step, |u| {
            self.problem.residual(u)
        })
    }
}

/// One stationary step: the new iterate, its volume representative and the
/// coarse Newton iterations spent on it (two-level methods only).
pub(crate) struct StepOutcome {
    pub next: Vec<f64>,
    pub volume: Vec<f64>,
    pub coarse_newton_iters: Option<usize>,
}

/// Shared loop of the stationary nonlinear iterations (one and two levels).
#[allow(clippy::too_many_arguments)]
pub(crate) fn stationary_loop(
    name: &str,
    counters: &SolveCounters,
    initial: &[f64],
    init_volume: Vec<f64>,
    initial_err: f64,
    reference: Option<&[f64]>,
    opts: &StationaryOptions,
    mut step: impl FnMut(&[f64]) -> Result<StepOutcome>,
    residual: impl Fn(&[f64]) -> Result<Vec<f64>>,
) -> Result<ConvergenceHistory> {
    if opts.mode == StopMode::Error && reference.is_none() {
        return Err(DdError::InvalidArgument("error-mode stopping needs a reference solution".into()));
    }
    let norm = crate::linalg::dense::norm_inf;
    let start = counters.snapshot();
    let mut hist = ConvergenceHistory::new(name);
    let res0 = norm(&residual(&init_volume)?);
    let rel_res = |r: f64| if res0 > 0.0 { r / res0 } else { r };
    let mut err = initial_err;
    let mut res = rel_res(res0);
    let push = |hist: &mut ConvergenceHistory, it: usize, err: f64, res: f64, coarse: Option<usize>| {
        let c = counters.snapshot();
        hist.rows.push(HistoryRow {
            iter: it,
            err,
            res,
            cum_solves: c.raw_solves - start.raw_solves,
            cum_parallel_rounds: c.parallel_rounds - start.parallel_rounds,
            basis_bytes: 0,
            coarse_newton_iters: coarse,
        });
    };
    push(&mut hist, 0, err, res, None);
    let mut x = initial.to_vec();
    let mut volume = init_volume;
    if opts.keep_iterates {
        hist.iterates.push(x.clone());
    }
    let value = |e: f64, r: f64| if opts.mode == StopMode::Error { e } else { r };
    let mut it = 0;
    while value(err, res) > opts.rtol && it < opts.maxit {
        it += 1;
        let out = match step(&x) {
            Ok(s) => s,
            Err(DdError::LocalSolveFailed { .. } | DdError::NonFinite | DdError::CoarseSolveFailed { .. }) => {
                hist.diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        x = out.next;
        volume = out.volume;
        err = reference.map_or(f64::NAN, |r| relative_error(&volume, r));
        res = rel_res(norm(&residual(&volume)?));
        push(&mut hist, it, err, res, out.coarse_newton_iters);
        if opts.keep_iterates {
            hist.iterates.push(x.clone());
        }
        let grow = if opts.mode == StopMode::Error { err / initial_err.max(f64::MIN_POSITIVE) } else { res };
        if !grow.is_finite() || grow > DIVERGENCE_FACTOR {
            hist.diverged = true;
            break;
        }
    }
    hist.converged = !hist.diverged && value(err, res) <= opts.rtol;
    hist.solution = volume;
    Ok(hist)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NewtonMethod {
    Raspen,
    Sraspen,
    PlainNewton,
}

/// Newton on `𝓕(u) = 0`.
pub struct RaspenSystem<'a, 'p> {
    ns: &'a NonlinearSchwarz<'p>,
}

impl<'a, 'p> RaspenSystem<'a, 'p> {
    pub fn new(ns: &'a NonlinearSchwarz<'p>) -> Self {
        Self { ns }
    }
}

struct VolumeJacobian<'a, 'p> {
    ns: &'a NonlinearSchwarz<'p>,
    jac: LocalJacobians,
}

impl Linearization for VolumeJacobian<'_, '_> {
    fn dim(&self) -> usize {
        self.ns.n_global()
    }

    fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.ns.raspen_jacobian_apply(&self.jac, w)
    }
}

struct SkeletonJacobian<'a, 'p> {
    ns: &'a NonlinearSchwarz<'p>,
    jac: Arc<LocalJacobians>,
}

impl Linearization for SkeletonJacobian<'_, '_> {
    fn dim(&self) -> usize {
        self.ns.n_skeleton()
    }

    fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.ns.sraspen_jacobian_apply(&self.jac, w)
    }
}

impl NewtonSystem for RaspenSystem<'_, '_> {
    type Cache = Sweep;

    fn dim(&self) -> usize {
        self.ns.n_global()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation<Sweep>> {
        let (residual, sweep) = self.ns.raspen_residual(x)?;
        Ok(Evaluation {
            residual,
            volume: x.to_vec(),
            local_newton_max: sweep.max_iterations(),
            coarse_newton_iters: None,
            cache: sweep,
        })
    }

    fn linearize<'s>(&'s self, _x: &'s [f64], eval: &'s Evaluation<Sweep>) -> Result<Box<dyn Linearization + 's>> {
        Ok(Box::new(VolumeJacobian { ns: self.ns, jac: self.ns.local_jacobians(&eval.cache)? }))
    }

    fn counters(&self) -> CounterSnapshot {
        self.ns.counters.snapshot()
    }
}

/// Newton on `𝓕̄(v) = 0`. With warm starts enabled the local solves start
/// from the last local solutions, moved to first order along the change of
/// `v` once a linearization is available.
pub struct SraspenSystem<'a, 'p> {
    ns: &'a NonlinearSchwarz<'p>,
    previous: Mutex<Option<LocalPredictor>>,
}

struct LocalPredictor {
    base: Vec<f64>,
    local: Vec<Vec<f64>>,
    jac: Option<Arc<LocalJacobians>>,
}

impl<'a, 'p> SraspenSystem<'a, 'p> {
    pub fn new(ns: &'a NonlinearSchwarz<'p>) -> Self {
        Self { ns, previous: Mutex::new(None) }
    }

    fn guesses(&self, v: &[f64]) -> Result<Option<Vec<Vec<f64>>>> {
        let prev = self.previous.lock().expect("poisoned");
        let Some(p) = prev.as_ref() else { return Ok(None) };
        let Some(jac) = &p.jac else { return Ok(Some(p.local.clone())) };
        let dv: Vec<f64> = v.iter().zip(&p.base).map(|(a, b)| a - b).collect();
        let d = self.ns.layout.skeleton.extend(&dv);
        let dg = jac.local_derivatives(&self.ns.layout, &d)?;
        let n = self.ns.layout.num_subdomains();
        self.ns.counters.add(n, 1);
        Ok(Some(p.local.iter().zip(dg).map(|(g, e)| g.iter().zip(&e).map(|(a, b)| a + b).collect()).collect()))
    }
}

impl NewtonSystem for SraspenSystem<'_, '_> {
    type Cache = Sweep;

    fn dim(&self) -> usize {
        self.ns.n_skeleton()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation<Sweep>> {
        let warm = self.ns.opts.warm_start;
        let guesses = if warm { self.guesses(x)? } else { None };
        let (residual, sweep) = self.ns.sraspen_residual_from(x, guesses.as_deref())?;
        if warm {
            let mut prev = self.previous.lock().expect("poisoned");
            if prev.as_ref().is_none_or(|p| p.jac.is_none()) {
                *prev = Some(LocalPredictor { base: x.to_vec(), local: sweep.local.clone(), jac: None });
            }
        }
        Ok(Evaluation {
            residual,
            volume: sweep.combined(&self.ns.layout),
            local_newton_max: sweep.max_iterations(),
            coarse_newton_iters: None,
            cache: sweep,
        })
    }

    fn linearize<'s>(&'s self, x: &'s [f64], eval: &'s Evaluation<Sweep>) -> Result<Box<dyn Linearization + 's>> {
        let jac = Arc::new(self.ns.local_jacobians(&eval.cache)?);
        if self.ns.opts.warm_start {
            *self.previous.lock().expect("poisoned") =
                Some(LocalPredictor { base: x.to_vec(), local: eval.cache.local.clone(), jac: Some(jac.clone()) });
        }
        Ok(Box::new(SkeletonJacobian { ns: self.ns, jac }))
    }

    fn counters(&self) -> CounterSnapshot {
        self.ns.counters.snapshot()
    }
}

/// Newton on `F(u) = 0` with the global Jacobian.
pub struct PlainNewtonSystem<'p> {
    problem: &'p dyn NonlinearProblem,
    counters: SolveCounters,
}

impl<'p> PlainNewtonSystem<'p> {
    pub fn new(problem: &'p dyn NonlinearProblem) -> Self {
        Self { problem, counters: SolveCounters::default() }
    }
}

struct GlobalJacobian<'a> {
    j: CsrMatrix,
    counters: &'a SolveCounters,
}

impl Linearization for GlobalJacobian<'_> {
    fn dim(&self) -> usize {
        self.j.nrows()
    }

    fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.j.matvec(w)
    }

    fn solve_direct(&self, rhs: &[f64]) -> Option<Result<Vec<f64>>> {
        self.counters.add(1, 1);
        Some(LuFactor::factor_csr(&self.j).and_then(|lu| lu.solve(rhs)))
    }
}

impl NewtonSystem for PlainNewtonSystem<'_> {
    type Cache = ();

    fn dim(&self) -> usize {
        self.problem.size()
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation<()>> {
        Ok(Evaluation {
            residual: self.problem.residual(x)?,
            volume: x.to_vec(),
            local_newton_max: 0,
            coarse_newton_iters: None,
            cache: (),
        })
    }

    fn linearize<'s>(&'s self, x: &'s [f64], _eval: &'s Evaluation<()>) -> Result<Box<dyn Linearization + 's>> {
        Ok(Box::new(GlobalJacobian { j: self.problem.jacobian(x)?, counters: &self.counters }))
    }

    fn counters(&self) -> CounterSnapshot {
        self.counters.snapshot()
    }
}

/// Runs `method` from the volume guess `u0` (restricted to the skeleton for SRASPEN).
pub fn newton_outer(
    ns: &NonlinearSchwarz<'_>,
    method: NewtonMethod,
    u0: &[f64],
    reference: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<OuterNewtonHistory> {
    check_len(ns.n_global(), u0.len())?;
    match method {
        NewtonMethod::Raspen => newton_solve("raspen", &RaspenSystem::new(ns), u0, reference, opts),
        NewtonMethod::Sraspen => {
            let v0 = ns.layout.skeleton.restrict(u0);
            newton_solve("sraspen", &SraspenSystem::new(ns), &v0, reference, opts)
        }
        // the global Jacobian is unpreconditioned, so it is always factored directly
        NewtonMethod::PlainNewton => {
            let opts = NewtonOptions { solver: JacobianSolver::Direct, ..*opts };
            newton_solve("newton", &PlainNewtonSystem::new(ns.problem), u0, reference, &opts)
        }
    }
}

/// Discrete solution of `F(u) = 0` by Newton with direct solves and Armijo
/// backtracking, iterated until the update stalls at rounding level.
pub fn reference_solution(problem: &dyn NonlinearProblem, u0: &[f64], tol: f64) -> Result<Vec<f64>> {
    let norm = crate::linalg::dense::norm_inf;
    let norm2 = crate::linalg::dense::norm2;
    let mut u = u0.to_vec();
    let mut r = problem.residual(&u)?;
    let r0 = norm2(&r);
    for _ in 0..200 {
        let rn = norm2(&r);
        let mut delta = r.clone();
        LuFactor::factor_csr(&problem.jacobian(&u)?)?.solve_in_place(&mut delta)?;
        let step = norm(&delta);
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=40 {
            let trial: Vec<f64> = u.iter().zip(&delta).map(|(a, d)| a - alpha * d).collect();
            if let Ok(tr) = problem.residual(&trial) {
                let tn = norm2(&tr);
                if tn.is_finite() && tn <= (1.0 - 1e-4 * alpha) * rn {
                    accepted = Some((trial, tr));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((nu, nr)) => {
                u = nu;
                r = nr;
            }
            // no further decrease: rounding level reached if the residual is already small
            None if rn <= tol.sqrt() * r0.max(1.0) => return Ok(u),
            None => break,
        }
        if alpha == 1.0 && step <= tol * (1.0 + norm(&u)) {
            return Ok(u);
        }
    }
    Err(DdError::InvalidArgument("reference Newton did not converge".into()))
}
