//! Two-level nonlinear RAS/SRAS with FAS coarse corrections, and Newton on
//! their fixed-point equations (two-level RASPEN/SRASPEN).

mod coarse;

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, DdError, Result};
use crate::history::{relative_error, ConvergenceHistory, CounterSnapshot, OuterNewtonHistory};
use crate::linalg::dense::norm_inf;
use crate::linalg::{CsrMatrix, DenseLU, LuFactor};
use crate::linear_schwarz::{StationaryOptions, Variant};
use crate::nonlinear_schwarz::{
    newton_solve, stationary_loop, Evaluation, Linearization, NewtonOptions, NewtonSystem, NonlinearSchwarz, StepOutcome, Sweep,
};

pub use coarse::{build_substructured_coarse, build_volume_coarse, skeleton_runs, CoarseKind, CoarseSpace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoarseNewtonOptions {
    /// Stop once an update satisfies `‖δ‖∞ ≤ tol (1 + ‖y‖∞)`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoarseNewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_iter: 50 }
    }
}

/// Result of one FAS coarse solve.
#[derive(Debug, Clone)]
pub struct CoarseCorrection {
    /// `C₀ = y − R₀ x`.
    pub correction: Vec<f64>,
    /// Coarse solution `y`.
    pub solution: Vec<f64>,
    pub iterations: usize,
}

/// Starting point for a coarse solve near a previous one: its solution and,
/// in the substructured case, the factored coarse Jacobian there.
#[derive(Clone, Default)]
pub struct CoarseHint {
    solution: Vec<f64>,
    jacobian: Option<Arc<DenseLU>>,
}

/// Chord steps allowed with a reused coarse Jacobian before refactoring.
const CHORD_STEPS: usize = 8;

pub struct TwoLevel<'a, 'p> {
    ns: &'a NonlinearSchwarz<'p>,
    volume: CoarseSpace,
    substructured: CoarseSpace,
    opts: CoarseNewtonOptions,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn coarse_failed(iterations: usize, g: &[f64]) -> DdError {
    DdError::CoarseSolveFailed { iterations, residual: norm_inf(g) }
}

impl<'a, 'p> TwoLevel<'a, 'p> {
    pub fn new(ns: &'a NonlinearSchwarz<'p>, opts: CoarseNewtonOptions) -> Result<Self> {
        let grid = ns.layout().grid();
        let volume = build_volume_coarse(grid)?;
        let substructured = build_substructured_coarse(grid, &ns.layout().skeleton)?;
        Ok(Self { ns, volume, substructured, opts })
    }

    pub fn with_spaces(ns: &'a NonlinearSchwarz<'p>, volume: CoarseSpace, substructured: CoarseSpace, opts: CoarseNewtonOptions) -> Result<Self> {
        check_len(ns.n_global(), volume.n_fine())?;
        check_len(ns.n_skeleton(), substructured.n_fine())?;
        Ok(Self { ns, volume, substructured, opts })
    }

    pub fn schwarz(&self) -> &'a NonlinearSchwarz<'p> {
        self.ns
    }

    pub fn volume_space(&self) -> &CoarseSpace {
        &self.volume
    }

    pub fn substructured_space(&self) -> &CoarseSpace {
        &self.substructured
    }

    /// `F₀(y) = R₀ F(P₀ y)`.
    pub fn coarse_function(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.volume.restrict(&self.ns.problem().residual(&self.volume.prolong(y)?)?)
    }

    /// `J_{F₀}(y) = R₀ J(P₀ y) P₀`.
    pub fn coarse_jacobian(&self, y: &[f64]) -> Result<CsrMatrix> {
        let j = self.ns.problem().jacobian(&self.volume.prolong(y)?)?;
        self.volume.restriction().matmul(&j)?.matmul(self.volume.prolongation())
    }

    /// FAS correction `C₀(u)`: Newton on `F₀(y) = F₀(R₀u) − R₀F(u)` from `R₀u`
    /// (or from `start`), returning `y − R₀u`.
    pub fn fas_correction_volume(&self, u: &[f64], start: Option<&[f64]>) -> Result<CoarseCorrection> {
        check_len(self.ns.n_global(), u.len())?;
        let r0u = self.volume.restrict(u)?;
        let f0 = self.coarse_function(&r0u)?;
        let b = sub(&f0, &self.volume.restrict(&self.ns.problem().residual(u)?)?);
        let (mut y, mut g) = match start {
            Some(s) => {
                check_len(r0u.len(), s.len())?;
                (s.to_vec(), sub(&self.coarse_function(s)?, &b))
            }
            None => (r0u.clone(), sub(&f0, &b)),
        };
        let mut iterations = 0;
        while g.iter().any(|&x| x != 0.0) {
            if iterations == self.opts.max_iter {
                return Err(coarse_failed(iterations, &g));
            }
            let mut delta = g;
            LuFactor::factor_csr(&self.coarse_jacobian(&y)?)?.solve_in_place(&mut delta)?;
            iterations += 1;
            for (yi, d) in y.iter_mut().zip(&delta) {
                *yi -= d;
            }
            if !y.iter().all(|x| x.is_finite()) {
                return Err(DdError::NonFinite);
            }
            g = sub(&self.coarse_function(&y)?, &b);
            if norm_inf(&delta) <= self.opts.tol * (1.0 + norm_inf(&y)) {
                break;
            }
        }
        Ok(CoarseCorrection { correction: sub(&y, &r0u), solution: y, iterations })
    }

    /// `𝓕̄₀(y) = R̄₀ 𝓕̄(P̄₀ y)` with the sweep at `P̄ P̄₀ y`.
    fn sub_coarse_eval(&self, y: &[f64]) -> Result<(Vec<f64>, Sweep)> {
        let (r, s) = self.ns.sraspen_residual(&self.substructured.prolong(y)?)?;
        Ok((self.substructured.restrict(&r)?, s))
    }

    /// `𝓕̄₀(y) = R̄₀ 𝓕̄(P̄₀ y)`; every evaluation is a sweep of fine subdomain solves.
    pub fn sub_coarse_function(&self, y: &[f64]) -> Result<Vec<f64>> {
        Ok(self.sub_coarse_eval(y)?.0)
    }

    /// Dense `R̄₀ J_𝓕̄(P̄₀ y) P̄₀`, one exact Jacobian matvec per coarse column,
    /// with local Jacobians taken from `sweep` (the sweep at `P̄ P̄₀ y`).
    pub fn sub_coarse_jacobian(&self, sweep: &Sweep) -> Result<DMatrix<f64>> {
        let jac = self.ns.local_jacobians(sweep)?;
        let n0 = self.substructured.dim();
        let mut m = DMatrix::zeros(n0, n0);
        let mut e = vec![0.0; n0];
        for c in 0..n0 {
            e[c] = 1.0;
            let col = self.ns.sraspen_jacobian_apply(&jac, &self.substructured.prolong(&e)?)?;
            e[c] = 0.0;
            for (r, v) in self.substructured.restrict(&col)?.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }

    /// Substructured FAS correction `C₀^S(v)`: Newton on
    /// `𝓕̄₀(y) = 𝓕̄₀(R̄₀v) − R̄₀𝓕̄(v)`. A hint starts from a nearby coarse
    /// solution and reuses its Jacobian for a few chord steps.
    pub fn fas_correction_substructured(&self, v: &[f64], hint: Option<&CoarseHint>) -> Result<(CoarseCorrection, CoarseHint)> {
        check_len(self.ns.n_skeleton(), v.len())?;
        let r0v = self.substructured.restrict(v)?;
        let (fv, _) = self.ns.sraspen_residual(v)?;
        let (f0, s0) = self.sub_coarse_eval(&r0v)?;
        let b = sub(&f0, &self.substructured.restrict(&fv)?);
        let (mut y, mut g, mut sweep) = match hint {
            Some(h) if !h.solution.is_empty() => {
                let (fy, s) = self.sub_coarse_eval(&h.solution)?;
                (h.solution.clone(), sub(&fy, &b), s)
            }
            _ => (r0v.clone(), sub(&f0, &b), s0),
        };
        let mut lu = hint.and_then(|h| h.jacobian.clone());
        let mut chord = 0;
        let mut last_step = f64::INFINITY;
        let mut iterations = 0;
        while g.iter().any(|&x| x != 0.0) {
            if iterations == self.opts.max_iter {
                return Err(coarse_failed(iterations, &g));
            }
            let reuse = lu.is_some() && chord < CHORD_STEPS;
            if !reuse {
                lu = Some(Arc::new(DenseLU::factor(&self.sub_coarse_jacobian(&sweep)?)?));
                chord = 0;
            }
            let delta = lu.as_ref().expect("factored above").solve(&g)?;
            iterations += 1;
            let step = norm_inf(&delta);
            if reuse {
                chord += 1;
                // a stale Jacobian that stops contracting is refactored
                if step > 0.5 * last_step {
                    chord = CHORD_STEPS;
                }
            }
            last_step = step;
            for (yi, d) in y.iter_mut().zip(&delta) {
                *yi -= d;
            }
            if !y.iter().all(|x| x.is_finite()) {
                return Err(DdError::NonFinite);
            }
            let (fy, s) = self.sub_coarse_eval(&y)?;
            g = sub(&fy, &b);
            sweep = s;
            if step <= self.opts.tol * (1.0 + norm_inf(&y)) {
                break;
            }
        }
        let hint = CoarseHint { solution: y.clone(), jacobian: lu };
        Ok((CoarseCorrection { correction: sub(&y, &r0v), solution: y, iterations }, hint))
    }

    /// Algorithm 1: coarse FAS correction, then one nonlinear RAS sweep.
    pub fn two_level_nras_step(&self, u: &[f64]) -> Result<(Vec<f64>, usize)> {
        let c = self.fas_correction_volume(u, None)?;
        let half = add(u, &self.volume.prolong(&c.correction)?);
        Ok((self.ns.nras_step(&half)?, c.iterations))
    }

    /// Algorithm 2: substructured FAS correction, then one nonlinear SRAS
    /// sweep. Returns the new skeleton iterate, the volume sweep and the coarse
    /// Newton count.
    pub fn two_level_nsras_step_with_volume(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let (c, _) = self.fas_correction_substructured(v, None)?;
        let half = add(v, &self.substructured.prolong(&c.correction)?);
        let (next, volume) = self.ns.nsras_step_with_volume(&half)?;
        Ok((next, volume, c.iterations))
    }

    pub fn two_level_nsras_step(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.two_level_nsras_step_with_volume(v)?.0)
    }

    /// Two-level nonlinear RAS (initial of length `N_v`) or SRAS (length `N̄`).
    pub fn solve_stationary(
        &self,
        variant: Variant,
        initial: &[f64],
        reference: Option<&[f64]>,
        opts: &StationaryOptions,
    ) -> Result<ConvergenceHistory> {
        let sk = &self.ns.layout().skeleton;
        let (name, init_volume, initial_err) = match variant {
            Variant::Ras => {
                check_len(self.ns.n_global(), initial.len())?;
                ("nras2l", initial.to_vec(), reference.map_or(f64::NAN, |r| relative_error(initial, r)))
            }
            Variant::Sras => {
                check_len(sk.len(), initial.len())?;
                ("nsras2l", sk.extend(initial), reference.map_or(f64::NAN, |r| relative_error(initial, &sk.restrict(r))))
            }
        };
        let step = |x: &[f64]| -> Result<StepOutcome> {
            Ok(match variant {
                Variant::Ras => {
                    let (u, it) = self.two_level_nras_step(x)?;
                    StepOutcome { next: u.clone(), volume: u, coarse_newton_iters: Some(it) }
                }
                Variant::Sras => {
                    let (next, volume, it) = self.two_level_nsras_step_with_volume(x)?;
                    StepOutcome { next, volume, coarse_newton_iters: Some(it) }
                }
            })
        };
        stationary_loop(name, self.ns.counters(), initial, init_volume, initial_err, reference, opts, step, |u| {
            self.ns.problem().residual(u)
        })
    }

    fn raspen2l(&self, u: &[f64], hint: Option<&CoarseHint>) -> Result<TwoLevelEval> {
        let start = hint.map(|h| h.solution.as_slice()).filter(|s| !s.is_empty());
        let c = self.fas_correction_volume(u, start)?;
        let w = add(u, &self.volume.prolong(&c.correction)?);
        let sweep = self.ns.sweep(&w, None)?;
        let g = sweep.combined(self.ns.layout());
        Ok(TwoLevelEval {
            residual: sub(u, &g),
            volume: u.to_vec(),
            coarse: c,
            local_newton_max: sweep.max_iterations(),
            hint: CoarseHint::default(),
        })
    }

    fn sraspen2l(&self, v: &[f64], hint: Option<&CoarseHint>) -> Result<TwoLevelEval> {
        let (c, h) = self.fas_correction_substructured(v, hint)?;
        let half = add(v, &self.substructured.prolong(&c.correction)?);
        let sk = &self.ns.layout().skeleton;
        let sweep = self.ns.sweep(&sk.extend(&half), None)?;
        let volume = sweep.combined(self.ns.layout());
        Ok(TwoLevelEval {
            residual: sub(v, &sk.restrict(&volume)),
            volume,
            coarse: c,
            local_newton_max: sweep.max_iterations(),
            hint: h,
        })
    }

    /// `𝓕_2L(u) = u − Σ P̃_j G_j(u + P₀C₀(u))`.
    pub fn two_level_raspen_residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ns.n_global(), u.len())?;
        Ok(self.raspen2l(u, None)?.residual)
    }

    /// `𝓕_2L(u) = −P₀C₀(u) − Σ P̃_j C_j(u + P₀C₀(u))` with `C_j(w) = G_j(w) − R_j w`.
    pub fn two_level_raspen_residual_corrections(&self, u: &[f64]) -> Result<Vec<f64>> {
        let c = self.fas_correction_volume(u, None)?;
        let pc = self.volume.prolong(&c.correction)?;
        let w = add(u, &pc);
        let sweep = self.ns.sweep(&w, None)?;
        let mut out: Vec<f64> = pc.iter().map(|x| -x).collect();
        for (j, m) in self.ns.layout().transfer.subdomains().iter().enumerate() {
            let cj = sub(&sweep.local[j], &m.restrict(&w));
            let neg: Vec<f64> = cj.iter().map(|x| -x).collect();
            m.restricted_prolong_add(&neg, &mut out);
        }
        Ok(out)
    }

    /// `𝓕̄_2L(v) = v − Σ Ḡ_j(v + P̄₀C̄₀(v))`.
    pub fn two_level_sraspen_residual(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.ns.n_skeleton(), v.len())?;
        Ok(self.sraspen2l(v, None)?.residual)
    }

    /// `𝓕̄_2L(v) = −P̄₀C̄₀(v) − Σ C̄_j(v + P̄₀C̄₀(v))` with
    /// `C̄_j(v) = Ḡ_j(v) − R̄ P̃_j R_j P̄ v`.
    pub fn two_level_sraspen_residual_corrections(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (c, _) = self.fas_correction_substructured(v, None)?;
        let pc = self.substructured.prolong(&c.correction)?;
        let half = add(v, &pc);
        let sk = &self.ns.layout().skeleton;
        let ph = sk.extend(&half);
        let sweep = self.ns.sweep(&ph, None)?;
        let mut out: Vec<f64> = pc.iter().map(|x| -x).collect();
        for (j, m) in self.ns.layout().transfer.subdomains().iter().enumerate() {
            let mut gj = vec![0.0; ph.len()];
            m.restricted_prolong_add(&sweep.local[j], &mut gj);
            let mut rj = vec![0.0; ph.len()];
            m.restricted_prolong_add(&m.restrict(&ph), &mut rj);
            for (o, (a, b)) in out.iter_mut().zip(sk.restrict(&gj).iter().zip(sk.restrict(&rj))) {
                *o -= a - b;
            }
        }
        Ok(out)
    }
}

/// Two-level residual at one point together with its coarse solve.
pub struct TwoLevelEval {
    pub residual: Vec<f64>,
    pub volume: Vec<f64>,
    pub coarse: CoarseCorrection,
    pub local_newton_max: usize,
    hint: CoarseHint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoLevelMethod {
    Raspen2l,
    Sraspen2l,
}

/// Newton on `𝓕_2L = 0` or `𝓕̄_2L = 0` with one-sided finite-difference
/// Jacobian matvecs of step `1e-7 (1 + ‖x‖∞)`.
pub struct TwoLevelSystem<'t, 'a, 'p> {
    tl: &'t TwoLevel<'a, 'p>,
    method: TwoLevelMethod,
}

impl<'t, 'a, 'p> TwoLevelSystem<'t, 'a, 'p> {
    pub fn new(tl: &'t TwoLevel<'a, 'p>, method: TwoLevelMethod) -> Self {
        Self { tl, method }
    }

    fn eval(&self, x: &[f64], hint: Option<&CoarseHint>) -> Result<TwoLevelEval> {
        match self.method {
            TwoLevelMethod::Raspen2l => self.tl.raspen2l(x, hint),
            TwoLevelMethod::Sraspen2l => self.tl.sraspen2l(x, hint),
        }
    }
}

/// Cache kept per outer iterate: the hint for nearby coarse solves.
pub struct TwoLevelCache {
    hint: CoarseHint,
}

struct FdJacobian<'s, 't, 'a, 'p> {
    system: &'s TwoLevelSystem<'t, 'a, 'p>,
    x: &'s [f64],
    base: &'s [f64],
    hint: &'s CoarseHint,
}

impl Linearization for FdJacobian<'_, '_, '_, '_> {
    fn dim(&self) -> usize {
        self.x.len()
    }

    fn apply(&self, w: &[f64]) -> Result<Vec<f64>> {
        let wn = norm_inf(w);
        if wn == 0.0 {
            return Ok(vec![0.0; w.len()]);
        }
        let eps = 1e-7 * (1.0 + norm_inf(self.x)) / wn;
        let shifted: Vec<f64> = self.x.iter().zip(w).map(|(a, b)| a + eps * b).collect();
        let r = self.system.eval(&shifted, Some(self.hint))?.residual;
        Ok(r.iter().zip(self.base).map(|(a, b)| (a - b) / eps).collect())
    }
}

impl NewtonSystem for TwoLevelSystem<'_, '_, '_> {
    type Cache = TwoLevelCache;

    fn dim(&self) -> usize {
        match self.method {
            TwoLevelMethod::Raspen2l => self.tl.ns.n_global(),
            TwoLevelMethod::Sraspen2l => self.tl.ns.n_skeleton(),
        }
    }

    fn evaluate(&self, x: &[f64]) -> Result<Evaluation<TwoLevelCache>> {
        let e = self.eval(x, None)?;
        let hint = match self.method {
            TwoLevelMethod::Raspen2l => CoarseHint { solution: e.coarse.solution.clone(), jacobian: None },
            TwoLevelMethod::Sraspen2l => e.hint,
        };
        Ok(Evaluation {
            residual: e.residual,
            volume: e.volume,
            local_newton_max: e.local_newton_max,
            coarse_newton_iters: Some(e.coarse.iterations),
            cache: TwoLevelCache { hint },
        })
    }

    fn linearize<'s>(&'s self, x: &'s [f64], eval: &'s Evaluation<TwoLevelCache>) -> Result<Box<dyn Linearization + 's>> {
        Ok(Box::new(FdJacobian { system: self, x, base: &eval.residual, hint: &eval.cache.hint }))
    }

    fn counters(&self) -> CounterSnapshot {
        self.tl.ns.counters().snapshot()
    }
}

/// Two-level RASPEN or SRASPEN from the volume guess `u0`.
pub fn newton_two_level(
    tl: &TwoLevel<'_, '_>,
    method: TwoLevelMethod,
    u0: &[f64],
    reference: Option<&[f64]>,
    opts: &NewtonOptions,
) -> Result<OuterNewtonHistory> {
    check_len(tl.ns.n_global(), u0.len())?;
    let system = TwoLevelSystem::new(tl, method);
    match method {
        TwoLevelMethod::Raspen2l => newton_solve("raspen2l", &system, u0, reference, opts),
        TwoLevelMethod::Sraspen2l => {
            let v0 = tl.ns.layout().skeleton.restrict(u0);
            newton_solve("sraspen2l", &system, &v0, reference, opts)
        }
    }
}
