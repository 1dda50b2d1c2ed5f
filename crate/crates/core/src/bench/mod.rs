//! Experiment runner: a JSON config names a problem, a decomposition and a
//! list of methods; every method writes one CSV history, and the run writes a
//! decomposition summary and a summary of all methods.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decomp::{DecompositionSummary, Layout};
use crate::error::{DdError, Result};
use crate::history::{write_json, ConvergenceHistory, OuterNewtonHistory};
use crate::linalg::GmresOptions;
use crate::linear_schwarz::{LinearSchwarz, StationaryOptions, StopMode, Variant};
use crate::nonlinear_schwarz::{
    newton_outer, reference_solution, JacobianSolver, LineSearch, LocalNewtonOptions, NewtonMethod, NewtonOptions, NonlinearSchwarz,
};
use crate::problems::ProblemSpec;
use crate::two_level::{newton_two_level, CoarseNewtonOptions, TwoLevel, TwoLevelMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodId {
    Ras,
    Sras,
    GmresRas,
    GmresSras,
    Nras,
    Nsras,
    Newton,
    Raspen,
    Sraspen,
    Nras2l,
    Nsras2l,
    Raspen2l,
    Sraspen2l,
}

impl MethodId {
    pub const ALL: [MethodId; 13] = [
        Self::Ras,
        Self::Sras,
        Self::GmresRas,
        Self::GmresSras,
        Self::Nras,
        Self::Nsras,
        Self::Newton,
        Self::Raspen,
        Self::Sraspen,
        Self::Nras2l,
        Self::Nsras2l,
        Self::Raspen2l,
        Self::Sraspen2l,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ras => "ras",
            Self::Sras => "sras",
            Self::GmresRas => "gmres_ras",
            Self::GmresSras => "gmres_sras",
            Self::Nras => "nras",
            Self::Nsras => "nsras",
            Self::Newton => "newton",
            Self::Raspen => "raspen",
            Self::Sraspen => "sraspen",
            Self::Nras2l => "nras2l",
            Self::Nsras2l => "nsras2l",
            Self::Raspen2l => "raspen2l",
            Self::Sraspen2l => "sraspen2l",
        }
    }

    fn is_linear_only(self) -> bool {
        matches!(self, Self::Ras | Self::Sras | Self::GmresRas | Self::GmresSras)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionSpec {
    /// Subdomains per axis.
    pub subdomains: Vec<usize>,
    /// Layers added on every side; neighbors overlap by twice this.
    pub overlap_layers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InitialGuess {
    Constant { value: f64 },
    /// Uniform on `[−scale, scale]`, drawn from the run seed.
    Random { scale: f64 },
}

impl Default for InitialGuess {
    fn default() -> Self {
        Self::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Newton methods: relative error (or residual) target.
    pub newton_rtol: f64,
    pub newton_maxit: usize,
    /// Stationary iterations.
    pub stationary_rtol: f64,
    pub stationary_maxit: usize,
    pub stop: StopMode,
    /// Linear GMRES solves (relative preconditioned residual).
    pub gmres_rtol: f64,
    pub gmres_maxit: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            newton_rtol: 1e-12,
            newton_maxit: 50,
            stationary_rtol: 1e-10,
            stationary_maxit: 200,
            stop: StopMode::Error,
            gmres_rtol: 1e-10,
            gmres_maxit: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub problem: ProblemSpec,
    pub decomposition: DecompositionSpec,
    #[serde(default)]
    pub initial: InitialGuess,
    pub methods: Vec<MethodId>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Solver for the Newton correction equations of RASPEN-type methods.
    #[serde(default)]
    pub jacobian: JacobianSolver,
    #[serde(default = "default_line_search")]
    pub line_search: LineSearch,
    #[serde(default)]
    pub local: LocalNewtonOptions,
    #[serde(default)]
    pub coarse: CoarseNewtonOptions,
}

fn default_name() -> String {
    "experiment".into()
}

fn default_line_search() -> LineSearch {
    LineSearch::Fallback
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| DdError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Headline numbers of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: String,
    pub iters: usize,
    pub converged: bool,
    pub final_error: f64,
    /// `L(n)` of the last iteration for Newton methods, cumulative parallel
    /// rounds of subdomain solves otherwise.
    #[serde(rename = "L_n")]
    pub cost: usize,
    /// Largest stored Krylov basis in bytes.
    pub bytes: usize,
    pub wall_ms: f64,
    pub raw_solves: usize,
    pub parallel_rounds: usize,
    /// Mean inner GMRES iterations per Newton step.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub average_inner: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cost_identity: Option<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: String,
    pub problem: String,
    pub seed: u64,
    pub threads: usize,
    #[serde(rename = "N_v")]
    pub n_v: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "N_bar")]
    pub n_bar: usize,
    pub runs: Vec<RunRecord>,
}

/// Histories of one method, stationary/GMRES or Newton.
pub enum MethodHistory {
    Iterative(ConvergenceHistory),
    Newton(OuterNewtonHistory),
}

impl MethodHistory {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        match self {
            Self::Iterative(h) => h.write_csv(path),
            Self::Newton(h) => h.write_csv(path),
        }
    }
}

/// `{L(n) series, parallel rounds, basis bytes}` of a history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMetrics {
    #[serde(rename = "L_n")]
    pub cost_series: Vec<usize>,
    pub parallel_rounds: usize,
    pub basis_bytes: usize,
}

pub fn cost_metrics(history: &MethodHistory) -> CostMetrics {
    match history {
        MethodHistory::Newton(h) => CostMetrics {
            cost_series: h.rows.iter().map(|r| r.cost).collect(),
            parallel_rounds: h.counters.parallel_rounds,
            basis_bytes: h.max_basis_bytes,
        },
        MethodHistory::Iterative(h) => CostMetrics {
            cost_series: h.rows.iter().map(|r| r.cum_parallel_rounds).collect(),
            parallel_rounds: h.rows.last().map_or(0, |r| r.cum_parallel_rounds),
            basis_bytes: h.rows.iter().map(|r| r.basis_bytes).max().unwrap_or(0),
        },
    }
}

fn record(method: MethodId, history: &MethodHistory, wall_ms: f64) -> RunRecord {
    let m = cost_metrics(history);
    match history {
        MethodHistory::Newton(h) => RunRecord {
            method: method.name().into(),
            iters: h.iterations(),
            converged: h.converged,
            final_error: h.final_error(),
            cost: m.cost_series.last().copied().unwrap_or(0),
            bytes: m.basis_bytes,
            wall_ms,
            raw_solves: h.counters.raw_solves,
            parallel_rounds: h.counters.parallel_rounds,
            average_inner: Some(h.average_inner()),
            cost_identity: Some(h.cost_identity_holds()),
        },
        MethodHistory::Iterative(h) => RunRecord {
            method: method.name().into(),
            iters: h.iterations(),
            converged: h.converged,
            final_error: h.final_error(),
            cost: m.parallel_rounds,
            bytes: m.basis_bytes,
            wall_ms,
            raw_solves: h.rows.last().map_or(0, |r| r.cum_solves),
            parallel_rounds: m.parallel_rounds,
            average_inner: None,
            cost_identity: None,
        },
    }
}

fn initial_guess(init: InitialGuess, n: usize, seed: u64) -> Vec<f64> {
    match init {
        InitialGuess::Constant { value } => vec![value; n],
        InitialGuess::Random { scale } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.gen_range(-scale..=scale)).collect()
        }
    }
}

/// Everything a run produced, in memory.
pub struct Experiment {
    pub summary: RunSummary,
    pub decomposition: DecompositionSummary,
    pub histories: Vec<(MethodId, MethodHistory)>,
}

/// Runs all methods of `config` on the current rayon pool.
pub fn run_experiment(config: &ExperimentConfig, seed: u64) -> Result<Experiment> {
    let built = config.problem.build()?;
    if built.linear().is_none() {
        if let Some(m) = config.methods.iter().find(|m| m.is_linear_only()) {
            return Err(DdError::Config(format!(
                "method `{}` needs a linear problem (poisson); `{}` is nonlinear",
                m.name(),
                config.problem.id()
            )));
        }
    }
    let problem = built.nonlinear();
    let d = &config.decomposition;
    let layout = Arc::new(Layout::build(built.grid(), &d.subdomains, d.overlap_layers, &problem.sparsity()?)?);
    let n = layout.n_global();
    let u0 = initial_guess(config.initial, n, seed);
    let reference = match built.linear() {
        Some(_) => None,
        None => Some(reference_solution(problem, &vec![0.0; n], 1e-14)?),
    };

    let tol = &config.tolerances;
    let stat = StationaryOptions { rtol: tol.stationary_rtol, maxit: tol.stationary_maxit, mode: tol.stop, keep_iterates: false };
    let newton = NewtonOptions {
        rtol: tol.newton_rtol,
        maxit: tol.newton_maxit,
        solver: config.jacobian,
        line_search: config.line_search,
        ..NewtonOptions::default()
    };
    let gmres_opts = GmresOptions { rtol: tol.gmres_rtol, maxit: tol.gmres_maxit, record_arnoldi: true, ..GmresOptions::default() };

    let linear = match built.linear() {
        Some((a, f)) => Some(LinearSchwarz::new(a.clone(), f.to_vec(), layout.clone())?),
        None => None,
    };
    let linear_ref = match &linear {
        Some(ctx) => Some(ctx.direct_solve()?),
        None => None,
    };
    let reference = reference.as_deref().or(linear_ref.as_deref());

    let ns = NonlinearSchwarz::new(problem, layout.clone(), config.local)?;
    let needs_two_level = config.methods.iter().any(|m| matches!(m, MethodId::Nras2l | MethodId::Nsras2l | MethodId::Raspen2l | MethodId::Sraspen2l));
    let tl = if needs_two_level { Some(TwoLevel::new(&ns, config.coarse)?) } else { None };
    let sk = &layout.skeleton;

    let mut histories = Vec::new();
    let mut runs = Vec::new();
    for &method in &config.methods {
        let clock = Instant::now();
        let history = match method {
            MethodId::Ras | MethodId::Sras | MethodId::GmresRas | MethodId::GmresSras => {
                let ctx = linear.as_ref().expect("checked above");
                let variant = if matches!(method, MethodId::Ras | MethodId::GmresRas) { Variant::Ras } else { Variant::Sras };
                let x0 = match variant {
                    Variant::Ras => u0.clone(),
                    Variant::Sras => sk.restrict(&u0),
                };
                if matches!(method, MethodId::Ras | MethodId::Sras) {
                    MethodHistory::Iterative(ctx.solve_stationary(variant, &x0, reference, &stat)?)
                } else {
                    let res = match variant {
                        Variant::Ras => ctx.gmres_ras(&x0, &gmres_opts)?,
                        Variant::Sras => ctx.gmres_sras(&x0, &gmres_opts)?,
                    };
                    MethodHistory::Iterative(ctx.gmres_history(variant, &x0, &res, reference)?)
                }
            }
            MethodId::Nras => MethodHistory::Iterative(ns.solve_stationary(Variant::Ras, &u0, reference, &stat)?),
            MethodId::Nsras => MethodHistory::Iterative(ns.solve_stationary(Variant::Sras, &sk.restrict(&u0), reference, &stat)?),
            MethodId::Newton => MethodHistory::Newton(newton_outer(&ns, NewtonMethod::PlainNewton, &u0, reference, &newton)?),
            MethodId::Raspen => MethodHistory::Newton(newton_outer(&ns, NewtonMethod::Raspen, &u0, reference, &newton)?),
            MethodId::Sraspen => MethodHistory::Newton(newton_outer(&ns, NewtonMethod::Sraspen, &u0, reference, &newton)?),
            MethodId::Nras2l => {
                let tl = tl.as_ref().expect("built above");
                MethodHistory::Iterative(tl.solve_stationary(Variant::Ras, &u0, reference, &stat)?)
            }
            MethodId::Nsras2l => {
                let tl = tl.as_ref().expect("built above");
                MethodHistory::Iterative(tl.solve_stationary(Variant::Sras, &sk.restrict(&u0), reference, &stat)?)
            }
            MethodId::Raspen2l | MethodId::Sraspen2l => {
                let tl = tl.as_ref().expect("built above");
                let m = if method == MethodId::Raspen2l { TwoLevelMethod::Raspen2l } else { TwoLevelMethod::Sraspen2l };
                MethodHistory::Newton(newton_two_level(tl, m, &u0, reference, &newton)?)
            }
        };
        runs.push(record(method, &history, clock.elapsed().as_secs_f64() * 1e3));
        histories.push((method, history));
    }

    let summary = RunSummary {
        name: config.name.clone(),
        problem: config.problem.id().into(),
        seed,
        threads: rayon::current_num_threads(),
        n_v: n,
        n: layout.num_subdomains(),
        n_bar: sk.len(),
        runs,
    };
    Ok(Experiment { summary, decomposition: layout.summary(), histories })
}

/// Runs `config` with `threads` workers (all cores when `None`) and writes
/// `decomposition.json`, `summary.json` and `<method>.csv` into `out`.
pub fn run_to_dir(config: &ExperimentConfig, out: &Path, threads: Option<usize>, seed: u64) -> Result<RunSummary> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        builder = builder.num_threads(t);
    }
    let pool = builder.build().map_err(|e| DdError::Config(format!("thread pool: {e}")))?;
    let exp = pool.install(|| run_experiment(config, seed))?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("decomposition.json"), &exp.decomposition)?;
    for (m, h) in &exp.histories {
        h.write_csv(&out.join(format!("{}.csv", m.name())))?;
    }
    write_json(&out.join("summary.json"), &exp.summary)?;
    Ok(exp.summary)
}
