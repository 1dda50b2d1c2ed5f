//! Linear RAS and SRAS: stationary sweeps, the one-level preconditioner
//! `M⁻¹ = Σ P̃_j A_j⁻¹ R_j` and GMRES on the volume and substructured
//! preconditioned systems.

mod krylov;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decomp::Layout;
use crate::error::{check_len, DdError, Result};
use crate::history::{relative_error, ConvergenceHistory, HistoryRow, SolveCounters};
use crate::linalg::dense::norm_inf;
use crate::linalg::{gmres, stored_basis_bytes, CsrMatrix, FnOperator, GmresOptions, GmresResult, LuFactor};

pub use krylov::{gmres_iterate_gap, IterateGap, KrylovReport, RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Ras,
    Sras,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopMode {
    /// Relative ∞-norm error against a reference solution.
    Error,
    /// Relative ∞-norm residual `‖f − Au‖ / ‖f‖`.
    Residual,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StationaryOptions {
    pub rtol: f64,
    pub maxit: usize,
    pub mode: StopMode,
    pub keep_iterates: bool,
}

impl Default for StationaryOptions {
    fn default() -> Self {
        Self { rtol: 1e-10, maxit: 1000, mode: StopMode::Error, keep_iterates: false }
    }
}

/// Error growth factor after which a stationary iteration is declared divergent.
const DIVERGENCE_FACTOR: f64 = 1e6;

/// `A`, `f`, the layout and the factored subdomain matrices `A_j = R_j A P_j`.
pub struct LinearSchwarz {
    a: CsrMatrix,
    f: Vec<f64>,
    layout: Arc<Layout>,
    local_matrices: Vec<CsrMatrix>,
    factors: Vec<LuFactor>,
    counters: SolveCounters,
}

impl LinearSchwarz {
    pub fn new(a: CsrMatrix, f: Vec<f64>, layout: Arc<Layout>) -> Result<Self> {
        let n = layout.n_global();
        check_len(n, a.nrows())?;
        check_len(n, a.ncols())?;
        check_len(n, f.len())?;
        let local_matrices: Vec<CsrMatrix> = layout
            .transfer
            .subdomains()
            .iter()
            .map(|m| a.select_rows(m.indices()).select_columns(m.local_of(), m.len()))
            .collect();
        let factors = local_matrices.par_iter().map(LuFactor::factor_csr).collect::<Result<Vec<_>>>()?;
        Ok(Self { a, f, layout, local_matrices, factors, counters: SolveCounters::default() })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.f
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn n_global(&self) -> usize {
        self.layout.n_global()
    }

    pub fn n_skeleton(&self) -> usize {
        self.layout.skeleton.len()
    }

    pub fn num_subdomains(&self) -> usize {
        self.layout.num_subdomains()
    }

    /// `A_j = R_j A P_j`.
    pub fn local_matrix(&self, j: usize) -> &CsrMatrix {
        &self.local_matrices[j]
    }

    pub fn counters(&self) -> &SolveCounters {
        &self.counters
    }

    /// Solves `A_j x_j = b_j` for every subdomain concurrently and returns `Σ P̃_j x_j`.
    fn solve_and_sum(&self, local_rhs: Vec<Vec<f64>>) -> Result<Vec<f64>> {
        let out = self.solve_and_sum_uncounted(local_rhs)?;
        self.counters.add(self.num_subdomains(), 1);
        Ok(out)
    }

    fn solve_and_sum_uncounted(&self, local_rhs: Vec<Vec<f64>>) -> Result<Vec<f64>> {
        let sols = local_rhs
            .into_par_iter()
            .zip(self.factors.par_iter())
            .map(|(mut b, lu)| {
                lu.solve_in_place(&mut b)?;
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![0.0; self.n_global()];
        for (m, x) in self.layout.transfer.subdomains().iter().zip(&sols) {
            m.restricted_prolong_add(x, &mut out);
        }
        Ok(out)
    }

    /// `M⁻¹ r = Σ P̃_j A_j⁻¹ R_j r`.
    pub fn apply_m_inv(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n_global(), r.len())?;
        let rhs = self.layout.transfer.subdomains().iter().map(|m| m.restrict(r)).collect();
        self.solve_and_sum(rhs)
    }

    /// `f − A u`.
    pub fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut r = self.a.matvec(u)?;
        for (ri, fi) in r.iter_mut().zip(&self.f) {
            *ri = fi - *ri;
        }
        Ok(r)
    }

    /// One RAS sweep `u + M⁻¹(f − A u)`.
    pub fn ras_step(&self, u: &[f64]) -> Result<Vec<f64>> {
        let r = self.residual(u)?;
        let mut out = self.apply_m_inv(&r)?;
        for (o, ui) in out.iter_mut().zip(u) {
            *o += ui;
        }
        Ok(out)
    }

    /// Local right-hand sides `R_j (f − A (I − P_j R_j) u)`.
    fn boundary_rhs(&self, u: &[f64]) -> Result<Vec<Vec<f64>>> {
        check_len(self.n_global(), u.len())?;
        Ok(self
            .layout
            .transfer
            .subdomains()
            .iter()
            .map(|m| {
                m.indices()
                    .iter()
                    .map(|&i| {
                        let (cols, vals) = self.a.row(i);
                        let ext: f64 =
                            cols.iter().zip(vals).filter(|(&c, _)| !m.contains(c)).map(|(&c, &v)| v * u[c]).sum();
                        self.f[i] - ext
                    })
                    .collect()
            })
            .collect())
    }

    /// The same sweep written with subdomain boundary data:
    /// `Σ P̃_j A_j⁻¹ R_j (f − A (I − P_j R_j) u)`.
    pub fn ras_step_bc_form(&self, u: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.boundary_rhs(u)?;
        self.solve_and_sum(rhs)
    }

    /// Harmonic extension for diagnostics; not recorded in the counters.
    fn extend_uncounted(&self, v: &[f64]) -> Result<Vec<f64>> {
        let rhs = self.boundary_rhs(&self.layout.skeleton.extend(v))?;
        self.solve_and_sum_uncounted(rhs)
    }

    /// SRAS sweep `R̄ G^RAS(P̄ v)`; also returns the volume sweep `G^RAS(P̄ v)`.
    pub fn sras_step_with_volume(&self, v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let sk = &self.layout.skeleton;
        check_len(sk.len(), v.len())?;
        let u = self.ras_step_bc_form(&sk.extend(v))?;
        Ok((sk.restrict(&u), u))
    }

    pub fn sras_step(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.sras_step_with_volume(v)?.0)
    }

    /// Direct sparse solve of `A u = f`, used as the reference solution.
    pub fn direct_solve(&self) -> Result<Vec<f64>> {
        LuFactor::factor_csr(&self.a)?.solve(&self.f)
    }

    /// Volume solution from substructured data: one sweep from `P̄ v`.
    pub fn harmonic_extension(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.sras_step_with_volume(v)?.1)
    }

    fn relative_residual(&self, u: &[f64]) -> Result<f64> {
        let r = self.residual(u)?;
        let fnorm = norm_inf(&self.f);
        Ok(if fnorm > 0.0 { norm_inf(&r) / fnorm } else { norm_inf(&r) })
    }

    /// Runs RAS from `initial` (length `N_v`) or SRAS from `initial` (length `N̄`).
    ///
    /// SRAS errors and residuals are measured on the volume sweep that produced
    /// each substructured iterate, which by the equivalence with RAS is the
    /// RAS iterate; the initial row uses the skeleton values.
    pub fn solve_stationary(
        &self,
        variant: Variant,
        initial: &[f64],
        reference: Option<&[f64]>,
        opts: &StationaryOptions,
    ) -> Result<ConvergenceHistory> {
        if opts.mode == StopMode::Error && reference.is_none() {
            return Err(DdError::InvalidArgument("error-mode stopping needs a reference solution".into()));
        }
        let sk = &self.layout.skeleton;
        let name = match variant {
            Variant::Ras => "ras",
            Variant::Sras => "sras",
        };
        match variant {
            Variant::Ras => check_len(self.n_global(), initial.len())?,
            Variant::Sras => check_len(sk.len(), initial.len())?,
        }
        let mut hist = ConvergenceHistory::new(name);
        let start = self.counters.snapshot();
        let measure = |volume: &[f64]| -> Result<(f64, f64)> {
            let err = reference.map_or(f64::NAN, |r| relative_error(volume, r));
            Ok((err, self.relative_residual(volume)?))
        };
        let (mut err, mut res) = match variant {
            Variant::Ras => measure(initial)?,
            Variant::Sras => {
                let err = reference.map_or(f64::NAN, |r| relative_error(initial, &sk.restrict(r)));
                (err, self.relative_residual(&sk.extend(initial))?)
            }
        };
        let mut x = initial.to_vec();
        let mut volume = match variant {
            Variant::Ras => x.clone(),
            Variant::Sras => sk.extend(&x),
        };
        let err0 = err;
        let stop_value = |e: f64, r: f64| if opts.mode == StopMode::Error { e } else { r };
        let push = |hist: &mut ConvergenceHistory, it: usize, err: f64, res: f64| {
            let c = self.counters.snapshot();
            hist.rows.push(HistoryRow {
                iter: it,
                err,
                res,
                cum_solves: c.raw_solves - start.raw_solves,
                cum_parallel_rounds: c.parallel_rounds - start.parallel_rounds,
                basis_bytes: 0,
                coarse_newton_iters: None,
            });
        };
        push(&mut hist, 0, err, res);
        if opts.keep_iterates {
            hist.iterates.push(x.clone());
        }
        let mut it = 0;
        while stop_value(err, res) > opts.rtol && it < opts.maxit {
            it += 1;
            match variant {
                Variant::Ras => {
                    x = self.ras_step(&x)?;
                    volume.clone_from(&x);
                }
                Variant::Sras => {
                    let (v, u) = self.sras_step_with_volume(&x)?;
                    x = v;
                    volume = u;
                }
            }
            (err, res) = measure(&volume)?;
            push(&mut hist, it, err, res);
            if opts.keep_iterates {
                hist.iterates.push(x.clone());
            }
            let grow = if opts.mode == StopMode::Error { err / err0.max(f64::MIN_POSITIVE) } else { res };
            if !grow.is_finite() || grow > DIVERGENCE_FACTOR {
                hist.diverged = true;
                break;
            }
        }
        hist.converged = stop_value(err, res) <= opts.rtol;
        hist.solution = volume;
        Ok(hist)
    }

    /// GMRES on `M⁻¹ A u = M⁻¹ f`.
    pub fn gmres_ras(&self, u0: &[f64], opts: &GmresOptions) -> Result<GmresResult> {
        let n = self.n_global();
        check_len(n, u0.len())?;
        let b = self.apply_m_inv(&self.f)?;
        let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
            let ax = self.a.matvec(x)?;
            y.copy_from_slice(&self.apply_m_inv(&ax)?);
            Ok(())
        });
        gmres(&op, &b, u0, opts)
    }

    /// `R̄ M⁻¹ A P̄ v`.
    pub fn substructured_apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let sk = &self.layout.skeleton;
        let ax = self.a.matvec(&sk.extend(v))?;
        Ok(sk.restrict(&self.apply_m_inv(&ax)?))
    }

    /// GMRES on `R̄ M⁻¹ A P̄ v = R̄ M⁻¹ f`.
    pub fn gmres_sras(&self, v0: &[f64], opts: &GmresOptions) -> Result<GmresResult> {
        let sk = &self.layout.skeleton;
        check_len(sk.len(), v0.len())?;
        let b = sk.restrict(&self.apply_m_inv(&self.f)?);
        let op = FnOperator::new(sk.len(), |x: &[f64], y: &mut [f64]| {
            y.copy_from_slice(&self.substructured_apply(x)?);
            Ok(())
        });
        gmres(&op, &b, v0, opts)
    }

    /// Per-iteration history of a GMRES run: relative preconditioned residuals,
    /// cumulative solves (one round for `M⁻¹ f`, one per matvec) and basis bytes.
    /// Errors are computed from the recorded Arnoldi data when `reference` is
    /// given; substructured iterates are extended harmonically (uncounted).
    pub fn gmres_history(
        &self,
        variant: Variant,
        x0: &[f64],
        result: &GmresResult,
        reference: Option<&[f64]>,
    ) -> Result<ConvergenceHistory> {
        let n_sub = self.num_subdomains();
        let len = x0.len();
        let mut hist = ConvergenceHistory::new(match variant {
            Variant::Ras => "gmres_ras",
            Variant::Sras => "gmres_sras",
        });
        let r0 = result.residual_history.first().copied().unwrap_or(0.0);
        for (k, &r) in result.residual_history.iter().enumerate() {
            let err = match (reference, &result.arnoldi) {
                (Some(uref), Some(rec)) if k <= rec.steps() => {
                    let x = if k == result.iterations { result.solution.clone() } else { rec.iterate(k, x0) };
                    let volume = match variant {
                        Variant::Ras => x,
                        Variant::Sras => self.extend_uncounted(&x)?,
                    };
                    relative_error(&volume, uref)
                }
                _ => f64::NAN,
            };
            hist.rows.push(HistoryRow {
                iter: k,
                err,
                res: if r0 > 0.0 { r / r0 } else { r },
                cum_solves: n_sub * (k + 1),
                cum_parallel_rounds: k + 1,
                basis_bytes: stored_basis_bytes(len, k),
                coarse_newton_iters: None,
            });
        }
        hist.converged = result.converged;
        hist.solution = match variant {
            Variant::Ras => result.solution.clone(),
            Variant::Sras => self.harmonic_extension(&result.solution)?,
        };
        Ok(hist)
    }

    /// Dense `M⁻¹` assembled column by column (small problems only).
    pub fn dense_m_inv(&self) -> Result<nalgebra::DMatrix<f64>> {
        let n = self.n_global();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for c in 0..n {
            e[c] = 1.0;
            let col = self.apply_m_inv(&e)?;
            e[c] = 0.0;
            for (r, v) in col.into_iter().enumerate() {
                m[(r, c)] = v;
            }
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::build_grid;
    use crate::problems::assemble_poisson;

    fn poisson_1d(n: usize, subs: usize, overlap: usize) -> LinearSchwarz {
        let grid = build_grid(1, &[n], 1.0 / (n + 1) as f64).unwrap();
        let (a, f) = assemble_poisson(&grid);
        let layout = Layout::build(&grid, &[subs], overlap, &a.pattern()).unwrap();
        LinearSchwarz::new(a, f, Arc::new(layout)).unwrap()
    }

    #[test]
    fn single_subdomain_m_inv_is_a_inverse() {
        let ctx = poisson_1d(12, 1, 1);
        let r: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = ctx.apply_m_inv(&r).unwrap();
        let ax = ctx.matrix().matvec(&x).unwrap();
        for (p, q) in ax.iter().zip(&r) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn both_sweep_forms_agree() {
        let ctx = poisson_1d(30, 3, 2);
        let u: Vec<f64> = (0..30).map(|i| (0.3 * i as f64).cos()).collect();
        let a = ctx.ras_step(&u).unwrap();
        let b = ctx.ras_step_bc_form(&u).unwrap();
        assert!(relative_error(&a, &b) < 1e-12);
    }

    #[test]
    fn exact_solution_is_fixed_point() {
        let ctx = poisson_1d(30, 3, 2);
        let u = ctx.direct_solve().unwrap();
        assert!(relative_error(&ctx.ras_step(&u).unwrap(), &u) < 1e-12);
        let v = ctx.layout().skeleton.restrict(&u);
        assert!(relative_error(&ctx.sras_step(&v).unwrap(), &v) < 1e-12);
    }

    #[test]
    fn counters_track_sweeps() {
        let ctx = poisson_1d(30, 3, 2);
        ctx.ras_step(&vec![0.0; 30]).unwrap();
        let c = ctx.counters().snapshot();
        assert_eq!((c.raw_solves, c.parallel_rounds), (3, 1));
    }

    #[test]
    fn zero_data_converges_at_iteration_zero() {
        let grid = build_grid(1, &[9], 0.1).unwrap();
        let (a, _) = assemble_poisson(&grid);
        let layout = Layout::build(&grid, &[2], 1, &a.pattern()).unwrap();
        let ctx = LinearSchwarz::new(a, vec![0.0; 9], Arc::new(layout)).unwrap();
        let h = ctx
            .solve_stationary(Variant::Ras, &vec![0.0; 9], Some(&vec![0.0; 9]), &StationaryOptions::default())
            .unwrap();
        assert!(h.converged);
        assert_eq!(h.iterations(), 0);
    }
}
