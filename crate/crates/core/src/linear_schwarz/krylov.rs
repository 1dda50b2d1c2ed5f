//! Relations between the volume Krylov space of `M⁻¹A` and the substructured
//! one of `R̄ M⁻¹ A P̄`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::LinearSchwarz;
use crate::error::{check_len, DdError, Result};
use crate::linalg::dense::{columns_to_matrix, diff_norm_inf, least_squares, norm_inf, numerical_rank};
use crate::linalg::{gmres, FnOperator, GmresOptions};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Largest `‖b − A x‖ / ‖b‖` over the columns `b` of `bs`, with `x` the least-squares fit.
fn inclusion_gap(a: &[Vec<f64>], bs: &[Vec<f64>], nrows: usize) -> f64 {
    if a.is_empty() {
        return if bs.iter().all(|b| norm_inf(b) == 0.0) { 0.0 } else { 1.0 };
    }
    let m = columns_to_matrix(a, nrows);
    bs.iter()
        .map(|b| {
            let bv = nalgebra::DVector::from_column_slice(b);
            let x = least_squares(&m, &bv);
            let r = &bv - &m * x;
            let bn = bv.norm();
            if bn > 0.0 {
                r.norm() / bn
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KrylovReport {
    pub k: usize,
    /// `‖R̄(M⁻¹A)^p w − (R̄M⁻¹AP̄)^p R̄ w‖ / ‖R̄(M⁻¹A)^p w‖` for `p = 1..=k`.
    pub power_identity_errors: Vec<f64>,
    pub rank_restricted_volume: usize,
    pub rank_substructured: usize,
    pub rank_union: usize,
    /// Largest relative distance of a basis vector of either space from the
    /// span of the other.
    pub inclusion_residual: f64,
    /// All three ranks agree.
    pub spans_equal: bool,
    /// Worst violation of `R̄M⁻¹A = R̄M⁻¹AP̄R̄` on the probe vector.
    pub assumption_residual: f64,
}

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let s = norm_inf(a).max(norm_inf(b));
    if s > 0.0 {
        diff_norm_inf(a, b) / s
    } else {
        0.0
    }
}

/// Orthonormal basis of the first `k` Krylov vectors (fewer on breakdown).
fn krylov_basis(n: usize, apply: &dyn Fn(&[f64]) -> Result<Vec<f64>>, r0: &[f64], k: usize) -> Result<Vec<Vec<f64>>> {
    if k == 0 || norm_inf(r0) == 0.0 {
        return Ok(Vec::new());
    }
    let op = FnOperator::new(n, |x: &[f64], y: &mut [f64]| {
        y.copy_from_slice(&apply(x)?);
        Ok(())
    });
    // solving op x = r0 from x0 = 0 builds K_k(op, r0)
    let opts = GmresOptions { rtol: 0.0, maxit: k, breakdown_tol: 1e-13, record_arnoldi: true };
    let res = gmres(&op, r0, &vec![0.0; n], &opts)?;
    let mut basis = res.arnoldi.map(|r| r.basis).unwrap_or_default();
    basis.truncate(k);
    Ok(basis)
}

impl LinearSchwarz {
    fn volume_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.apply_m_inv(&self.matrix().matvec(x)?)
    }

    /// Checks the power identity for `p = 1..=k` on a random vector and compares
    /// `R̄ K_k(M⁻¹A, r⁰)` with `K_k(R̄M⁻¹AP̄, r̄⁰)` by numerical rank.
    pub fn check_krylov_restriction(&self, u0: &[f64], k: usize, seed: u64) -> Result<KrylovReport> {
        let n = self.n_global();
        check_len(n, u0.len())?;
        let sk = &self.layout().skeleton;
        let nbar = sk.len();
        if k > nbar {
            return Err(DdError::InvalidArgument(format!("k = {k} exceeds the skeleton size {nbar}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let probe = self.volume_apply(&w)?;
        let probe_sk = self.volume_apply(&sk.extend(&sk.restrict(&w)))?;
        let assumption_residual = rel_gap(&sk.restrict(&probe), &sk.restrict(&probe_sk));

        let mut errors = Vec::with_capacity(k);
        let mut vol = w.clone();
        let mut sub = sk.restrict(&w);
        for _ in 0..k {
            vol = self.volume_apply(&vol)?;
            sub = self.substructured_apply(&sub)?;
            errors.push(rel_gap(&sk.restrict(&vol), &sub));
        }

        let r0 = self.apply_m_inv(&self.residual(u0)?)?;
        let v0 = sk.restrict(u0);
        let rbar0 = {
            let b = sk.restrict(&self.apply_m_inv(self.rhs())?);
            let av = self.substructured_apply(&v0)?;
            b.iter().zip(&av).map(|(x, y)| x - y).collect::<Vec<_>>()
        };
        let qv = krylov_basis(n, &|x| self.volume_apply(x), &r0, k)?;
        let qs = krylov_basis(nbar, &|x| self.substructured_apply(x), &rbar0, k)?;
        let restricted: Vec<Vec<f64>> = qv.iter().map(|q| sk.restrict(q)).collect();
        let rv = numerical_rank(&columns_to_matrix(&restricted, nbar), RANK_TOL);
        let rs = numerical_rank(&columns_to_matrix(&qs, nbar), RANK_TOL);
        let inclusion_residual = inclusion_gap(&qs, &restricted, nbar).max(inclusion_gap(&restricted, &qs, nbar));
        let mut all = restricted;
        all.extend(qs);
        let ru = numerical_rank(&columns_to_matrix(&all, nbar), RANK_TOL);
        Ok(KrylovReport {
            k,
            power_identity_errors: errors,
            rank_restricted_volume: rv,
            rank_substructured: rs,
            rank_union: ru,
            inclusion_residual,
            spans_equal: rv == rs && rs == ru,
            assumption_residual,
        })
    }
}

/// Per-iteration comparison of GMRES on the volume and substructured systems
/// started from `u0` and `R̄u0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterateGap {
    pub k: usize,
    /// `‖R̄u^k − v^k‖∞`.
    pub gap: f64,
    /// Distance between `v^k` and `v⁰ + R̄Q_k t`, `t` from the restricted least-squares problem.
    pub restricted_lsq_error: f64,
}

pub fn gmres_iterate_gap(ctx: &LinearSchwarz, u0: &[f64], maxk: usize) -> Result<Vec<IterateGap>> {
    let sk = &ctx.layout().skeleton;
    let v0 = sk.restrict(u0);
    let opts = GmresOptions { rtol: 1e-14, maxit: maxk, breakdown_tol: 1e-14, record_arnoldi: true };
    let vol = ctx.gmres_ras(u0, &opts)?;
    let sub = ctx.gmres_sras(&v0, &opts)?;
    let rv = vol.arnoldi.as_ref().expect("recorded");
    let rs = sub.arnoldi.as_ref().expect("recorded");
    let kmax = rv.steps().min(rs.steps());
    let h = rv.hessenberg_matrix();
    let mut out = Vec::with_capacity(kmax);
    for k in 1..=kmax {
        let uk = rv.iterate(k, u0);
        let vk = rs.iterate(k, &v0);
        // columns R̄ q_0..R̄ q_k (a missing q_k after breakdown is zero)
        let cols: Vec<Vec<f64>> =
            (0..=k).map(|i| rv.basis.get(i).map_or(vec![0.0; sk.len()], |q| sk.restrict(q))).collect();
        let rq = columns_to_matrix(&cols, sk.len());
        let hk = h.view((0, 0), (k + 1, k)).into_owned();
        let mut e1 = DVector::zeros(k + 1);
        e1[0] = rv.beta;
        // minimize ‖R̄Q_{k+1}(β e₁ − H_k t)‖ = ‖R̄Q_{k+1} β e₁ − (R̄Q_{k+1} H_k) t‖
        let lhs: DMatrix<f64> = &rq * &hk;
        let rhs = &rq * e1;
        let t = least_squares(&lhs, &rhs);
        let rqk = rq.columns(0, k).into_owned();
        let vt: Vec<f64> = (rqk * t).iter().zip(&v0).map(|(a, b)| a + b).collect();
        let scale = norm_inf(&vk).max(1e-300);
        out.push(IterateGap {
            k,
            gap: diff_norm_inf(&sk.restrict(&uk), &vk),
            restricted_lsq_error: diff_norm_inf(&vt, &vk) / scale,
        });
    }
    Ok(out)
}
