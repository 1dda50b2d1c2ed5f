//! Unrestarted GMRES with modified Gram-Schmidt Arnoldi (two passes) and Givens rotations.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Result};

/// Square linear operator given by its action.
pub trait LinearOperator {
    fn size(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()>;
}

impl LinearOperator for super::CsrMatrix {
    fn size(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        self.matvec_into(x, y)
    }
}

/// Wraps a closure as an operator.
pub struct FnOperator<F> {
    n: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(n: usize, f: F) -> Self {
        Self { n, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    fn size(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        (self.f)(x, y)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GmresOptions {
    /// Relative reduction of the residual 2-norm.
    pub rtol: f64,
    pub maxit: usize,
    /// A subdiagonal below `breakdown_tol` times the norm of the new Arnoldi
    /// vector before orthogonalization is a lucky breakdown.
    pub breakdown_tol: f64,
    /// Keep the Arnoldi basis and Hessenberg matrix in the result.
    pub record_arnoldi: bool,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, maxit: 1000, breakdown_tol: 1e-14, record_arnoldi: false }
    }
}

impl GmresOptions {
    pub fn with_rtol(rtol: f64) -> Self {
        Self { rtol, ..Self::default() }
    }
}

/// Arnoldi data: `op Q_k = Q_{k+1} H_k`.
#[derive(Debug, Clone)]
pub struct ArnoldiRecord {
    /// Orthonormal basis vectors q_0..q_k (k+1 of them unless breakdown).
    pub basis: Vec<Vec<f64>>,
    /// Hessenberg columns; column `j` holds entries `0..=j+1`.
    pub hessenberg: Vec<Vec<f64>>,
    /// Norm of the initial residual.
    pub beta: f64,
}

impl ArnoldiRecord {
    /// Dense (k+1) x k Hessenberg matrix.
    pub fn hessenberg_matrix(&self) -> nalgebra::DMatrix<f64> {
        let k = self.hessenberg.len();
        let mut h = nalgebra::DMatrix::zeros(k + 1, k);
        for (j, col) in self.hessenberg.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                h[(i, j)] = v;
            }
        }
        h
    }

    /// Number of completed Arnoldi steps.
    pub fn steps(&self) -> usize {
        self.hessenberg.len()
    }

    /// Coefficients `a` minimizing `‖β e₁ − H_k a‖` for the first `k` steps.
    pub fn least_squares_coefficients(&self, k: usize) -> Vec<f64> {
        let h = self.hessenberg_matrix();
        let hk = h.view((0, 0), (k + 1, k)).into_owned();
        let mut rhs = nalgebra::DVector::zeros(k + 1);
        rhs[0] = self.beta;
        super::dense::least_squares(&hk, &rhs).as_slice().to_vec()
    }

    /// GMRES iterate `x0 + Q_k a` after `k` steps.
    pub fn iterate(&self, k: usize, x0: &[f64]) -> Vec<f64> {
        let mut x = x0.to_vec();
        if k == 0 {
            return x;
        }
        let a = self.least_squares_coefficients(k);
        for (aj, qj) in a.iter().zip(&self.basis) {
            for (xl, ql) in x.iter_mut().zip(qj) {
                *xl += aj * ql;
            }
        }
        x
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GmresResult {
    pub solution: Vec<f64>,
    /// Residual 2-norms, starting with the initial residual.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub basis_dim: usize,
    pub breakdown: bool,
    pub converged: bool,
    /// 8 bytes x vector length x (iterations + 1).
    pub stored_basis_bytes: usize,
    #[serde(skip)]
    pub arnoldi: Option<ArnoldiRecord>,
}

impl GmresResult {
    pub fn relative_residual(&self) -> f64 {
        match (self.residual_history.first(), self.residual_history.last()) {
            (Some(&r0), Some(&r)) if r0 > 0.0 => r / r0,
            _ => 0.0,
        }
    }
}

pub fn stored_basis_bytes(len: usize, iterations: usize) -> usize {
    8 * len * (iterations + 1)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solves `op x = b` from `x0`. Non-convergence is reported through
/// `converged == false`, not as an error.
pub fn gmres<O: LinearOperator + ?Sized>(op: &O, b: &[f64], x0: &[f64], opts: &GmresOptions) -> Result<GmresResult> {
    let n = op.size();
    check_len(n, b.len())?;
    check_len(n, x0.len())?;

    let mut r = vec![0.0; n];
    op.apply(x0, &mut r)?;
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let beta = norm2(&r);
    let mut history = vec![beta];
    if beta == 0.0 || n == 0 {
        return Ok(GmresResult {
            solution: x0.to_vec(),
            residual_history: history,
            iterations: 0,
            basis_dim: 0,
            breakdown: false,
            converged: true,
            stored_basis_bytes: stored_basis_bytes(n, 0),
            arnoldi: opts.record_arnoldi.then(|| ArnoldiRecord { basis: vec![], hessenberg: vec![], beta }),
        });
    }

    let target = opts.rtol * beta;
    let mut q: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
    let mut h_raw: Vec<Vec<f64>> = Vec::new();
    // rotated (upper-triangular) columns
    let mut rcols: Vec<Vec<f64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<f64> = Vec::new();
    let mut g = vec![beta];
    let mut converged = false;
    let mut breakdown = false;
    let mut w = vec![0.0; n];

    while rcols.len() < opts.maxit {
        let k = rcols.len();
        op.apply(&q[k], &mut w)?;
        let wnorm = norm2(&w);
        let mut h = vec![0.0; k + 2];
        // modified Gram-Schmidt, repeated once to keep the basis orthonormal
        // when the residual gets small
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let hij = dot(&w, qi);
                h[i] += hij;
                for (wl, ql) in w.iter_mut().zip(qi) {
                    *wl -= hij * ql;
                }
            }
        }
        let sub = norm2(&w);
        h[k + 1] = sub;
        if opts.record_arnoldi {
            h_raw.push(h.clone());
        }

        for i in 0..k {
            let t = cs[i] * h[i] + sn[i] * h[i + 1];
            h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
            h[i] = t;
        }
        let denom = h[k].hypot(h[k + 1]);
        let (c, s) = if denom == 0.0 { (1.0, 0.0) } else { (h[k] / denom, h[k + 1] / denom) };
        cs.push(c);
        sn.push(s);
        h[k] = denom;
        h[k + 1] = 0.0;
        g.push(-s * g[k]);
        g[k] *= c;
        h.truncate(k + 1);
        rcols.push(h);

        let res = g[k + 1].abs();
        history.push(res);

        if sub <= opts.breakdown_tol * wnorm {
            breakdown = true;
            converged = true;
            break;
        }
        if res <= target {
            converged = true;
            break;
        }
        if rcols.len() == opts.maxit {
            break;
        }
        q.push(w.iter().map(|v| v / sub).collect());
    }

    // back substitution R y = g
    let k = rcols.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= rcols[j][i] * y[j];
        }
        y[i] = if rcols[i][i] != 0.0 { s / rcols[i][i] } else { 0.0 };
    }
    let mut x = x0.to_vec();
    for (yj, qj) in y.iter().zip(&q) {
        for (xl, ql) in x.iter_mut().zip(qj) {
            *xl += yj * ql;
        }
    }
    let basis_dim = q.len();
    let arnoldi = opts.record_arnoldi.then(|| {
        let mut basis = q;
        if !breakdown && k == basis.len() && h_raw.last().map_or(false, |h| h[k] > 0.0) {
            // complete Q_{k+1} with the final normalized direction
            basis.push(w.iter().map(|v| v / h_raw[k - 1][k]).collect());
        }
        ArnoldiRecord { basis, hessenberg: h_raw, beta }
    });
    Ok(GmresResult {
        solution: x,
        residual_history: history,
        iterations: k,
        basis_dim,
        breakdown,
        converged,
        stored_basis_bytes: stored_basis_bytes(n, k),
        arnoldi,
    })
}
