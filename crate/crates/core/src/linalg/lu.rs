//! Direct factorizations used for exact subdomain and coarse solves.

use nalgebra::DMatrix;

use super::csr::CsrMatrix;
use crate::error::{check_len, DdError, Result};

/// Pivots smaller than this times the largest entry of their original row
/// are reported as singular.
const PIVOT_REL_TOL: f64 = 1e-14;

/// Dense LU factorization with partial (row) pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct DenseLU {
    n: usize,
    // Row-major, L below the diagonal (unit diagonal implied), U on and above.
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl DenseLU {
    pub fn factor(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(DdError::InvalidArgument(format!(
                "LU needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        let mut lu = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                lu[i * n + j] = a[(i, j)];
            }
        }
        Self::factor_row_major(n, lu)
    }

    fn factor_row_major(n: usize, mut lu: Vec<f64>) -> Result<Self> {
        if lu.iter().any(|v| !v.is_finite()) {
            return Err(DdError::NonFinite);
        }
        let mut scale: Vec<f64> =
            (0..n).map(|i| lu[i * n..(i + 1) * n].iter().fold(0.0f64, |m, v| m.max(v.abs()))).collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&x, &y| lu[x * n + k].abs().total_cmp(&lu[y * n + k].abs()))
                .unwrap();
            let pivot = lu[p * n + k];
            if pivot.abs() <= PIVOT_REL_TOL * scale[p] || pivot == 0.0 {
                return Err(DdError::SingularMatrix { row: perm[p], pivot });
            }
            if p != k {
                for j in 0..n {
                    lu.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
                scale.swap(k, p);
            }
            let inv = 1.0 / lu[k * n + k];
            for i in k + 1..n {
                let m = lu[i * n + k] * inv;
                lu[i * n + k] = m;
                if m != 0.0 {
                    for j in k + 1..n {
                        lu[i * n + j] -= m * lu[k * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        check_len(self.n, b.len())?;
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&y[..i]).map(|(l, v)| l * v).sum();
            y[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&y[i + 1..]).map(|(u, v)| u * v).sum();
            y[i] = (y[i] - s) / self.lu[i * n + i];
        }
        b.copy_from_slice(&y);
        Ok(())
    }

    /// `Pᵀ L U`, which reproduces the factored matrix.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let n = self.n;
        let l = DMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu[i * n + j],
            std::cmp::Ordering::Equal => 1.0,
            std::cmp::Ordering::Less => 0.0,
        });
        let u = DMatrix::from_fn(n, n, |i, j| if i <= j { self.lu[i * n + j] } else { 0.0 });
        let pa = l * u;
        let mut a = DMatrix::zeros(n, n);
        for (k, &p) in self.perm.iter().enumerate() {
            a.set_row(p, &pa.row(k));
        }
        a
    }
}

/// Banded LU with partial pivoting, storing the band in the LAPACK `gbtrf`
/// layout with `kl` extra superdiagonals for fill-in.
#[derive(Debug, Clone)]
pub struct BandLU {
    n: usize,
    kl: usize,
    ku: usize,
    // Column-major (2kl+ku+1) x n; entry (i, j) sits at ab[(kv + i - j) + j * ldab].
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLU {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(DdError::InvalidArgument("LU needs a square matrix".into()));
        }
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        let kv = kl + ku;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0; ldab * n];
        let mut scale = vec![0.0f64; n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if !v.is_finite() {
                    return Err(DdError::NonFinite);
                }
                ab[kv + i - j + j * ldab] = v;
                scale[i] = scale[i].max(v.abs());
            }
        }
        let mut ipiv = vec![0; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let col = j * ldab + kv;
            let mut jp = 0;
            let mut best = ab[col].abs();
            for p in 1..=km {
                if ab[col + p].abs() > best {
                    best = ab[col + p].abs();
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            let pivot = ab[col + jp];
            if pivot == 0.0 || pivot.abs() <= PIVOT_REL_TOL * scale[j + jp] {
                return Err(DdError::SingularMatrix { row: j + jp, pivot });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                scale.swap(j, j + jp);
                for c in j..=ju {
                    let a1 = kv + j - c + c * ldab;
                    let a2 = kv + j + jp - c + c * ldab;
                    ab.swap(a1, a2);
                }
            }
            let inv = 1.0 / ab[col];
            for p in 1..=km {
                ab[col + p] *= inv;
            }
            for c in j + 1..=ju {
                let t = ab[kv + j - c + c * ldab];
                if t != 0.0 {
                    for p in 1..=km {
                        let l = ab[col + p];
                        ab[kv + j + p - c + c * ldab] -= l * t;
                    }
                }
            }
        }
        Ok(Self { n, kl, ku, ab, ipiv })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        check_len(self.n, b.len())?;
        let (n, kl) = (self.n, self.kl);
        let kv = self.kl + self.ku;
        let ldab = 2 * kl + self.ku + 1;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            if bj != 0.0 {
                let col = j * ldab + kv;
                for q in 1..=km {
                    b[j + q] -= self.ab[col + q] * bj;
                }
            }
        }
        for i in (0..n).rev() {
            let last = (i + kv).min(n - 1);
            let mut s = b[i];
            for c in i + 1..=last {
                s -= self.ab[kv + i - c + c * ldab] * b[c];
            }
            b[i] = s / self.ab[kv + i * ldab];
        }
        Ok(())
    }
}


/// Factorization of a sparse matrix, banded when the band is narrow enough to pay off.
#[derive(Debug, Clone)]
pub enum LuFactor {
    Dense(DenseLU),
    Band(BandLU),
}

impl LuFactor {
    pub fn factor_csr(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let (kl, ku) = a.bandwidths();
        // band storage work ~ n*kl*(kl+ku) vs dense n^3/3
        if 3 * kl * (kl + ku + 1) < n * n {
            Ok(Self::Band(BandLU::factor(a)?))
        } else {
            Ok(Self::Dense(DenseLU::factor(&a.to_dense())?))
        }
    }

    pub fn factor_dense(a: &DMatrix<f64>) -> Result<Self> {
        Ok(Self::Dense(DenseLU::factor(a)?))
    }

    pub fn size(&self) -> usize {
        match self {
            Self::Dense(f) => f.size(),
            Self::Band(f) => f.size(),
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) -> Result<()> {
        match self {
            Self::Dense(f) => f.solve_in_place(b),
            Self::Band(f) => f.solve_in_place(b),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // diagonal shift keeps the condition number moderate
        DMatrix::from_fn(n, n, |i, j| rng.gen_range(-1.0..1.0) + if i == j { n as f64 / 4.0 } else { 0.0 })
    }

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn identity_solve() {
        let lu = DenseLU::factor(&DMatrix::identity(4, 4)).unwrap();
        let b = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(lu.solve(&b).unwrap(), b);
    }

    #[test]
    fn two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let x = DenseLU::factor(&a).unwrap().solve(&[3.0, 3.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_50() {
        let a = random_matrix(50, 11);
        let lu = DenseLU::factor(&a).unwrap();
        let rel = (lu.reconstruct() - &a).norm() / a.norm();
        assert!(rel < 1e-12, "{rel}");
    }

    #[test]
    fn random_30_against_refinement_oracle() {
        let a = random_matrix(30, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b: Vec<f64> = (0..30).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let lu = DenseLU::factor(&a).unwrap();
        let x = lu.solve(&b).unwrap();
        // one step of iterative refinement gives an independent, more accurate reference
        let ax = &a * nalgebra::DVector::from_column_slice(&x);
        let r: Vec<f64> = (0..30).map(|i| b[i] - ax[i]).collect();
        let d = lu.solve(&r).unwrap();
        let refined: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + b).collect();
        let diff: Vec<f64> = x.iter().zip(&refined).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-12 * norm(&refined));
        let res = norm(&r);
        assert!(res <= 1e-12 * norm(&b));
    }

    #[test]
    fn singular_detected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(DenseLU::factor(&a), Err(DdError::SingularMatrix { .. })));
        let s = CsrMatrix::from_dense(&a);
        assert!(matches!(BandLU::factor(&s), Err(DdError::SingularMatrix { .. })));
    }

    #[test]
    fn band_matches_dense_on_nonsymmetric_banded() {
        let n = 40;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut trip = Vec::new();
        for i in 0..n as usize {
            for j in i.saturating_sub(3)..(i + 5).min(n) {
                // weak diagonal forces row swaps
                let v = if i == j { 0.1 } else { rng.gen_range(-1.0..1.0) };
                trip.push((i, j, v));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &trip).unwrap();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut xb = b.clone();
        BandLU::factor(&a).unwrap().solve_in_place(&mut xb).unwrap();
        let xd = DenseLU::factor(&a.to_dense()).unwrap().solve(&b).unwrap();
        let diff: Vec<f64> = xb.iter().zip(&xd).map(|(a, b)| a - b).collect();
        assert!(norm(&diff) <= 1e-10 * norm(&xd));
        let r = a.matvec(&xb).unwrap();
        let res: Vec<f64> = r.iter().zip(&b).map(|(a, b)| a - b).collect();
        assert!(norm(&res) <= 1e-12 * norm(&b) * 100.0);
    }
}
