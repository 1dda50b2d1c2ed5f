//! Small dense helpers backed by nalgebra: least squares and numerical rank.

use nalgebra::{DMatrix, DVector};

/// Numerical rank: singular values above `rel_tol` times the largest one.
pub fn numerical_rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
pub fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let eps = 1e-14 * svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(b, eps).expect("both factors were computed")
}

/// Spectral radius through the eigenvalues of a dense matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Columns of `vs` as a dense matrix.
pub fn columns_to_matrix(vs: &[Vec<f64>], nrows: usize) -> DMatrix<f64> {
    DMatrix::from_fn(nrows, vs.len(), |i, j| vs[j][i])
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn diff_norm_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn diff_norm2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_of_outer_product() {
        let u = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let a = &u * u.transpose();
        assert_eq!(numerical_rank(&a, 1e-10), 1);
        assert_eq!(numerical_rank(&DMatrix::identity(4, 4), 1e-10), 4);
    }

    #[test]
    fn least_squares_exact_when_consistent() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let x = DVector::from_vec(vec![2.0, -1.0]);
        let b = &a * &x;
        assert!((least_squares(&a, &b) - x).amax() < 1e-13);
    }
}
