use serde::{Deserialize, Serialize};

use super::transfer::TransferOps;
use crate::error::{DdError, Result};
use crate::linalg::{CsrMatrix, NOT_LOCAL};

/// Skeleton unknowns: indices `k` such that `e_k` acts as Dirichlet data for
/// at least one subdomain, i.e. `R_j A (e_k - P_j R_j e_k) != 0` for some `j`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Skeleton {
    indices: Vec<usize>,
    #[serde(skip)]
    position: Vec<u32>,
    n_global: usize,
}

/// Structural skeleton for arbitrary (not necessarily sorted) index sets.
pub fn skeleton_from_sets(n_global: usize, sets: &[Vec<usize>], pattern: &CsrMatrix) -> Result<Vec<usize>> {
    if pattern.nnz() == 0 || pattern.nrows() == 0 {
        return Err(DdError::InvalidArgument("empty sparsity pattern".into()));
    }
    if pattern.nrows() != n_global || pattern.ncols() != n_global {
        return Err(DdError::DimensionMismatch { expected: n_global, got: pattern.nrows() });
    }
    let mut inside = vec![false; n_global];
    let mut mark = vec![false; n_global];
    for set in sets {
        for &i in set {
            inside[i] = true;
        }
        for &i in set {
            for &k in pattern.row(i).0 {
                if !inside[k] {
                    mark[k] = true;
                }
            }
        }
        for &i in set {
            inside[i] = false;
        }
    }
    Ok((0..n_global).filter(|&k| mark[k]).collect())
}

pub fn compute_skeleton(transfer: &TransferOps, pattern: &CsrMatrix) -> Result<Skeleton> {
    let sets: Vec<Vec<usize>> = transfer.subdomains().iter().map(|m| m.indices().to_vec()).collect();
    let indices = skeleton_from_sets(transfer.n_global(), &sets, pattern)?;
    Ok(Skeleton::from_indices(transfer.n_global(), indices))
}

impl Skeleton {
    pub fn from_indices(n_global: usize, indices: Vec<usize>) -> Self {
        let mut position = vec![NOT_LOCAL; n_global];
        for (p, &k) in indices.iter().enumerate() {
            position[k] = p as u32;
        }
        Self { indices, position, n_global }
    }

    /// `N̄`.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn n_global(&self) -> usize {
        self.n_global
    }

    /// The sorted index set `K`.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn position(&self, k: usize) -> Option<usize> {
        match self.position[k] {
            NOT_LOCAL => None,
            p => Some(p as usize),
        }
    }

    /// `R̄ u`.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&k| u[k]).collect()
    }

    /// `P̄ v`: extension by zero off the skeleton.
    pub fn extend(&self, v: &[f64]) -> Vec<f64> {
        let mut u = vec![0.0; self.n_global];
        for (&k, &x) in self.indices.iter().zip(v) {
            u[k] = x;
        }
        u
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{build_grid, build_transfer_operators, partition_overlapping};

    fn tridiag(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    /// Brute force over the definition with explicit vectors.
    fn brute_force(t: &TransferOps, a: &CsrMatrix) -> Vec<usize> {
        let n = t.n_global();
        (0..n)
            .filter(|&k| {
                t.subdomains().iter().any(|m| {
                    let mut e = vec![0.0; n];
                    e[k] = 1.0;
                    let pre = m.prolong(&m.restrict(&e));
                    let d: Vec<f64> = e.iter().zip(&pre).map(|(a, b)| a - b).collect();
                    let ad = a.matvec(&d).unwrap();
                    m.restrict(&ad).iter().any(|&v| v != 0.0)
                })
            })
            .collect()
    }

    #[test]
    fn one_d_poisson_two_subdomains() {
        let g = build_grid(1, &[9], 0.1).unwrap();
        let t = build_transfer_operators(&partition_overlapping(&g, &[2], 1).unwrap());
        let a = tridiag(9);
        let s = compute_skeleton(&t, &a).unwrap();
        assert_eq!(s.indices(), &[2, 5]);
        assert_eq!(brute_force(&t, &a), vec![2, 5]);
    }

    #[test]
    fn single_subdomain_empty() {
        let g = build_grid(1, &[9], 0.1).unwrap();
        let t = build_transfer_operators(&partition_overlapping(&g, &[1], 1).unwrap());
        assert!(compute_skeleton(&t, &tridiag(9)).unwrap().is_empty());
    }

    #[test]
    fn empty_pattern_rejected() {
        let g = build_grid(1, &[3], 0.1).unwrap();
        let t = build_transfer_operators(&partition_overlapping(&g, &[1], 1).unwrap());
        let empty = CsrMatrix::from_triplets(3, 3, &[]).unwrap();
        assert!(compute_skeleton(&t, &empty).is_err());
    }

    #[test]
    fn restrict_extend_roundtrip() {
        let s = Skeleton::from_indices(10, vec![1, 4, 7]);
        let v = vec![3.0, -1.0, 2.0];
        assert_eq!(s.restrict(&s.extend(&v)), v);
        assert_eq!(s.extend(&v)[0], 0.0);
    }
}
