use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, DdError, Result};

/// Sparse matrix in compressed-sparse-row layout.
///
/// Column indices are strictly increasing within each row. Explicit zeros are
/// allowed and are kept: the stored entries define the structural pattern used
/// by the skeleton computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        nrows: usize,
        ncols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_len(nrows + 1, indptr.len())?;
        check_len(indices.len(), values.len())?;
        if indptr[0] != 0 || indptr[nrows] != indices.len() {
            return Err(DdError::InvalidArgument("row offsets do not span the entries".into()));
        }
        for i in 0..nrows {
            let (a, b) = (indptr[i], indptr[i + 1]);
            if a > b {
                return Err(DdError::InvalidArgument(format!("row offsets decrease at row {i}")));
            }
            let cols = &indices[a..b];
            if cols.iter().any(|&c| c >= ncols) {
                return Err(DdError::InvalidArgument(format!("column index out of range in row {i}")));
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(DdError::InvalidArgument(format!(
                    "column indices not strictly increasing in row {i}"
                )));
            }
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, j, _) in triplets {
            if i >= nrows || j >= ncols {
                return Err(DdError::InvalidArgument(format!(
                    "triplet ({i}, {j}) outside {nrows}x{ncols}"
                )));
            }
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut raw: Vec<(usize, f64)> = vec![(0, 0.0); triplets.len()];
        for &(i, j, v) in triplets {
            raw[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        indptr.push(0);
        for i in 0..nrows {
            let row = &mut raw[counts[i]..counts[i + 1]];
            row.sort_by_key(|e| e.0);
            for &(j, v) in row.iter() {
                if indices.len() > indptr[i] && *indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Ok(Self { nrows, ncols, indptr, indices, values })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            nrows: n,
            ncols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut trip = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    trip.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &trip).expect("in-range triplets")
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|p| vals[p])
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        check_len(self.ncols, x.len())?;
        check_len(self.nrows, y.len())?;
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum();
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((c, i, v));
            }
        }
        Self::from_triplets(self.ncols, self.nrows, &trip).expect("transpose stays in range")
    }

    /// Sparse product `self * other`.
    pub fn matmul(&self, other: &CsrMatrix) -> Result<Self> {
        check_len(self.ncols, other.nrows)?;
        let mut trip = Vec::new();
        let mut acc = vec![0.0; other.ncols];
        let mut used = vec![false; other.ncols];
        let mut touched = Vec::new();
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&k, &a) in cols.iter().zip(vals) {
                let (ocols, ovals) = other.row(k);
                for (&j, &b) in ocols.iter().zip(ovals) {
                    if !used[j] {
                        used[j] = true;
                        touched.push(j);
                    }
                    acc[j] += a * b;
                }
            }
            for &j in &touched {
                trip.push((i, j, acc[j]));
                acc[j] = 0.0;
                used[j] = false;
            }
            touched.clear();
        }
        Self::from_triplets(self.nrows, other.ncols, &trip)
    }

    /// Kronecker product `a ⊗ b`; row index is `ia * b.nrows + ib`.
    pub fn kron(a: &CsrMatrix, b: &CsrMatrix) -> Self {
        let mut trip = Vec::with_capacity(a.nnz() * b.nnz());
        for ia in 0..a.nrows {
            let (ac, av) = a.row(ia);
            for ib in 0..b.nrows {
                let (bc, bv) = b.row(ib);
                for (&ja, &va) in ac.iter().zip(av) {
                    for (&jb, &vb) in bc.iter().zip(bv) {
                        trip.push((ia * b.nrows + ib, ja * b.ncols + jb, va * vb));
                    }
                }
            }
        }
        Self::from_triplets(a.nrows * b.nrows, a.ncols * b.ncols, &trip).expect("kron in range")
    }

    /// Rows `rows` of the matrix, all columns kept.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &r in rows {
            let (cols, vals) = self.row(r);
            indices.extend_from_slice(cols);
            values.extend_from_slice(vals);
            indptr.push(indices.len());
        }
        Self { nrows: rows.len(), ncols: self.ncols, indptr, indices, values }
    }

    /// Keeps only columns with `local_of[c] != NOT_LOCAL`, renumbered to `local_of[c]`.
    pub fn select_columns(&self, local_of: &[u32], ncols: usize) -> Self {
        let mut indptr = Vec::with_capacity(self.nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let l = local_of[c];
                if l != NOT_LOCAL {
                    indices.push(l as usize);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        // Column renumbering preserves order when the map is monotone, which
        // holds for sorted index sets; sort defensively otherwise.
        let mut m = Self { nrows: self.nrows, ncols, indptr, indices, values };
        m.sort_rows();
        m
    }

    fn sort_rows(&mut self) {
        for i in 0..self.nrows {
            let (a, b) = (self.indptr[i], self.indptr[i + 1]);
            if self.indices[a..b].windows(2).all(|w| w[0] < w[1]) {
                continue;
            }
            let mut row: Vec<(usize, f64)> =
                self.indices[a..b].iter().copied().zip(self.values[a..b].iter().copied()).collect();
            row.sort_by_key(|e| e.0);
            for (k, (c, v)) in row.into_iter().enumerate() {
                self.indices[a + k] = c;
                self.values[a + k] = v;
            }
        }
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.nrows {
            for &c in self.row(i).0 {
                if c < i {
                    kl = kl.max(i - c);
                } else {
                    ku = ku.max(c - i);
                }
            }
        }
        (kl, ku)
    }

    /// Same structure with every stored value set to one.
    pub fn pattern(&self) -> Self {
        let mut p = self.clone();
        p.values.iter_mut().for_each(|v| *v = 1.0);
        p
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                d[(i, c)] += v;
            }
        }
        d
    }

    /// Symmetric permutation `P A Pᵀ` where row `i` moves to `perm[i]`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> Result<Self> {
        check_len(self.nrows, perm.len())?;
        let mut trip = Vec::with_capacity(self.nnz());
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                trip.push((perm[i], perm[c], v));
            }
        }
        Self::from_triplets(self.nrows, self.ncols, &trip)
    }
}

/// Sentinel for "not in this index set" in dense global-to-local maps.
pub const NOT_LOCAL: u32 = u32::MAX;
