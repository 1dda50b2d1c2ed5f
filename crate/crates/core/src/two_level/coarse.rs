//! Coarse spaces: every other grid point in volume, every other skeleton
//! point along skeleton lines in the substructured case.

use serde::{Deserialize, Serialize};

use crate::decomp::{CartesianGrid, Skeleton};
use crate::error::{check_len, DdError, Result};
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoarseKind {
    Volume,
    Substructured,
}

/// Coarse space with its interpolation `P` (fine × coarse) and restriction
/// `R` (coarse × fine).
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    kind: CoarseKind,
    prolongation: CsrMatrix,
    restriction: CsrMatrix,
    /// Fine index (grid index or skeleton position) of every coarse unknown.
    fine_of_coarse: Vec<usize>,
}

impl CoarseSpace {
    pub fn kind(&self) -> CoarseKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.prolongation.ncols()
    }

    pub fn n_fine(&self) -> usize {
        self.prolongation.nrows()
    }

    pub fn prolongation(&self) -> &CsrMatrix {
        &self.prolongation
    }

    pub fn restriction(&self) -> &CsrMatrix {
        &self.restriction
    }

    pub fn fine_of_coarse(&self) -> &[usize] {
        &self.fine_of_coarse
    }

    pub fn prolong(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.prolongation.matvec(y)
    }

    pub fn restrict(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.restriction.matvec(x)
    }
}

/// Linear interpolation from the odd points `1, 3, 5, …` of a line of `n`
/// points, with zero values beyond both ends.
fn interpolation_1d(n: usize) -> CsrMatrix {
    let m = n / 2;
    let mut trip = Vec::with_capacity(3 * m);
    for c in 0..m {
        let i = 2 * c + 1;
        trip.push((i - 1, c, 0.5));
        trip.push((i, c, 1.0));
        if i + 1 < n {
            trip.push((i + 1, c, 0.5));
        }
    }
    CsrMatrix::from_triplets(n, m, &trip).expect("indices in range")
}

/// Every-other-point coarse grid with linear interpolation and full weighting
/// `R₀ = P₀ᵀ / 2^d`.
pub fn build_volume_coarse(grid: &CartesianGrid) -> Result<CoarseSpace> {
    let pts = grid.points_per_axis();
    if let Some(&n) = pts.iter().find(|&&n| n < 3) {
        return Err(DdError::InvalidArgument(format!("coarse grid needs at least 3 points per axis, got {n}")));
    }
    // axis 0 runs fastest, so it is the innermost Kronecker factor
    let mut p = interpolation_1d(pts[0]);
    for &n in &pts[1..] {
        p = CsrMatrix::kron(&interpolation_1d(n), &p);
    }
    let scale = 0.5f64.powi(pts.len() as i32);
    let t = p.transpose();
    let trip: Vec<_> = (0..t.nrows())
        .flat_map(|i| {
            let (c, v) = t.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j, x * scale)).collect::<Vec<_>>()
        })
        .collect();
    let restriction = CsrMatrix::from_triplets(t.nrows(), t.ncols(), &trip)?;

    let coarse_pts: Vec<usize> = pts.iter().map(|n| n / 2).collect();
    let fine_of_coarse = (0..p.ncols())
        .map(|c| {
            let mut rem = c;
            let mut coords = [0usize; 3];
            for (a, &m) in coarse_pts.iter().enumerate() {
                coords[a] = 2 * (rem % m) + 1;
                rem /= m;
            }
            grid.index(&coords[..pts.len()])
        })
        .collect();
    Ok(CoarseSpace { kind: CoarseKind::Volume, prolongation: p, restriction, fine_of_coarse })
}

/// Maximal lines of consecutive skeleton points along each grid axis, as
/// lists of skeleton positions (lines of one point are dropped).
pub fn skeleton_runs(grid: &CartesianGrid, skeleton: &Skeleton) -> Vec<Vec<usize>> {
    let pts = grid.points_per_axis();
    let mut runs = Vec::new();
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        let n = pts[axis];
        for (s, &k) in skeleton.indices().iter().enumerate() {
            let c = grid.coords(k)[axis];
            let starts = c == 0 || skeleton.position(k - stride).is_none();
            if !starts {
                continue;
            }
            let mut run = vec![s];
            let mut kk = k;
            let mut cc = c;
            while cc + 1 < n {
                match skeleton.position(kk + stride) {
                    Some(p) => {
                        run.push(p);
                        kk += stride;
                        cc += 1;
                    }
                    None => break,
                }
            }
            if run.len() > 1 {
                runs.push(run);
            }
        }
    }
    runs
}

/// Coarse skeleton space. Along each skeleton line the points at odd
/// positions are coarse; points on two or more lines and points on none are
/// always coarse. Fine points take the linear interpolant of the nearest
/// coarse points on their line (the nearest one only at line ends).
/// `R̄₀` is `P̄₀ᵀ` with rows scaled to sum to one.
pub fn build_substructured_coarse(grid: &CartesianGrid, skeleton: &Skeleton) -> Result<CoarseSpace> {
    check_len(grid.num_unknowns(), skeleton.n_global())?;
    let nb = skeleton.len();
    if nb == 0 {
        return Err(DdError::InvalidArgument("empty skeleton has no coarse space".into()));
    }
    let runs = skeleton_runs(grid, skeleton);
    let mut count = vec![0usize; nb];
    // (run, position) of points lying on exactly one line
    let mut home = vec![(usize::MAX, 0usize); nb];
    for (r, run) in runs.iter().enumerate() {
        for (p, &s) in run.iter().enumerate() {
            count[s] += 1;
            home[s] = (r, p);
        }
    }
    let coarse: Vec<bool> = (0..nb).map(|s| count[s] != 1 || home[s].1 % 2 == 1).collect();
    let fine_of_coarse: Vec<usize> = (0..nb).filter(|&s| coarse[s]).collect();
    let mut coarse_of = vec![usize::MAX; nb];
    for (c, &s) in fine_of_coarse.iter().enumerate() {
        coarse_of[s] = c;
    }

    let mut trip = Vec::new();
    for s in 0..nb {
        if coarse[s] {
            trip.push((s, coarse_of[s], 1.0));
            continue;
        }
        let (r, p) = home[s];
        let run = &runs[r];
        let left = (0..p).rev().find(|&q| coarse[run[q]]);
        let right = (p + 1..run.len()).find(|&q| coarse[run[q]]);
        match (left, right) {
            (Some(l), Some(rr)) => {
                let (dl, dr) = ((p - l) as f64, (rr - p) as f64);
                trip.push((s, coarse_of[run[l]], dr / (dl + dr)));
                trip.push((s, coarse_of[run[rr]], dl / (dl + dr)));
            }
            (Some(q), None) | (None, Some(q)) => trip.push((s, coarse_of[run[q]], 1.0)),
            (None, None) => unreachable!("every line of two or more points has a coarse point"),
        }
    }
    let prolongation = CsrMatrix::from_triplets(nb, fine_of_coarse.len(), &trip)?;
    let t = prolongation.transpose();
    let mut rtrip = Vec::with_capacity(t.nnz());
    for i in 0..t.nrows() {
        let (c, v) = t.row(i);
        let sum: f64 = v.iter().sum();
        rtrip.extend(c.iter().zip(v).map(|(&j, &x)| (i, j, x / sum)));
    }
    let restriction = CsrMatrix::from_triplets(t.nrows(), t.ncols(), &rtrip)?;
    Ok(CoarseSpace { kind: CoarseKind::Substructured, prolongation, restriction, fine_of_coarse })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{build_grid, Layout};
    use crate::problems::assemble_poisson;

    #[test]
    fn nine_points_give_odd_coarse_points() {
        let g = build_grid(1, &[9], 0.1).unwrap();
        let c = build_volume_coarse(&g).unwrap();
        assert_eq!(c.dim(), 4);
        assert_eq!(c.fine_of_coarse(), &[1, 3, 5, 7]);
        let p = c.prolong(&[1.0; 4]).unwrap();
        assert_eq!(p, vec![0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.5]);
        // full weighting: (1/4, 1/2, 1/4)
        let r = c.restrict(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(r, vec![0.25, 0.25, 0.0, 0.0]);
    }

    #[test]
    fn square_grid_halves_each_axis() {
        let g = build_grid(2, &[83, 83], 0.012).unwrap();
        let c = build_volume_coarse(&g).unwrap();
        assert_eq!(c.dim(), 41 * 41);
        assert_eq!(c.fine_of_coarse()[42], g.index(&[3, 3]));
        assert!(build_volume_coarse(&build_grid(2, &[2, 9], 0.1).unwrap()).is_err());
    }

    #[test]
    fn line_of_eight_gives_four() {
        let g = build_grid(1, &[8], 0.1).unwrap();
        let sk = Skeleton::from_indices(8, (0..8).collect());
        let c = build_substructured_coarse(&g, &sk).unwrap();
        assert_eq!(c.dim(), 4);
        assert_eq!(c.fine_of_coarse(), &[1, 3, 5, 7]);
        let ones = c.prolong(&[1.0; 4]).unwrap();
        assert!(ones.iter().all(|&x| (x - 1.0).abs() < 1e-15));
        let back = c.restrict(&ones).unwrap();
        assert!(back.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }

    #[test]
    fn isolated_skeleton_points_stay_coarse() {
        let g = build_grid(1, &[99], 0.01).unwrap();
        let (a, _) = assemble_poisson(&g);
        let layout = Layout::build(&g, &[5], 2, &a).unwrap();
        let c = build_substructured_coarse(&g, &layout.skeleton).unwrap();
        assert_eq!(c.dim(), layout.skeleton.len());
    }

    #[test]
    fn four_subdomain_square_keeps_crosspoints() {
        let g = build_grid(2, &[21, 21], 1.0 / 22.0).unwrap();
        let (a, _) = assemble_poisson(&g);
        let layout = Layout::build(&g, &[2, 2], 2, &a).unwrap();
        let sk = &layout.skeleton;
        let c = build_substructured_coarse(&g, sk).unwrap();
        assert!(c.dim() * 2 >= sk.len() && c.dim() * 2 <= sk.len() + 16);
        for (s, &k) in sk.indices().iter().enumerate() {
            let runs = skeleton_runs(&g, sk).iter().filter(|r| r.contains(&s)).count();
            if runs > 1 {
                assert!(c.fine_of_coarse().contains(&s), "crosspoint {k} missing");
            }
        }
        let ones = c.prolong(&vec![1.0; c.dim()]).unwrap();
        assert!(ones.iter().all(|&x| (x - 1.0).abs() < 1e-15));
    }
}
