use serde::{Deserialize, Serialize};

use super::grid::CartesianGrid;
use crate::error::{DdError, Result};

/// Nonoverlapping block partition of a grid and its overlapping extension.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Decomposition {
    grid: CartesianGrid,
    counts: Vec<usize>,
    overlap_layers: usize,
    nonoverlap_sets: Vec<Vec<usize>>,
    overlap_sets: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

/// Splits `n` cells into `c` contiguous blocks; the remainder goes one cell
/// per block to the trailing blocks.
pub fn split_axis(n: usize, c: usize) -> Result<Vec<(usize, usize)>> {
    if c == 0 || c > n {
        return Err(DdError::InvalidArgument(format!("cannot split {n} points into {c} blocks")));
    }
    let base = n / c;
    let rem = n % c;
    let mut out = Vec::with_capacity(c);
    let mut start = 0;
    for b in 0..c {
        let len = base + usize::from(b >= c - rem);
        out.push((start, start + len));
        start += len;
    }
    Ok(out)
}

fn box_indices(grid: &CartesianGrid, lo: &[usize], hi: &[usize]) -> Vec<usize> {
    // iterate with axis 0 fastest so the output is sorted
    let dim = grid.dim();
    let mut out = Vec::new();
    let mut c = lo.to_vec();
    if (0..dim).any(|a| lo[a] >= hi[a]) {
        return out;
    }
    loop {
        out.push(grid.index(&c));
        let mut a = 0;
        loop {
            c[a] += 1;
            if c[a] < hi[a] {
                break;
            }
            c[a] = lo[a];
            a += 1;
            if a == dim {
                return out;
            }
        }
    }
}

pub fn partition_overlapping(grid: &CartesianGrid, counts_per_axis: &[usize], overlap_layers: usize) -> Result<Decomposition> {
    let dim = grid.dim();
    if counts_per_axis.len() != dim {
        return Err(DdError::InvalidArgument(format!(
            "expected {dim} subdomain counts, got {}",
            counts_per_axis.len()
        )));
    }
    if overlap_layers == 0 {
        return Err(DdError::InvalidArgument("overlap must be at least one layer".into()));
    }
    let splits: Vec<Vec<(usize, usize)>> = counts_per_axis
        .iter()
        .zip(grid.points_per_axis())
        .map(|(&c, &n)| split_axis(n, c))
        .collect::<Result<_>>()?;
    for (a, s) in splits.iter().enumerate() {
        if s.len() > 1 {
            let smallest = s.iter().map(|(lo, hi)| hi - lo).min().unwrap();
            if overlap_layers >= smallest {
                return Err(DdError::InvalidArgument(format!(
                    "overlap of {overlap_layers} layers swallows a block of {smallest} points on axis {a}"
                )));
            }
        }
    }

    let n_sub: usize = counts_per_axis.iter().product();
    let mut nonoverlap_sets = Vec::with_capacity(n_sub);
    let mut overlap_sets = Vec::with_capacity(n_sub);
    let mut owner = vec![usize::MAX; grid.num_unknowns()];
    for j in 0..n_sub {
        let mut rem = j;
        let mut lo = vec![0; dim];
        let mut hi = vec![0; dim];
        let mut olo = vec![0; dim];
        let mut ohi = vec![0; dim];
        for a in 0..dim {
            let b = rem % counts_per_axis[a];
            rem /= counts_per_axis[a];
            let (l, h) = splits[a][b];
            lo[a] = l;
            hi[a] = h;
            olo[a] = l.saturating_sub(overlap_layers);
            ohi[a] = (h + overlap_layers).min(grid.points_per_axis()[a]);
        }
        let own = box_indices(grid, &lo, &hi);
        for &k in &own {
            owner[k] = j;
        }
        nonoverlap_sets.push(own);
        overlap_sets.push(box_indices(grid, &olo, &ohi));
    }
    Ok(Decomposition {
        grid: grid.clone(),
        counts: counts_per_axis.to_vec(),
        overlap_layers,
        nonoverlap_sets,
        overlap_sets,
        owner,
    })
}

impl Decomposition {
    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn num_subdomains(&self) -> usize {
        self.overlap_sets.len()
    }

    pub fn counts_per_axis(&self) -> &[usize] {
        &self.counts
    }

    pub fn overlap_layers(&self) -> usize {
        self.overlap_layers
    }

    pub fn nonoverlap_set(&self, j: usize) -> &[usize] {
        &self.nonoverlap_sets[j]
    }

    pub fn overlap_set(&self, j: usize) -> &[usize] {
        &self.overlap_sets[j]
    }

    pub fn overlap_sets(&self) -> &[Vec<usize>] {
        &self.overlap_sets
    }

    pub fn owner(&self, k: usize) -> usize {
        self.owner[k]
    }

    pub fn owners(&self) -> &[usize] {
        &self.owner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::build_grid;

    #[test]
    fn one_d_two_subdomains() {
        let g = build_grid(1, &[9], 0.1).unwrap();
        let d = partition_overlapping(&g, &[2], 1).unwrap();
        assert_eq!(d.nonoverlap_set(0), &[0, 1, 2, 3]);
        assert_eq!(d.nonoverlap_set(1), &[4, 5, 6, 7, 8]);
        assert_eq!(d.overlap_set(0), &[0, 1, 2, 3, 4]);
        assert_eq!(d.overlap_set(1), &[3, 4, 5, 6, 7, 8]);
    }

    #[test]
    fn twenty_subdomains_overlap_eight_cells() {
        let g = build_grid(1, &[999], 1e-3).unwrap();
        let d = partition_overlapping(&g, &[20], 4).unwrap();
        assert_eq!(d.num_subdomains(), 20);
        for j in 0..19 {
            let a = d.overlap_set(j);
            let b = d.overlap_set(j + 1);
            let common = a.iter().filter(|k| b.binary_search(k).is_ok()).count();
            assert_eq!(common, 8);
        }
    }

    #[test]
    fn single_subdomain_is_whole_grid() {
        let g = build_grid(2, &[5, 4], 0.1).unwrap();
        let d = partition_overlapping(&g, &[1, 1], 3).unwrap();
        let all: Vec<usize> = (0..20).collect();
        assert_eq!(d.overlap_set(0), &all[..]);
        assert_eq!(d.nonoverlap_set(0), &all[..]);
    }

    #[test]
    fn remainder_goes_to_trailing_blocks() {
        assert_eq!(split_axis(10, 3).unwrap(), vec![(0, 3), (3, 6), (6, 10)]);
        assert_eq!(split_axis(11, 3).unwrap(), vec![(0, 3), (3, 7), (7, 11)]);
    }

    #[test]
    fn swallowing_overlap_rejected() {
        let g = build_grid(1, &[9], 0.1).unwrap();
        assert!(partition_overlapping(&g, &[3], 3).is_err());
        assert!(partition_overlapping(&g, &[2], 0).is_err());
        assert!(partition_overlapping(&g, &[10], 1).is_err());
    }

    #[test]
    fn two_d_sets_cover_and_are_disjoint() {
        let g = build_grid(2, &[11, 7], 0.1).unwrap();
        let d = partition_overlapping(&g, &[3, 2], 2).unwrap();
        let mut count = vec![0; 77];
        for j in 0..6 {
            for &k in d.nonoverlap_set(j) {
                count[k] += 1;
                assert_eq!(d.owner(k), j);
            }
            let ov = d.overlap_set(j);
            assert!(ov.windows(2).all(|w| w[0] < w[1]));
            assert!(d.nonoverlap_set(j).iter().all(|k| ov.binary_search(k).is_ok()));
        }
        assert!(count.iter().all(|&c| c == 1));
    }
}
