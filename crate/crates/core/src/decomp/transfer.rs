use super::partition::Decomposition;
use crate::linalg::NOT_LOCAL;

/// Index maps realizing `R_j`, `P_j` and the restricted prolongation `P̃_j`
/// of one overlapping subdomain.
#[derive(Debug, Clone)]
pub struct SubdomainMap {
    indices: Vec<usize>,
    owned: Vec<bool>,
    local_of: Vec<u32>,
}

impl SubdomainMap {
    pub fn new(indices: Vec<usize>, owned: Vec<bool>, n_global: usize) -> Self {
        let mut local_of = vec![NOT_LOCAL; n_global];
        for (l, &k) in indices.iter().enumerate() {
            local_of[k] = l as u32;
        }
        Self { indices, owned, local_of }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Global indices selected by `R_j`, ascending.
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn owned(&self) -> &[bool] {
        &self.owned
    }

    /// Dense global-to-local map, `NOT_LOCAL` outside the subdomain.
    pub fn local_of(&self) -> &[u32] {
        &self.local_of
    }

    pub fn contains(&self, k: usize) -> bool {
        self.local_of[k] != NOT_LOCAL
    }

    /// `R_j u`.
    pub fn restrict(&self, u: &[f64]) -> Vec<f64> {
        self.indices.iter().map(|&k| u[k]).collect()
    }

    /// `P_j w`: extension by zero.
    pub fn prolong(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.local_of.len()];
        for (&k, &v) in self.indices.iter().zip(w) {
            out[k] = v;
        }
        out
    }

    /// Overwrites the subdomain entries of `u` with `w`: `P_j w + (I - P_j R_j) u`.
    pub fn replace_into(&self, w: &[f64], u: &mut [f64]) {
        for (&k, &v) in self.indices.iter().zip(w) {
            u[k] = v;
        }
    }

    /// `out += P̃_j w`: only owned entries are written.
    pub fn restricted_prolong_add(&self, w: &[f64], out: &mut [f64]) {
        for ((&k, &v), &own) in self.indices.iter().zip(w).zip(&self.owned) {
            if own {
                out[k] += v;
            }
        }
    }
}

/// Transfer operators of all subdomains.
#[derive(Debug, Clone)]
pub struct TransferOps {
    n_global: usize,
    maps: Vec<SubdomainMap>,
}

pub fn build_transfer_operators(decomposition: &Decomposition) -> TransferOps {
    let n = decomposition.grid().num_unknowns();
    let maps = (0..decomposition.num_subdomains())
        .map(|j| {
            let idx = decomposition.overlap_set(j).to_vec();
            let owned = idx.iter().map(|&k| decomposition.owner(k) == j).collect();
            SubdomainMap::new(idx, owned, n)
        })
        .collect();
    TransferOps { n_global: n, maps }
}

impl TransferOps {
    pub fn from_maps(n_global: usize, maps: Vec<SubdomainMap>) -> Self {
        Self { n_global, maps }
    }

    pub fn n_global(&self) -> usize {
        self.n_global
    }

    pub fn num_subdomains(&self) -> usize {
        self.maps.len()
    }

    pub fn subdomain(&self, j: usize) -> &SubdomainMap {
        &self.maps[j]
    }

    pub fn subdomains(&self) -> &[SubdomainMap] {
        &self.maps
    }

    /// Exact integer check of `Σ_j P̃_j R_j = I`: every unknown owned exactly once,
    /// and only from a subdomain that contains it.
    pub fn partition_of_unity_holds(&self) -> bool {
        let mut count = vec![0u32; self.n_global];
        for m in &self.maps {
            for (&k, &own) in m.indices.iter().zip(&m.owned) {
                if own {
                    count[k] += 1;
                }
            }
        }
        count.iter().all(|&c| c == 1)
    }

    /// Exact check of `R_j P_j = I` on every subdomain.
    pub fn restriction_inverts_prolongation(&self) -> bool {
        self.maps.iter().all(|m| {
            let w: Vec<f64> = (0..m.len()).map(|l| l as f64 + 1.0).collect();
            m.restrict(&m.prolong(&w)) == w
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{build_grid, partition_overlapping};

    #[test]
    fn restricted_prolongation_injects_owned_only() {
        let g = build_grid(1, &[9], 0.1).unwrap();
        let d = partition_overlapping(&g, &[2], 1).unwrap();
        let t = build_transfer_operators(&d);
        let m = t.subdomain(0);
        assert_eq!(m.indices(), &[0, 1, 2, 3, 4]);
        let mut out = vec![0.0; 9];
        m.restricted_prolong_add(&[1.0; 5], &mut out);
        assert_eq!(out, vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_subdomain_identity() {
        let g = build_grid(2, &[4, 3], 0.1).unwrap();
        let d = partition_overlapping(&g, &[1, 1], 1).unwrap();
        let t = build_transfer_operators(&d);
        let u: Vec<f64> = (0..12).map(|i| i as f64).collect();
        let m = t.subdomain(0);
        assert_eq!(m.prolong(&m.restrict(&u)), u);
        let mut out = vec![0.0; 12];
        m.restricted_prolong_add(&m.restrict(&u), &mut out);
        assert_eq!(out, u);
    }

    #[test]
    fn partition_of_unity_on_ones() {
        let g = build_grid(2, &[13, 9], 0.1).unwrap();
        let d = partition_overlapping(&g, &[3, 2], 2).unwrap();
        let t = build_transfer_operators(&d);
        assert!(t.partition_of_unity_holds());
        assert!(t.restriction_inverts_prolongation());
        let ones = vec![1.0; 117];
        let mut out = vec![0.0; 117];
        for m in t.subdomains() {
            m.restricted_prolong_add(&m.restrict(&ones), &mut out);
        }
        assert_eq!(out, ones);
    }
}
