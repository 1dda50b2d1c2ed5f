//! Structured grids, overlapping decompositions, transfer operators and the
//! algebraic skeleton.

mod grid;
mod partition;
mod skeleton;
mod transfer;

use serde::{Deserialize, Serialize};

pub use grid::{build_grid, CartesianGrid};
pub use partition::{partition_overlapping, split_axis, Decomposition};
pub use skeleton::{compute_skeleton, skeleton_from_sets, Skeleton};
pub use transfer::{build_transfer_operators, SubdomainMap, TransferOps};

use crate::error::Result;
use crate::linalg::CsrMatrix;

/// Decomposition with its transfer operators and skeleton, shared by all solvers.
#[derive(Debug, Clone)]
pub struct Layout {
    pub decomposition: Decomposition,
    pub transfer: TransferOps,
    pub skeleton: Skeleton,
}

impl Layout {
    pub fn new(decomposition: Decomposition, pattern: &CsrMatrix) -> Result<Self> {
        let transfer = build_transfer_operators(&decomposition);
        let skeleton = compute_skeleton(&transfer, pattern)?;
        Ok(Self { decomposition, transfer, skeleton })
    }

    pub fn build(grid: &CartesianGrid, counts: &[usize], overlap_layers: usize, pattern: &CsrMatrix) -> Result<Self> {
        Self::new(partition_overlapping(grid, counts, overlap_layers)?, pattern)
    }

    pub fn grid(&self) -> &CartesianGrid {
        self.decomposition.grid()
    }

    pub fn n_global(&self) -> usize {
        self.transfer.n_global()
    }

    pub fn num_subdomains(&self) -> usize {
        self.transfer.num_subdomains()
    }

    pub fn summary(&self) -> DecompositionSummary {
        DecompositionSummary {
            n_v: self.n_global(),
            n: self.num_subdomains(),
            overlap_layers: self.decomposition.overlap_layers(),
            subdomain_sizes: self.transfer.subdomains().iter().map(|m| m.len()).collect(),
            n_bar: self.skeleton.len(),
            skeleton: self.skeleton.indices().to_vec(),
        }
    }
}

/// JSON export of a decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSummary {
    #[serde(rename = "N_v")]
    pub n_v: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub overlap_layers: usize,
    pub subdomain_sizes: Vec<usize>,
    #[serde(rename = "N_bar")]
    pub n_bar: usize,
    #[serde(rename = "K")]
    pub skeleton: Vec<usize>,
}
