//! Sparse and dense kernels and an instrumented GMRES.

mod csr;
pub mod dense;
mod gmres;
mod lu;

pub use csr::{CsrMatrix, NOT_LOCAL};
pub use gmres::{gmres, stored_basis_bytes, ArnoldiRecord, FnOperator, GmresOptions, GmresResult, LinearOperator};
pub use lu::{BandLU, DenseLU, LuFactor};
