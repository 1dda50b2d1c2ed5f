//! Overlapping domain decomposition solvers in volume and substructured form.
//!
//! The crate implements restricted additive Schwarz (RAS) and its substructured
//! counterpart (SRAS), which iterates only on the skeleton unknowns that a
//! Schwarz sweep actually reads, in three roles:
//!
//! * stationary iterative solvers ([`linear_schwarz`], [`nonlinear_schwarz`]),
//! * preconditioners for GMRES on linear systems ([`linear_schwarz`]),
//! * nonlinear preconditioners for Newton's method, RASPEN and SRASPEN
//!   ([`nonlinear_schwarz`]), plus FAS-based two-level variants ([`two_level`]).
//!
//! Model problems and the experiment runner live in [`problems`] and [`bench`].

pub mod bench;
pub mod decomp;
pub mod error;
pub mod history;
pub mod linalg;
pub mod linear_schwarz;
pub mod nonlinear_schwarz;
pub mod problems;
pub mod two_level;
pub mod verify;

pub use error::{DdError, Result};

pub mod prelude {
    pub use crate::decomp::{build_grid, CartesianGrid, Decomposition, Layout, Skeleton, TransferOps};
    pub use crate::error::{DdError, Result};
    pub use crate::linalg::{gmres, CsrMatrix, DenseLU, GmresOptions, GmresResult, LinearOperator};
    pub use crate::linear_schwarz::{LinearSchwarz, StationaryOptions, Variant};
    pub use crate::nonlinear_schwarz::{
        newton_outer, JacobianSolver, LocalNewtonOptions, NewtonMethod, NewtonOptions,
        NonlinearProblem, NonlinearSchwarz,
    };
    pub use crate::problems::{Forchheimer, NonlinearDiffusion, ProblemSpec};
    pub use crate::two_level::{newton_two_level, CoarseNewtonOptions, TwoLevel, TwoLevelMethod};
}
