//! Model problems: Poisson, 1D Forchheimer and 2D nonlinear diffusion.

mod forchheimer;
mod nldiffusion;
mod poisson;
mod spec;

pub use forchheimer::{forchheimer_dq, forchheimer_q, Forchheimer};
pub use nldiffusion::{manufactured_forcing, manufactured_solution, NonlinearDiffusion};
pub use poisson::{assemble_poisson, assemble_poisson_with_forcing};
pub use spec::{BuiltProblem, ProblemSpec};
