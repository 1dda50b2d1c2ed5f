use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::decomp::{build_grid, CartesianGrid};
use crate::error::{DdError, Result};
use crate::linalg::CsrMatrix;
use crate::nonlinear_schwarz::{LinearProblem, NonlinearProblem};

use super::{assemble_poisson_with_forcing, Forchheimer, NonlinearDiffusion};

fn one() -> f64 {
    1.0
}

fn euler() -> f64 {
    E
}

/// Serializable description of a model problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Laplacian on `(0,1)^d` with homogeneous Dirichlet data; `h` defaults to
    /// `1/(n+1)` of the first axis.
    Poisson {
        points: Vec<usize>,
        #[serde(default)]
        h: Option<f64>,
        #[serde(default = "one")]
        forcing: f64,
    },
    /// Cell-centered finite volumes for `(q(−λu′))′ = f` on `(0,1)`.
    /// Without samples `λ(x) = 2 + cos(5πx)`; samples are interpolated
    /// linearly on a uniform grid of `[0,1]`.
    Forchheimer {
        cells: usize,
        #[serde(default = "one")]
        gamma: f64,
        #[serde(default = "one")]
        u_left: f64,
        #[serde(default = "euler")]
        u_right: f64,
        #[serde(default)]
        lambda_samples: Option<Vec<f64>>,
    },
    /// `−∇·((1+u²)∇u) = f` on the unit square with `u = sin(πx) sin(πy)`.
    Nldiffusion { points: usize },
}

/// A model problem ready to be solved.
pub enum BuiltProblem {
    Poisson { grid: CartesianGrid, problem: LinearProblem },
    Forchheimer(Forchheimer),
    Nldiffusion(NonlinearDiffusion),
}

fn sample_linear(samples: &[f64], x: f64) -> f64 {
    if samples.len() == 1 {
        return samples[0];
    }
    let t = x.clamp(0.0, 1.0) * (samples.len() - 1) as f64;
    let i = (t.floor() as usize).min(samples.len() - 2);
    let w = t - i as f64;
    (1.0 - w) * samples[i] + w * samples[i + 1]
}

impl ProblemSpec {
    pub fn id(&self) -> &'static str {
        match self {
            Self::Poisson { .. } => "poisson",
            Self::Forchheimer { .. } => "forchheimer",
            Self::Nldiffusion { .. } => "nldiffusion",
        }
    }

    pub fn build(&self) -> Result<BuiltProblem> {
        Ok(match self {
            Self::Poisson { points, h, forcing } => {
                let first = *points.first().ok_or_else(|| DdError::Config("poisson needs at least one axis".into()))?;
                let h = h.unwrap_or(1.0 / (first as f64 + 1.0));
                let grid = build_grid(points.len(), points, h)?;
                let (a, f) = assemble_poisson_with_forcing(&grid, *forcing);
                BuiltProblem::Poisson { grid, problem: LinearProblem::new(a, f) }
            }
            Self::Forchheimer { cells, gamma, u_left, u_right, lambda_samples } => {
                let forcing = |x: f64| 50.0 * (5.0 * std::f64::consts::PI * x).sin() * x.exp();
                let p = match lambda_samples {
                    None => Forchheimer::new(*cells, *gamma, *u_left, *u_right, |x| 2.0 + (5.0 * std::f64::consts::PI * x).cos(), forcing)?,
                    Some(s) if s.is_empty() => return Err(DdError::Config("lambda_samples must not be empty".into())),
                    Some(s) => Forchheimer::new(*cells, *gamma, *u_left, *u_right, |x| sample_linear(s, x), forcing)?,
                };
                BuiltProblem::Forchheimer(p)
            }
            Self::Nldiffusion { points } => BuiltProblem::Nldiffusion(NonlinearDiffusion::new(*points)?),
        })
    }
}

impl BuiltProblem {
    pub fn grid(&self) -> &CartesianGrid {
        match self {
            Self::Poisson { grid, .. } => grid,
            Self::Forchheimer(p) => p.grid(),
            Self::Nldiffusion(p) => p.grid(),
        }
    }

    pub fn nonlinear(&self) -> &dyn NonlinearProblem {
        match self {
            Self::Poisson { problem, .. } => problem,
            Self::Forchheimer(p) => p,
            Self::Nldiffusion(p) => p,
        }
    }

    /// `(A, f)` for linear problems.
    pub fn linear(&self) -> Option<(&CsrMatrix, &[f64])> {
        match self {
            Self::Poisson { problem, .. } => Some((&problem.a, &problem.f)),
            _ => None,
        }
    }
}
