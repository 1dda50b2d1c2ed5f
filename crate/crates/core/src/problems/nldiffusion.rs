//! Finite differences for `-∇·((1 + u²)∇u) = f` on the unit square with the
//! manufactured solution `u = sin(πx) sin(πy)`.

use std::f64::consts::PI;

use crate::decomp::{build_grid, CartesianGrid};
use crate::error::{check_len, DdError, Result};
use crate::linalg::CsrMatrix;
use crate::nonlinear_schwarz::NonlinearProblem;

pub fn manufactured_solution(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// Right-hand side obtained by substituting the manufactured solution.
pub fn manufactured_forcing(x: f64, y: f64) -> f64 {
    let (sx, cx) = (PI * x).sin_cos();
    let (sy, cy) = (PI * y).sin_cos();
    let u = sx * sy;
    let grad2 = PI * PI * (cx * cx * sy * sy + sx * sx * cy * cy);
    2.0 * PI * PI * u * (1.0 + u * u) - 2.0 * u * grad2
}

#[derive(Debug, Clone)]
pub struct NonlinearDiffusion {
    grid: CartesianGrid,
    f: Vec<f64>,
}

impl NonlinearDiffusion {
    /// `points` interior nodes per axis, `h = 1/(points + 1)`.
    pub fn new(points: usize) -> Result<Self> {
        let h = 1.0 / (points + 1) as f64;
        let grid = build_grid(2, &[points, points], h)?;
        let f = (0..grid.num_unknowns())
            .map(|k| {
                let p = grid.position(k);
                manufactured_forcing(p[0], p[1])
            })
            .collect();
        Ok(Self { grid, f })
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    /// Manufactured solution sampled at the grid nodes.
    pub fn exact_solution(&self) -> Vec<f64> {
        (0..self.grid.num_unknowns())
            .map(|k| {
                let p = self.grid.position(k);
                manufactured_solution(p[0], p[1])
            })
            .collect()
    }

    /// Neighbor value in direction `(axis, ±1)`, `None` if it is Dirichlet data
    /// (the manufactured solution vanishes on the boundary).
    #[inline]
    fn neighbors(&self, k: usize) -> [(Option<usize>, f64); 4] {
        let c = self.grid.coords(k);
        let n = self.grid.points_per_axis();
        let mut out = [(None, 0.0); 4];
        for a in 0..2 {
            let s = self.grid.stride(a);
            out[2 * a] = if c[a] > 0 { (Some(k - s), 0.0) } else { (None, 0.0) };
            out[2 * a + 1] = if c[a] + 1 < n[a] { (Some(k + s), 0.0) } else { (None, 0.0) };
        }
        out
    }
}

impl NonlinearProblem for NonlinearDiffusion {
    fn size(&self) -> usize {
        self.grid.num_unknowns()
    }

    fn residual_rows(&self, u: &[f64], rows: &[usize], out: &mut [f64]) -> Result<()> {
        check_len(self.size(), u.len())?;
        let s = 1.0 / (self.grid.h() * self.grid.h());
        for (o, &k) in out.iter_mut().zip(rows) {
            let ui = u[k];
            let mut acc = 0.0;
            for (nb, g) in self.neighbors(k) {
                let un = nb.map_or(g, |m| u[m]);
                let kf = 1.0 + 0.5 * (ui * ui + un * un);
                acc += kf * (ui - un);
            }
            if !acc.is_finite() {
                return Err(DdError::NonFinite);
            }
            *o = s * acc - self.f[k];
        }
        Ok(())
    }

    fn jacobian_rows(&self, u: &[f64], rows: &[usize]) -> Result<CsrMatrix> {
        check_len(self.size(), u.len())?;
        let s = 1.0 / (self.grid.h() * self.grid.h());
        let mut trip = Vec::with_capacity(5 * rows.len());
        for (r, &k) in rows.iter().enumerate() {
            let ui = u[k];
            let mut diag = 0.0;
            for (nb, g) in self.neighbors(k) {
                let un = nb.map_or(g, |m| u[m]);
                let kf = 1.0 + 0.5 * (ui * ui + un * un);
                diag += kf + ui * (ui - un);
                if let Some(m) = nb {
                    trip.push((r, m, s * (un * (ui - un) - kf)));
                }
            }
            if !diag.is_finite() {
                return Err(DdError::NonFinite);
            }
            trip.push((r, k, s * diag));
        }
        CsrMatrix::from_triplets(rows.len(), self.size(), &trip)
    }
}
