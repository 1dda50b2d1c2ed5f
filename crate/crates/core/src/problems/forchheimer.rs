//! Cell-centered finite volumes for the 1D Forchheimer equation
//! `(q(-λ u'))' = f` on (0, 1) with Dirichlet data.

use std::f64::consts::{E, PI};

use crate::decomp::{build_grid, CartesianGrid};
use crate::error::{check_len, DdError, Result};
use crate::linalg::CsrMatrix;
use crate::nonlinear_schwarz::NonlinearProblem;

/// `q(y) = sign(y) (-1 + sqrt(1 + 4γ|y|)) / (2γ)`, written in the
/// cancellation-free form `2y / (1 + sqrt(1 + 4γ|y|))`.
pub fn forchheimer_q(y: f64, gamma: f64) -> f64 {
    2.0 * y / (1.0 + (1.0 + 4.0 * gamma * y.abs()).sqrt())
}

pub fn forchheimer_dq(y: f64, gamma: f64) -> f64 {
    1.0 / (1.0 + 4.0 * gamma * y.abs()).sqrt()
}

#[derive(Debug, Clone)]
pub struct Forchheimer {
    grid: CartesianGrid,
    gamma: f64,
    u_left: f64,
    u_right: f64,
    /// Permeability on the n+1 faces; faces 0 and n are the boundary.
    lambda_face: Vec<f64>,
    /// Distance between the unknowns a face couples (h/2 on boundary faces).
    face_dist: Vec<f64>,
    f: Vec<f64>,
}

impl Forchheimer {
    /// Setup with `λ(x) = 2 + cos(5πx)`, `f(x) = 50 sin(5πx) eˣ`, `u(0) = 1`, `u(1) = e`.
    pub fn standard(cells: usize, gamma: f64) -> Result<Self> {
        Self::new(cells, gamma, 1.0, E, |x| 2.0 + (5.0 * PI * x).cos(), |x| 50.0 * (5.0 * PI * x).sin() * x.exp())
    }

    pub fn new(
        cells: usize,
        gamma: f64,
        u_left: f64,
        u_right: f64,
        lambda: impl Fn(f64) -> f64,
        forcing: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if !(gamma > 0.0) {
            return Err(DdError::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        let h = 1.0 / cells as f64;
        let grid = build_grid(1, &[cells], h)?;
        let centers: Vec<f64> = (0..cells).map(|i| (i as f64 + 0.5) * h).collect();
        let mut lambda_face = Vec::with_capacity(cells + 1);
        let mut face_dist = Vec::with_capacity(cells + 1);
        lambda_face.push(lambda(0.0));
        face_dist.push(0.5 * h);
        for i in 1..cells {
            lambda_face.push(0.5 * (lambda(centers[i - 1]) + lambda(centers[i])));
            face_dist.push(h);
        }
        lambda_face.push(lambda(1.0));
        face_dist.push(0.5 * h);
        if lambda_face.iter().any(|&l| !(l > 0.0)) {
            return Err(DdError::InvalidArgument("permeability must be positive on all faces".into()));
        }
        let f = centers.iter().map(|&x| forcing(x)).collect();
        Ok(Self { grid, gamma, u_left, u_right, lambda_face, face_dist, f })
    }

    pub fn grid(&self) -> &CartesianGrid {
        &self.grid
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    fn n(&self) -> usize {
        self.grid.num_unknowns()
    }

    /// Values left and right of face `i`.
    #[inline]
    fn face_values(&self, u: &[f64], i: usize) -> (f64, f64) {
        let n = self.n();
        let left = if i == 0 { self.u_left } else { u[i - 1] };
        let right = if i == n { self.u_right } else { u[i] };
        (left, right)
    }

    #[inline]
    fn face_arg(&self, u: &[f64], i: usize) -> f64 {
        let (l, r) = self.face_values(u, i);
        -self.lambda_face[i] * (r - l) / self.face_dist[i]
    }

    /// Linear (Darcy) operator obtained in the limit γ → 0.
    pub fn darcy_operator(&self) -> (CsrMatrix, Vec<f64>) {
        let n = self.n();
        let h = self.grid.h();
        let mut trip = Vec::new();
        let mut rhs = self.f.clone();
        for i in 0..n {
            let wl = self.lambda_face[i] / self.face_dist[i] / h;
            let wr = self.lambda_face[i + 1] / self.face_dist[i + 1] / h;
            trip.push((i, i, wl + wr));
            if i > 0 {
                trip.push((i, i - 1, -wl));
            } else {
                rhs[i] += wl * self.u_left;
            }
            if i + 1 < n {
                trip.push((i, i + 1, -wr));
            } else {
                rhs[i] += wr * self.u_right;
            }
        }
        (CsrMatrix::from_triplets(n, n, &trip).expect("tridiagonal"), rhs)
    }
}

impl NonlinearProblem for Forchheimer {
    fn size(&self) -> usize {
        self.n()
    }

    fn residual_rows(&self, u: &[f64], rows: &[usize], out: &mut [f64]) -> Result<()> {
        check_len(self.n(), u.len())?;
        let h = self.grid.h();
        for (o, &i) in out.iter_mut().zip(rows) {
            let yl = self.face_arg(u, i);
            let yr = self.face_arg(u, i + 1);
            if !(yl.is_finite() && yr.is_finite()) {
                return Err(DdError::NonFinite);
            }
            *o = (forchheimer_q(yr, self.gamma) - forchheimer_q(yl, self.gamma)) / h - self.f[i];
        }
        Ok(())
    }

    fn jacobian_rows(&self, u: &[f64], rows: &[usize]) -> Result<CsrMatrix> {
        check_len(self.n(), u.len())?;
        let n = self.n();
        let h = self.grid.h();
        let mut trip = Vec::with_capacity(3 * rows.len());
        for (r, &i) in rows.iter().enumerate() {
            let yl = self.face_arg(u, i);
            let yr = self.face_arg(u, i + 1);
            if !(yl.is_finite() && yr.is_finite()) {
                return Err(DdError::NonFinite);
            }
            let wl = forchheimer_dq(yl, self.gamma) * self.lambda_face[i] / self.face_dist[i] / h;
            let wr = forchheimer_dq(yr, self.gamma) * self.lambda_face[i + 1] / self.face_dist[i + 1] / h;
            if i > 0 {
                trip.push((r, i - 1, -wl));
            }
            trip.push((r, i, wl + wr));
            if i + 1 < n {
                trip.push((r, i + 1, -wr));
            }
        }
        CsrMatrix::from_triplets(rows.len(), n, &trip)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        assert_eq!(forchheimer_q(0.0, 1.0), 0.0);
        assert!((forchheimer_q(2.0, 1.0) - 1.0).abs() < 1e-15);
        assert!((forchheimer_q(-2.0, 1.0) + 1.0).abs() < 1e-15);
        let direct = |y: f64, g: f64| y.signum() * (-1.0 + (1.0 + 4.0 * g * y.abs()).sqrt()) / (2.0 * g);
        for &y in &[-7.5, -0.3, 0.01, 1.0, 40.0] {
            assert!((forchheimer_q(y, 0.7) - direct(y, 0.7)).abs() < 1e-13);
        }
    }

    #[test]
    fn small_gamma_reduces_to_darcy() {
        let p = Forchheimer::new(50, 1e-10, 1.0, E, |x| 2.0 + (5.0 * PI * x).cos(), |x| 50.0 * (5.0 * PI * x).sin() * x.exp())
            .unwrap();
        let (a, rhs) = p.darcy_operator();
        let u: Vec<f64> = (0..50).map(|i| 1.0 + (i as f64 * 0.1).sin()).collect();
        let r = p.residual(&u).unwrap();
        let au = a.matvec(&u).unwrap();
        let scale = au.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..50 {
            assert!((r[i] - (au[i] - rhs[i])).abs() <= 1e-6 * scale, "row {i}");
        }
    }

    #[test]
    fn non_finite_rejected() {
        let p = Forchheimer::standard(10, 1.0).unwrap();
        let mut u = vec![0.0; 10];
        u[3] = f64::NAN;
        assert!(matches!(p.residual(&u), Err(DdError::NonFinite)));
    }
}
