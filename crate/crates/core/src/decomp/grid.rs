use serde::{Deserialize, Serialize};

use crate::error::{DdError, Result};

/// Structured grid of interior unknowns with lexicographic numbering,
/// axis 0 running fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianGrid {
    points: Vec<usize>,
    h: f64,
}

pub fn build_grid(dim: usize, points_per_axis: &[usize], h: f64) -> Result<CartesianGrid> {
    if !(1..=3).contains(&dim) {
        return Err(DdError::InvalidArgument(format!("dimension must be 1, 2 or 3, got {dim}")));
    }
    if points_per_axis.len() != dim {
        return Err(DdError::InvalidArgument(format!(
            "expected {dim} axis counts, got {}",
            points_per_axis.len()
        )));
    }
    if points_per_axis.contains(&0) {
        return Err(DdError::InvalidArgument("axis point count must be at least 1".into()));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(DdError::InvalidArgument(format!("mesh spacing must be positive, got {h}")));
    }
    Ok(CartesianGrid { points: points_per_axis.to_vec(), h })
}

impl CartesianGrid {
    pub fn dim(&self) -> usize {
        self.points.len()
    }

    pub fn points_per_axis(&self) -> &[usize] {
        &self.points
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_unknowns(&self) -> usize {
        self.points.iter().product()
    }

    /// Stride of `axis` in the global numbering.
    pub fn stride(&self, axis: usize) -> usize {
        self.points[..axis].iter().product()
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        coords.iter().enumerate().map(|(a, &c)| c * self.stride(a)).sum()
    }

    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0; 3];
        for (a, &n) in self.points.iter().enumerate() {
            c[a] = idx % n;
            idx /= n;
        }
        c
    }

    /// Physical coordinate of a grid point on the unit cube, `(i + 1) h` per axis.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut x = [0.0; 3];
        for a in 0..self.dim() {
            x[a] = (c[a] + 1) as f64 * self.h;
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_counts() {
        assert_eq!(build_grid(1, &[9], 0.1).unwrap().num_unknowns(), 9);
        assert_eq!(build_grid(2, &[83, 83], 0.012).unwrap().num_unknowns(), 6889);
        assert_eq!(build_grid(3, &[30, 30, 30], 1.0 / 31.0).unwrap().num_unknowns(), 27000);
    }

    #[test]
    fn invalid_arguments() {
        assert!(build_grid(2, &[4, 0], 0.1).is_err());
        assert!(build_grid(4, &[1, 1, 1, 1], 0.1).is_err());
        assert!(build_grid(1, &[3], 0.0).is_err());
        assert!(build_grid(2, &[3], 0.1).is_err());
    }

    #[test]
    fn numbering_is_bijective() {
        let g = build_grid(3, &[4, 3, 5], 0.1).unwrap();
        let mut seen = vec![false; g.num_unknowns()];
        for z in 0..5 {
            for y in 0..3 {
                for x in 0..4 {
                    let i = g.index(&[x, y, z]);
                    assert!(!seen[i]);
                    seen[i] = true;
                    assert_eq!(&g.coords(i)[..3], &[x, y, z]);
                }
            }
        }
        assert!(seen.iter().all(|&s| s));
    }
}
