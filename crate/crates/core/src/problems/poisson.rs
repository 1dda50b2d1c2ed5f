use crate::decomp::CartesianGrid;
use crate::linalg::CsrMatrix;

/// Standard (2d+1)-point Laplacian scaled by `1/h²` with homogeneous Dirichlet
/// conditions and a constant right-hand side.
pub fn assemble_poisson(grid: &CartesianGrid) -> (CsrMatrix, Vec<f64>) {
    assemble_poisson_with_forcing(grid, 1.0)
}

pub fn assemble_poisson_with_forcing(grid: &CartesianGrid, forcing: f64) -> (CsrMatrix, Vec<f64>) {
    let n = grid.num_unknowns();
    let dim = grid.dim();
    let s = 1.0 / (grid.h() * grid.h());
    let mut trip = Vec::with_capacity(n * (2 * dim + 1));
    for k in 0..n {
        let c = grid.coords(k);
        trip.push((k, k, 2.0 * dim as f64 * s));
        for a in 0..dim {
            let stride = grid.stride(a);
            if c[a] > 0 {
                trip.push((k, k - stride, -s));
            }
            if c[a] + 1 < grid.points_per_axis()[a] {
                trip.push((k, k + stride, -s));
            }
        }
    }
    let a = CsrMatrix::from_triplets(n, n, &trip).expect("stencil stays on the grid");
    (a, vec![forcing; n])
}
