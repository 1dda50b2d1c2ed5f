use crate::error::Result;
use crate::linalg::CsrMatrix;

/// Discrete nonlinear system `F(u) = 0` evaluated row-wise so that subdomain
/// solves only touch their own rows.
pub trait NonlinearProblem: Sync {
    fn size(&self) -> usize;

    /// `out[i] = F(u)[rows[i]]`.
    fn residual_rows(&self, u: &[f64], rows: &[usize], out: &mut [f64]) -> Result<()>;

    /// Rows `rows` of `J(u)` with global column numbering.
    fn jacobian_rows(&self, u: &[f64], rows: &[usize]) -> Result<CsrMatrix>;

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let rows: Vec<usize> = (0..self.size()).collect();
        let mut out = vec![0.0; rows.len()];
        self.residual_rows(u, &rows, &mut out)?;
        Ok(out)
    }

    fn jacobian(&self, u: &[f64]) -> Result<CsrMatrix> {
        let rows: Vec<usize> = (0..self.size()).collect();
        self.jacobian_rows(u, &rows)
    }

    /// Structural pattern of the Jacobian, assumed independent of `u`.
    fn sparsity(&self) -> Result<CsrMatrix> {
        Ok(self.jacobian(&vec![0.0; self.size()])?.pattern())
    }
}

/// `F(u) = A u - f`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub a: CsrMatrix,
    pub f: Vec<f64>,
}

impl LinearProblem {
    pub fn new(a: CsrMatrix, f: Vec<f64>) -> Self {
        Self { a, f }
    }
}

impl NonlinearProblem for LinearProblem {
    fn size(&self) -> usize {
        self.a.nrows()
    }

    fn residual_rows(&self, u: &[f64], rows: &[usize], out: &mut [f64]) -> Result<()> {
        crate::error::check_len(self.size(), u.len())?;
        for (o, &r) in out.iter_mut().zip(rows) {
            let (cols, vals) = self.a.row(r);
            *o = cols.iter().zip(vals).map(|(&c, &v)| v * u[c]).sum::<f64>() - self.f[r];
        }
        Ok(())
    }

    fn jacobian_rows(&self, _u: &[f64], rows: &[usize]) -> Result<CsrMatrix> {
        Ok(self.a.select_rows(rows))
    }
}
