//! Convergence histories, solve counters and their CSV form.

use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Subdomain solve counters. `raw` counts every local solve; `rounds` counts
/// batches of solves that can run concurrently (one per sweep or matvec).
#[derive(Debug, Default)]
pub struct SolveCounters {
    raw: AtomicUsize,
    rounds: AtomicUsize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CounterSnapshot {
    pub raw_solves: usize,
    pub parallel_rounds: usize,
}

impl SolveCounters {
    pub fn add(&self, raw: usize, rounds: usize) {
        self.raw.fetch_add(raw, Ordering::Relaxed);
        self.rounds.fetch_add(rounds, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        CounterSnapshot {
            raw_solves: self.raw.load(Ordering::Relaxed),
            parallel_rounds: self.rounds.load(Ordering::Relaxed),
        }
    }

    pub fn reset(&self) {
        self.raw.store(0, Ordering::Relaxed);
        self.rounds.store(0, Ordering::Relaxed);
    }
}

/// `‖a - b‖∞ / ‖b‖∞`, or the absolute difference when `b` vanishes.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num = crate::linalg::dense::diff_norm_inf(a, b);
    let den = crate::linalg::dense::norm_inf(b);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub err: f64,
    pub res: f64,
    pub cum_solves: usize,
    pub cum_parallel_rounds: usize,
    pub basis_bytes: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coarse_newton_iters: Option<usize>,
}

/// History of a stationary iteration or a Krylov solve.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ConvergenceHistory {
    pub method: String,
    pub rows: Vec<HistoryRow>,
    pub converged: bool,
    pub diverged: bool,
    /// Iterates in the space the method works in (only when requested).
    #[serde(skip)]
    pub iterates: Vec<Vec<f64>>,
    /// Final volume approximation.
    #[serde(skip)]
    pub solution: Vec<f64>,
}

impl ConvergenceHistory {
    pub fn new(method: impl Into<String>) -> Self {
        Self { method: method.into(), ..Default::default() }
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.err)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let with_coarse = self.rows.iter().any(|r| r.coarse_newton_iters.is_some());
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["iter", "err", "res", "cum_solves", "cum_parallel_rounds", "basis_bytes"];
        if with_coarse {
            header.push("coarse_newton_iters");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.iter.to_string(),
                format_float(r.err),
                format_float(r.res),
                r.cum_solves.to_string(),
                r.cum_parallel_rounds.to_string(),
                r.basis_bytes.to_string(),
            ];
            if with_coarse {
                rec.push(r.coarse_newton_iters.unwrap_or(0).to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewtonRow {
    pub iter: usize,
    pub err: f64,
    pub res: f64,
    /// Inner GMRES iterations spent on the update that produced this iterate.
    pub inner_iters: usize,
    /// Largest local Newton count in the residual evaluation behind the update.
    pub local_newton_max: usize,
    /// Cumulative cost `L(n)`.
    pub cost: usize,
    pub wall_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coarse_newton_iters: Option<usize>,
}

/// History of an outer Newton iteration.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OuterNewtonHistory {
    pub method: String,
    pub rows: Vec<NewtonRow>,
    pub converged: bool,
    pub diverged: bool,
    pub counters: CounterSnapshot,
    /// Bytes of the largest Arnoldi basis stored by the inner solver.
    pub max_basis_bytes: usize,
    #[serde(skip)]
    pub iterates: Vec<Vec<f64>>,
    #[serde(skip)]
    pub solution: Vec<f64>,
}

impl OuterNewtonHistory {
    pub fn new(method: impl Into<String>) -> Self {
        Self { method: method.into(), ..Default::default() }
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iter)
    }

    pub fn final_error(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.err)
    }

    /// Mean inner iterations over the outer updates.
    pub fn average_inner(&self) -> f64 {
        let n = self.rows.len().saturating_sub(1);
        if n == 0 {
            return 0.0;
        }
        self.rows[1..].iter().map(|r| r.inner_iters as f64).sum::<f64>() / n as f64
    }

    /// Recomputes `L(n) = Σ_{k≤n} (L_in^k + I(k))` and compares with the stored column.
    pub fn cost_identity_holds(&self) -> bool {
        let mut acc = 0;
        self.rows.iter().all(|r| {
            acc += r.local_newton_max + r.inner_iters;
            acc == r.cost
        })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let with_coarse = self.rows.iter().any(|r| r.coarse_newton_iters.is_some());
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["iter", "err", "res", "I(k)", "L_in^k", "L(n)", "wall_ms"];
        if with_coarse {
            header.push("coarse_newton_iters");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.iter.to_string(),
                format_float(r.err),
                format_float(r.res),
                r.inner_iters.to_string(),
                r.local_newton_max.to_string(),
                r.cost.to_string(),
                format!("{:.3}", r.wall_ms),
            ];
            if with_coarse {
                rec.push(r.coarse_newton_iters.unwrap_or(0).to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `value` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    Ok(())
}
