//! Sinkhorn-Knopp projection onto (approximately) doubly stochastic matrices.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::MatchingState;

/// Stopping and flooring rules for [`sinkhorn_normalize`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SinkhornConfig {
    /// Number of row+column sweeps allowed (exact count when `fixed_depth`).
    pub max_iters: usize,
    /// Target for the largest row/column-sum deviation from one.
    pub tol: f64,
    /// Added to every input entry before normalizing.
    pub epsilon: f64,
    /// Run exactly `max_iters` sweeps and ignore `tol` as a stopping rule.
    pub fixed_depth: bool,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self { max_iters: 1000, tol: 1e-9, epsilon: 1e-30, fixed_depth: false }
    }
}

impl SinkhornConfig {
    /// Configuration used inside the differentiable solvers: a static number
    /// of sweeps.
    pub fn fixed(sweeps: usize) -> Self {
        Self { max_iters: sweeps, fixed_depth: true, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("sinkhorn max_iters must be at least 1".into()));
        }
        if !(self.tol > 0.0) || !(self.epsilon >= 0.0) {
            return Err(Error::Config("sinkhorn tol must be positive and epsilon nonnegative".into()));
        }
        Ok(())
    }
}

/// Result of a projection. `converged == false` is a warning, not an error.
#[derive(Clone, Debug)]
pub struct SinkhornOutput {
    pub state: MatchingState,
    pub iterations: usize,
    pub converged: bool,
    /// `|row_sum − 1|` per row.
    pub row_deviation: Vec<f64>,
    /// `|col_sum − 1|` per column.
    pub col_deviation: Vec<f64>,
}

impl SinkhornOutput {
    pub fn max_deviation(&self) -> f64 {
        self.row_deviation.iter().chain(&self.col_deviation).fold(0.0, |a, &b| a.max(b))
    }
}

/// Alternating row/column normalization of a nonnegative square matrix,
/// rows first.
pub fn sinkhorn_normalize(m: &Array2<f64>, cfg: &SinkhornConfig) -> Result<SinkhornOutput> {
    cfg.validate()?;
    let (n, c) = m.dim();
    if n != c {
        return Err(Error::DimensionMismatch { expected: n, found: c });
    }
    if let Some(bad) = m.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::invalid(format!("sinkhorn input entry {bad} is not finite and nonnegative")));
    }
    let mut buf: Vec<f64> = m.iter().copied().collect();
    let (iterations, _) = normalize_in_place(&mut buf, n, cfg);
    if buf.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("sinkhorn input has an all-zero row or column"));
    }
    let state = MatchingState::from_vec(n, buf)?;
    let (row_deviation, col_deviation) = deviations(state.as_slice(), n);
    let converged = row_deviation.iter().chain(&col_deviation).all(|&d| d <= cfg.tol);
    if !converged {
        log::debug!("sinkhorn stopped after {iterations} sweeps above tolerance {}", cfg.tol);
    }
    Ok(SinkhornOutput { state, iterations, converged, row_deviation, col_deviation })
}

/// In-place projection of a row-major `n × n` buffer. Returns the number of
/// sweeps run and whether the tolerance was met.
pub(crate) fn normalize_in_place(buf: &mut [f64], n: usize, cfg: &SinkhornConfig) -> (usize, bool) {
    if cfg.epsilon > 0.0 {
        buf.iter_mut().for_each(|v| *v += cfg.epsilon);
    }
    let mut col = vec![0.0; n];
    for sweep in 1..=cfg.max_iters {
        for row in buf.chunks_exact_mut(n) {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        normalize_columns(buf, n, &mut col);
        if !cfg.fixed_depth && max_row_deviation(buf, n) <= cfg.tol {
            return (sweep, true);
        }
    }
    let done = max_row_deviation(buf, n) <= cfg.tol;
    (cfg.max_iters, done)
}

fn normalize_columns(buf: &mut [f64], n: usize, col: &mut [f64]) {
    col.iter_mut().for_each(|c| *c = 0.0);
    for row in buf.chunks_exact(n) {
        for (c, v) in col.iter_mut().zip(row) {
            *c += v;
        }
    }
    for row in buf.chunks_exact_mut(n) {
        for (v, c) in row.iter_mut().zip(col.iter()) {
            *v /= c;
        }
    }
}

fn max_row_deviation(buf: &[f64], n: usize) -> f64 {
    buf.chunks_exact(n).map(|r| (r.iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
}

fn deviations(buf: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let rows = buf.chunks_exact(n).map(|r| (r.iter().sum::<f64>() - 1.0).abs()).collect();
    let mut cols = vec![0.0; n];
    for row in buf.chunks_exact(n) {
        for (c, v) in cols.iter_mut().zip(row) {
            *c += v;
        }
    }
    (rows, cols.into_iter().map(|c: f64| (c - 1.0).abs()).collect())
}
