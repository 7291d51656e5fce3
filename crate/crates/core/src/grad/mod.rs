//! Reverse-mode gradients through unrolled solvers.
//!
//! A [`Tape`] records every elementary vector operation of a fixed-depth
//! forward pass (sparse products, exponentials, clamped logarithms, row and
//! column normalizations) and replays them backwards. Gradients are
//! reported per unary entry and per stored pairwise weight, so the two
//! symmetric positions of `P` always share one gradient.

mod check;
mod record;
mod tape;

use ndarray::Array2;

pub use check::{finite_diff_check, record, CheckedCoordinate, DiffMethod, GradCheckReport, GradConfig, LossSpec};
pub use record::{record_dpgm, record_gagm, record_quadratic_probe, record_rrwm, record_sm, UnrollConfig};
pub use tape::{AffinityParams, Gradients, Tape};

use crate::error::{Error, Result};

/// Backward pass of a recorded proximal solve for an upstream gradient
/// given as an `n × n` matrix.
pub fn dpgm_backward(tape: &Tape, dloss_dz: &Array2<f64>) -> Result<Gradients> {
    let n = tape.n();
    if dloss_dz.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: dloss_dz.nrows() });
    }
    let seed: Vec<f64> = dloss_dz.iter().copied().collect();
    tape.backward(&seed)
}
