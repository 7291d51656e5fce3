use ndarray::Array2;

use super::{warn_unconverged, BaselineConfig, BaselineMethod, BaselineOutput};
use crate::error::{Error, Result};
use crate::problem::{discretize, max_weight_assignment, AffinityDecomposition, MatchingState, PermutationMatching};

/// Per-iteration scores of an IPFP run. Index 0 is the starting point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IpfpTrace {
    /// `uᵀz + zᵀPz` of the continuous iterate.
    pub continuous: Vec<f64>,
    /// Objective of the best discrete solution found so far.
    pub best_discrete: Vec<f64>,
}

/// Integer projected fixed point iteration from `z0`.
///
/// Each step rounds the gradient `u + 2Pz` to a permutation `b`, maximizes
/// the quadratic objective exactly on the segment from `z` to `b`, and keeps
/// `b` if it beats the best discrete solution so far (initially the rounding
/// of `z0`). Stops when the step stalls. Returns the best discrete point.
pub fn ipfp(aff: &AffinityDecomposition, cfg: &BaselineConfig, z0: &MatchingState) -> Result<(BaselineOutput, IpfpTrace)> {
    cfg.validate()?;
    let n = aff.n();
    if z0.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: z0.n() });
    }
    let mut z = z0.as_slice().to_vec();
    let mut best = discretize(z0)?;
    let mut best_value = aff.energy(&best.indicator());
    let mut trace = IpfpTrace { continuous: vec![aff.energy(&z)], best_discrete: vec![best_value] };
    let scale = 1.0 + aff.u().iter().sum::<f64>() + aff.entries().iter().map(|e| 2.0 * e.weight).sum::<f64>();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iters {
        iterations += 1;
        let messages = aff.message_pass(&z);
        let grad: Vec<f64> = aff.u().iter().zip(&messages).map(|(u, m)| u + 2.0 * m).collect();
        let b = max_weight_assignment(&Array2::from_shape_vec((n, n), grad.clone()).expect("n² entries"))?;
        let b_vec = b.indicator();
        let dir: Vec<f64> = b_vec.iter().zip(&z).map(|(b, z)| b - z).collect();
        // f(z + r d) = f(z) + r C + r² D on the segment.
        let c: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
        let d = aff.pairwise_energy(&dir);
        let r = if d >= 0.0 { 1.0 } else { (-c / (2.0 * d)).clamp(0.0, 1.0) };

        let b_value = aff.energy(&b_vec);
        if b_value > best_value {
            best_value = b_value;
            best = b;
        }
        let stalled = c <= 1e-14 * scale;
        if !stalled {
            z.iter_mut().zip(&dir).for_each(|(z, d)| *z += r * d);
        }
        trace.continuous.push(aff.energy(&z));
        trace.best_discrete.push(best_value);
        let step = if stalled { 0.0 } else { r * dir.iter().fold(0.0f64, |m, d| m.max(d.abs())) };
        if step < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn_unconverged(BaselineMethod::Ipfp, iterations);
    }
    let out = BaselineOutput { state: MatchingState::from_permutation(&best), matching: best, iterations, converged };
    Ok((out, trace))
}

/// Convenience wrapper returning only the discrete solution.
pub fn ipfp_matching(aff: &AffinityDecomposition, cfg: &BaselineConfig, z0: &MatchingState) -> Result<PermutationMatching> {
    ipfp(aff, cfg, z0).map(|(out, _)| out.matching)
}
