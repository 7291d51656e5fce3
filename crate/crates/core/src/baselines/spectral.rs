use super::{warn_unconverged, BaselineConfig, BaselineMethod, BaselineOutput};
use crate::error::Result;
use crate::problem::{discretize, AffinityDecomposition, MatchingState};

/// Spectral matching: the leading eigenvector of `M` by power iteration from
/// the uniform unit vector, reshaped to `n × n` and rounded.
///
/// Stops when successive unit vectors differ by less than `tol` in the max
/// norm. The returned state has unit 2-norm and nonnegative entries.
pub fn spectral_match(aff: &AffinityDecomposition, cfg: &BaselineConfig) -> Result<BaselineOutput> {
    cfg.validate()?;
    let n = aff.n();
    let nn = n * n;
    let mut x = vec![1.0 / (nn as f64).sqrt(); nn];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let mut y = aff.affinity_mul(&x);
        let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        iterations += 1;
        if norm == 0.0 {
            // M x = 0: no direction is preferred, keep the uniform vector.
            converged = true;
            break;
        }
        y.iter_mut().for_each(|v| *v /= norm);
        let change = y.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = y;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn_unconverged(BaselineMethod::Sm, iterations);
    }
    let state = MatchingState::from_vec(n, x)?;
    let matching = discretize(&state)?;
    Ok(BaselineOutput { state, matching, iterations, converged })
}
