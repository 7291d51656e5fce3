use super::{warn_unconverged, BaselineConfig, BaselineMethod, BaselineOutput};
use crate::error::Result;
use crate::problem::{discretize, AffinityDecomposition, MatchingState};
use crate::sinkhorn::normalize_in_place;

/// Reweighted random walks.
///
/// Each step walks from the mixture of the previous score and its
/// reweighted jump distribution, `x ← M(α x + (1 − α) y)` followed by L1
/// normalization, then inflates and projects the new score,
/// `y ← Sinkhorn(exp(β x / max x))` rescaled to unit mass. Stops when the
/// score changes by less than `tol` in the 2-norm.
pub fn rrwm(aff: &AffinityDecomposition, cfg: &BaselineConfig) -> Result<BaselineOutput> {
    cfg.validate()?;
    let n = aff.n();
    let nn = n * n;
    let mut x = vec![1.0 / nn as f64; nn];
    let mut y = x.clone();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        iterations += 1;
        let mix: Vec<f64> = x.iter().zip(&y).map(|(a, b)| cfg.rrwm_alpha * a + (1.0 - cfg.rrwm_alpha) * b).collect();
        let mut next = aff.affinity_mul(&mix);
        let mass: f64 = next.iter().sum();
        if mass <= 0.0 {
            converged = true;
            break;
        }
        next.iter_mut().for_each(|v| *v /= mass);
        y = reweight(&next, n, cfg);
        let change = next.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        x = next;
        if change < cfg.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        warn_unconverged(BaselineMethod::Rrwm, iterations);
    }
    let state = MatchingState::from_vec(n, x)?;
    let matching = discretize(&state)?;
    Ok(BaselineOutput { state, matching, iterations, converged })
}

/// `exp(β (x / max x − 1))`: the inflation shifted by its maximum, which
/// the Sinkhorn projection absorbs.
fn reweight(x: &[f64], n: usize, cfg: &BaselineConfig) -> Vec<f64> {
    let peak = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut y: Vec<f64> = x.iter().map(|v| (cfg.rrwm_beta * (v / peak - 1.0)).exp()).collect();
    normalize_in_place(&mut y, n, &cfg.sinkhorn);
    let mass: f64 = y.iter().sum();
    y.iter_mut().for_each(|v| *v /= mass);
    y
}
