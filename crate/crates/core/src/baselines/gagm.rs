use super::{warn_unconverged, BaselineConfig, BaselineMethod, BaselineOutput};
use crate::error::{Error, Result};
use crate::problem::{discretize, AffinityDecomposition, MatchingState};
use crate::sinkhorn::normalize_in_place;

/// Graduated assignment: softassign steps `z ← Sinkhorn(exp(β s / max s))`
/// with `s = u + P z`, from the uniform matrix, while `β` grows
/// geometrically from `gagm_beta0` past `gagm_beta_max`. `max_iters` caps the
/// number of steps.
///
/// Dividing by `max s` makes `β` an inverse temperature relative to the
/// affinity scale; with raw scores of order `deg²` the first step would
/// already be a hard assignment.
pub fn gagm(aff: &AffinityDecomposition, cfg: &BaselineConfig) -> Result<BaselineOutput> {
    cfg.validate()?;
    let n = aff.n();
    let mut z = MatchingState::uniform(n).as_slice().to_vec();
    let mut beta = cfg.gagm_beta0;
    let mut iterations = 0;
    while beta <= cfg.gagm_beta_max && iterations < cfg.max_iters {
        z = softassign(aff, &z, beta, cfg)?;
        beta *= cfg.gagm_growth;
        iterations += 1;
    }
    let converged = beta > cfg.gagm_beta_max;
    if !converged {
        warn_unconverged(BaselineMethod::Gagm, iterations);
    }
    let state = MatchingState::from_vec(n, z)?;
    let matching = discretize(&state)?;
    Ok(BaselineOutput { state, matching, iterations, converged })
}

/// Number of softassign steps of the annealing schedule.
pub(crate) fn schedule_len(cfg: &BaselineConfig) -> usize {
    let mut beta = cfg.gagm_beta0;
    let mut steps = 0;
    while beta <= cfg.gagm_beta_max && steps < cfg.max_iters {
        beta *= cfg.gagm_growth;
        steps += 1;
    }
    steps
}

fn softassign(aff: &AffinityDecomposition, z: &[f64], beta: f64, cfg: &BaselineConfig) -> Result<Vec<f64>> {
    let messages = aff.message_pass(z);
    let score: Vec<f64> = aff.u().iter().zip(&messages).map(|(u, m)| u + m).collect();
    let peak = score.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::Overflow("graduated assignment score is not finite".into()));
    }
    let mut q: Vec<f64> = if peak > 0.0 {
        score.iter().map(|s| (beta * (s / peak - 1.0)).exp()).collect()
    } else {
        vec![1.0; score.len()]
    };
    normalize_in_place(&mut q, aff.n(), &cfg.sinkhorn);
    Ok(q)
}
