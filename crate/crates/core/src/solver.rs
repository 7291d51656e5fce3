//! Proximal graph matching.
//!
//! Each iteration linearizes the pairwise energy at the current iterate and
//! solves the KL-proximal subproblem in closed form,
//!
//! ```text
//! z̃ = exp[ β/(1+λβ) · (u + P z_t) + 1/(1+λβ) · log z_t ]
//! z_{t+1} = Sinkhorn(z̃)
//! ```
//!
//! The exponent is shifted by its maximum before `exp`; Sinkhorn's scale
//! invariance makes the shift exact.

use crate::error::{Error, Result};
use crate::problem::{
    discretize, relaxed_objective, AffinityDecomposition, MatchingState, PermutationMatching, SolverParams,
    SolverTrace,
};
use crate::sinkhorn::{normalize_in_place, sinkhorn_normalize, SinkhornConfig};

/// Output of [`dpgm_solve`].
#[derive(Clone, Debug)]
pub struct DpgmResult {
    pub z_final: MatchingState,
    pub trace: SolverTrace,
    pub matching: PermutationMatching,
    /// `|E1| · |E2|`; a step `β < 2/L` satisfies the sufficient condition of
    /// the convergence bound with unit strong-convexity constant.
    pub lipschitz_estimate: f64,
}

fn inner_sinkhorn(cfg: &SolverParams) -> SinkhornConfig {
    SinkhornConfig {
        max_iters: cfg.sinkhorn_iters,
        tol: cfg.sinkhorn_tol,
        epsilon: cfg.epsilon_log,
        fixed_depth: cfg.fixed_sinkhorn,
    }
}

/// Starting point: Sinkhorn of the unary matrix, or the uniform matrix when
/// `u` vanishes.
pub fn init_state(aff: &AffinityDecomposition, cfg: &SolverParams) -> Result<MatchingState> {
    if aff.u().iter().all(|&v| v == 0.0) {
        return Ok(MatchingState::uniform(aff.n()));
    }
    Ok(sinkhorn_normalize(&aff.unary_matrix(), &inner_sinkhorn(cfg))?.state)
}

/// One closed-form proximal step with the constant weight `cfg.beta`.
pub fn proximal_step(z: &MatchingState, aff: &AffinityDecomposition, cfg: &SolverParams) -> Result<MatchingState> {
    step_with_beta(z, aff, cfg, cfg.beta)
}

fn step_with_beta(z: &MatchingState, aff: &AffinityDecomposition, cfg: &SolverParams, beta: f64) -> Result<MatchingState> {
    check_dims(z, aff)?;
    let lambda = cfg.lambda;
    let eps = cfg.epsilon_log;
    let messages = aff.message_pass(z.as_slice());
    let c_energy = beta / (1.0 + lambda * beta);
    let c_prior = 1.0 / (1.0 + lambda * beta);
    let exponent = aff
        .u()
        .iter()
        .zip(&messages)
        .zip(z.as_slice())
        .map(|((u, m), z)| c_energy * (u + m) + c_prior * z.max(eps).ln())
        .collect();
    exponentiate_and_project(exponent, z.n(), cfg)
}

/// The per-index update as written in the message-passing form of the
/// algorithm, which fixes `λ = 1`:
/// message, add unary, blend with `β/(β+1)` and `1/(β+1)`, exponentiate,
/// project. Agrees bit-for-bit with [`proximal_step`] at `λ = 1`.
pub fn message_passing_step(
    z: &MatchingState,
    aff: &AffinityDecomposition,
    beta: f64,
    cfg: &SolverParams,
) -> Result<MatchingState> {
    check_dims(z, aff)?;
    let messages = aff.message_pass(z.as_slice());
    let zs = z.as_slice();
    let u = aff.u();
    let mut x = vec![0.0; zs.len()];
    for i in 0..zs.len() {
        x[i] = messages[i];
        x[i] += u[i];
        x[i] = beta / (beta + 1.0) * x[i] + 1.0 / (beta + 1.0) * zs[i].max(cfg.epsilon_log).ln();
    }
    exponentiate_and_project(x, z.n(), cfg)
}

fn check_dims(z: &MatchingState, aff: &AffinityDecomposition) -> Result<()> {
    if z.n() != aff.n() {
        return Err(Error::DimensionMismatch { expected: aff.n(), found: z.n() });
    }
    Ok(())
}

fn exponentiate_and_project(mut e: Vec<f64>, n: usize, cfg: &SolverParams) -> Result<MatchingState> {
    let shift = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() || e.iter().any(|v| v.is_nan()) {
        return Err(Error::Overflow(
            "proximal exponent is not finite; increase lambda or decrease beta".into(),
        ));
    }
    e.iter_mut().for_each(|v| *v = (*v - shift).exp());
    normalize_in_place(&mut e, n, &inner_sinkhorn(cfg));
    MatchingState::from_vec(n, e)
}

/// Runs proximal steps from [`init_state`] until `‖Δz‖∞ < tol` or the
/// iteration cap, then rounds the final iterate.
pub fn dpgm_solve(aff: &AffinityDecomposition, cfg: &SolverParams) -> Result<DpgmResult> {
    cfg.validate()?;
    let mut z = init_state(aff, cfg)?;
    let mut trace = SolverTrace {
        initial_objective: relaxed_objective(aff, &z, cfg.lambda)?,
        ..SolverTrace::default()
    };
    for t in 0..cfg.max_iters {
        let next = step_with_beta(&z, aff, cfg, cfg.beta_at(t))?;
        let delta_inf = next.max_abs_diff(&z);
        trace.delta_sq.push(next.squared_distance(&z));
        trace.delta_inf.push(delta_inf);
        trace.objective.push(relaxed_objective(aff, &next, cfg.lambda)?);
        trace.iters_run += 1;
        z = next;
        if delta_inf < cfg.tol {
            trace.converged = true;
            break;
        }
    }
    let matching = discretize(&z)?;
    Ok(DpgmResult { z_final: z, trace, matching, lipschitz_estimate: aff.lipschitz_estimate() })
}

/// Empirical check of the `O(1/T)` decay of the mean squared step.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceReport {
    /// Horizons `T = 1, 2, 4, …` plus the final iteration count.
    pub horizons: Vec<usize>,
    /// Mean of `‖z_{t+1} − z_t‖²` over the first `T` iterations.
    pub running_mean: Vec<f64>,
    /// Least-squares slope of `log(running_mean)` against `log(T)`.
    pub slope: f64,
    /// Initial objective minus the best observed objective.
    pub objective_gap: f64,
    pub non_increasing: bool,
    pub final_delta_sq: f64,
}

pub fn convergence_report(trace: &SolverTrace) -> ConvergenceReport {
    let iters = trace.delta_sq.len();
    let mut horizons = Vec::new();
    let mut t = 1;
    while t <= iters {
        horizons.push(t);
        t *= 2;
    }
    if horizons.last().is_some_and(|&h| h != iters) {
        horizons.push(iters);
    }
    let mut prefix = Vec::with_capacity(iters);
    let mut acc = 0.0;
    for d in &trace.delta_sq {
        acc += d;
        prefix.push(acc);
    }
    let running_mean: Vec<f64> = horizons.iter().map(|&h| prefix[h - 1] / h as f64).collect();
    let non_increasing = running_mean.windows(2).all(|w| w[1] <= w[0]);
    ConvergenceReport {
        slope: log_log_slope(&horizons, &running_mean),
        objective_gap: trace.objective_gap(),
        non_increasing,
        final_delta_sq: trace.delta_sq.last().copied().unwrap_or(0.0),
        horizons,
        running_mean,
    }
}

fn log_log_slope(x: &[usize], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| ((x as f64).ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
