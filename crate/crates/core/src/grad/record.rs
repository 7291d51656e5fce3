use serde::{Deserialize, Serialize};

use super::tape::{AffinityParams, Tape};
use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::problem::SolverParams;

/// Depth of an unrolled forward pass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UnrollConfig {
    /// Outer iterations `T`.
    pub iters: usize,
    /// Sinkhorn sweeps per projection.
    pub sinkhorn_sweeps: usize,
    /// Stop once `‖Δz‖∞` falls below this. A tape that stops before `iters`
    /// is marked early-stopped and cannot be differentiated.
    pub early_stop_tol: Option<f64>,
}

impl Default for UnrollConfig {
    fn default() -> Self {
        Self { iters: 10, sinkhorn_sweeps: 30, early_stop_tol: None }
    }
}

impl UnrollConfig {
    pub fn fixed(iters: usize, sinkhorn_sweeps: usize) -> Self {
        Self { iters, sinkhorn_sweeps, early_stop_tol: None }
    }

    fn validate(&self) -> Result<()> {
        if self.iters == 0 || self.sinkhorn_sweeps == 0 {
            return Err(Error::Config("unroll depth and sinkhorn sweeps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Tracks early stopping across the outer loop of a recording.
struct Stopper<'a> {
    unroll: &'a UnrollConfig,
    steps: usize,
    stopped: bool,
}

impl<'a> Stopper<'a> {
    fn new(unroll: &'a UnrollConfig) -> Self {
        Self { unroll, steps: 0, stopped: false }
    }

    /// Records one finished step; true when the loop should end.
    fn step(&mut self, tape: &Tape, prev: usize, next: usize, depth: usize) -> bool {
        self.steps += 1;
        let Some(tol) = self.unroll.early_stop_tol else { return false };
        let change = tape
            .value(prev)
            .iter()
            .zip(tape.value(next))
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if change < tol && self.steps < depth {
            self.stopped = true;
            return true;
        }
        false
    }
}

/// Unrolled proximal solve from the same starting point as the solver.
///
/// With `solver.fixed_sinkhorn`, `solver.sinkhorn_iters == sinkhorn_sweeps`
/// and no early stop, the recorded output equals the solver's iterate
/// after `iters` steps bit for bit.
pub fn record_dpgm(params: &AffinityParams, solver: &SolverParams, unroll: &UnrollConfig) -> Result<Tape> {
    solver.validate()?;
    unroll.validate()?;
    let n = params.n;
    let eps = solver.epsilon_log;
    let sweeps = unroll.sinkhorn_sweeps;
    let mut t = Tape::new(params);
    let mut z = if params.u.iter().all(|&v| v == 0.0) {
        t.constant(vec![1.0 / n as f64; n * n])
    } else {
        t.sinkhorn(t.unary(), eps, sweeps)
    };
    let mut stop = Stopper::new(unroll);
    for step in 0..unroll.iters {
        let beta = solver.beta_at(step);
        let c_energy = beta / (1.0 + solver.lambda * beta);
        let c_prior = 1.0 / (1.0 + solver.lambda * beta);
        let m = t.messages(z);
        let s = t.add(m, t.unary());
        let l = t.log_clamp(z, eps);
        let e = t.lin(s, c_energy, l, c_prior);
        let x = t.shift_exp(e)?;
        let next = t.sinkhorn(x, eps, sweeps);
        let done = stop.step(&t, z, next, unroll.iters);
        z = next;
        if done {
            break;
        }
    }
    t.finish(z, stop.steps, stop.stopped);
    Ok(t)
}

/// Unrolled power iteration of spectral matching.
pub fn record_sm(params: &AffinityParams, unroll: &UnrollConfig) -> Result<Tape> {
    unroll.validate()?;
    let nn = params.n * params.n;
    let mut t = Tape::new(params);
    let mut x = t.constant(vec![1.0 / (nn as f64).sqrt(); nn]);
    let mut stop = Stopper::new(unroll);
    for _ in 0..unroll.iters {
        let y = affinity_mul(&mut t, x);
        let next = t.l2_normalize(y);
        let done = stop.step(&t, x, next, unroll.iters);
        x = next;
        if done {
            break;
        }
    }
    t.finish(x, stop.steps, stop.stopped);
    Ok(t)
}

/// Unrolled reweighted random walk. The output is the walk score.
pub fn record_rrwm(params: &AffinityParams, cfg: &BaselineConfig, unroll: &UnrollConfig) -> Result<Tape> {
    cfg.validate()?;
    unroll.validate()?;
    let nn = params.n * params.n;
    let eps = cfg.sinkhorn.epsilon;
    let mut t = Tape::new(params);
    let mut x = t.constant(vec![1.0 / nn as f64; nn]);
    let mut y = x;
    let mut stop = Stopper::new(unroll);
    for _ in 0..unroll.iters {
        let mix = t.lin(x, cfg.rrwm_alpha, y, 1.0 - cfg.rrwm_alpha);
        let walk = affinity_mul(&mut t, mix);
        let next = t.l1_normalize(walk);
        let q = t.div_by_max(next);
        let q = t.add_const(q, -1.0);
        let q = t.scale(q, cfg.rrwm_beta);
        let q = t.exp(q);
        let q = t.sinkhorn(q, eps, unroll.sinkhorn_sweeps);
        y = t.l1_normalize(q);
        let done = stop.step(&t, x, next, unroll.iters);
        x = next;
        if done {
            break;
        }
    }
    t.finish(x, stop.steps, stop.stopped);
    Ok(t)
}

/// Unrolled graduated assignment over the first `unroll.iters` steps of the
/// annealing schedule.
pub fn record_gagm(params: &AffinityParams, cfg: &BaselineConfig, unroll: &UnrollConfig) -> Result<Tape> {
    cfg.validate()?;
    unroll.validate()?;
    let n = params.n;
    let eps = cfg.sinkhorn.epsilon;
    let mut t = Tape::new(params);
    let mut z = t.constant(vec![1.0 / n as f64; n * n]);
    let depth = unroll.iters.min(crate::baselines::gagm_schedule_len(cfg));
    let mut beta = cfg.gagm_beta0;
    let mut stop = Stopper::new(unroll);
    for _ in 0..depth {
        let m = t.messages(z);
        let s = t.add(m, t.unary());
        let peak = t.value(s).iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let q = if peak > 0.0 {
            let q = t.div_by_max(s);
            let q = t.add_const(q, -1.0);
            let q = t.scale(q, beta);
            t.exp(q)
        } else {
            t.constant(vec![1.0; n * n])
        };
        let next = t.sinkhorn(q, eps, unroll.sinkhorn_sweeps);
        beta *= cfg.gagm_growth;
        let done = stop.step(&t, z, next, depth);
        z = next;
        if done {
            break;
        }
    }
    t.finish(z, stop.steps, stop.stopped);
    Ok(t)
}

/// `P x + u ⊙ x`, in the operation order of the sparse product.
fn affinity_mul(t: &mut Tape, x: usize) -> usize {
    let m = t.messages(x);
    let ux = t.mul(t.unary(), x);
    t.add(m, ux)
}

/// `u ⊙ u + P u`: a quadratic function of the parameters that bypasses
/// every solver, for validating the checker itself.
pub fn record_quadratic_probe(params: &AffinityParams) -> Tape {
    let mut t = Tape::new(params);
    let uu = t.mul(t.unary(), t.unary());
    let pu = t.messages(t.unary());
    let out = t.add(uu, pu);
    t.finish(out, 0, false);
    t
}
