use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the proximal solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverParams {
    /// Entropy weight (temperature).
    pub lambda: f64,
    /// Constant proximal weight, used when `beta_schedule` is absent.
    pub beta: f64,
    /// Optional per-iteration proximal weights; the last value repeats.
    pub beta_schedule: Option<Vec<f64>>,
    /// Iteration cap `T`.
    pub max_iters: usize,
    /// Stop once `‖z_{t+1} − z_t‖∞` drops below this.
    pub tol: f64,
    pub sinkhorn_iters: usize,
    pub sinkhorn_tol: f64,
    /// Run exactly `sinkhorn_iters` sweeps per step, as the unrolled
    /// gradient does, instead of stopping at `sinkhorn_tol`.
    pub fixed_sinkhorn: bool,
    /// Floor applied to log arguments.
    pub epsilon_log: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            lambda: 1.3,
            beta: 1.0,
            beta_schedule: None,
            max_iters: 200,
            tol: 1e-8,
            sinkhorn_iters: 30,
            sinkhorn_tol: 1e-9,
            fixed_sinkhorn: false,
            epsilon_log: 1e-30,
        }
    }
}

impl SolverParams {
    /// Proximal weight for iteration `t`.
    pub fn beta_at(&self, t: usize) -> f64 {
        match &self.beta_schedule {
            Some(s) if !s.is_empty() => s[t.min(s.len() - 1)],
            _ => self.beta,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("tol", self.tol),
            ("sinkhorn_tol", self.sinkhorn_tol),
            ("epsilon_log", self.epsilon_log),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if let Some(s) = &self.beta_schedule {
            if s.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
                return Err(Error::Config("beta schedule entries must be positive".into()));
            }
        }
        if self.max_iters == 0 || self.sinkhorn_iters == 0 {
            return Err(Error::Config("iteration counts must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-iteration diagnostics of a solve.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolverTrace {
    /// Relaxed objective of the starting point.
    pub initial_objective: f64,
    /// Relaxed objective after each iteration.
    pub objective: Vec<f64>,
    /// `‖z_{t+1} − z_t‖²₂` for each iteration.
    pub delta_sq: Vec<f64>,
    /// `‖z_{t+1} − z_t‖∞` for each iteration.
    pub delta_inf: Vec<f64>,
    pub iters_run: usize,
    pub converged: bool,
}

impl SolverTrace {
    /// Gap between the starting objective and the best one observed.
    pub fn objective_gap(&self) -> f64 {
        let best = self.objective.iter().copied().fold(self.initial_objective, f64::min);
        self.initial_objective - best
    }

    pub fn final_objective(&self) -> f64 {
        self.objective.last().copied().unwrap_or(self.initial_objective)
    }
}
