//! Classical graph matching baselines over the same affinity input.
//!
//! Every method consumes an [`AffinityDecomposition`] through sparse products
//! and returns its relaxed score matrix together with the rounded matching.

mod gagm;
mod ipfp;
mod rrwm;
mod spectral;

use serde::{Deserialize, Serialize};

pub use gagm::gagm;
pub(crate) use gagm::schedule_len as gagm_schedule_len;
pub use ipfp::{ipfp, ipfp_matching, IpfpTrace};
pub use rrwm::rrwm;
pub use spectral::spectral_match;

use crate::error::{Error, Result};
use crate::problem::{AffinityDecomposition, MatchingState, PermutationMatching};
use crate::sinkhorn::SinkhornConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineMethod {
    Sm,
    Rrwm,
    Gagm,
    Ipfp,
}

impl BaselineMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::Sm => "sm",
            Self::Rrwm => "rrwm",
            Self::Gagm => "gagm",
            Self::Ipfp => "ipfp",
        }
    }
}

impl std::str::FromStr for BaselineMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sm" => Ok(Self::Sm),
            "rrwm" => Ok(Self::Rrwm),
            "gagm" => Ok(Self::Gagm),
            "ipfp" => Ok(Self::Ipfp),
            other => Err(Error::Config(format!("unknown baseline method '{other}'"))),
        }
    }
}

/// Hyperparameters of all baselines, frozen so comparisons are reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub method: BaselineMethod,
    pub max_iters: usize,
    pub tol: f64,
    /// Weight of the random-walk score in the RRWM mixture.
    pub rrwm_alpha: f64,
    /// Inflation exponent of the RRWM reweighting jump.
    pub rrwm_beta: f64,
    pub gagm_beta0: f64,
    pub gagm_growth: f64,
    pub gagm_beta_max: f64,
    /// Projection used inside RRWM and GAGM.
    pub sinkhorn: SinkhornConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            method: BaselineMethod::Sm,
            max_iters: 300,
            tol: 1e-8,
            rrwm_alpha: 0.2,
            rrwm_beta: 30.0,
            gagm_beta0: 0.5,
            gagm_growth: 1.075,
            gagm_beta_max: 200.0,
            sinkhorn: SinkhornConfig::default(),
        }
    }
}

impl BaselineConfig {
    pub fn for_method(method: BaselineMethod) -> Self {
        Self { method, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol", self.tol),
            ("rrwm_beta", self.rrwm_beta),
            ("gagm_beta0", self.gagm_beta0),
            ("gagm_beta_max", self.gagm_beta_max),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.rrwm_alpha >= 0.0 && self.rrwm_alpha <= 1.0) {
            return Err(Error::Config(format!("rrwm_alpha must lie in [0, 1], got {}", self.rrwm_alpha)));
        }
        if !(self.gagm_growth > 1.0) || !self.gagm_growth.is_finite() {
            return Err(Error::Config(format!("gagm_growth must exceed 1, got {}", self.gagm_growth)));
        }
        self.sinkhorn.validate()
    }
}

/// Relaxed scores and rounded matching of one baseline run.
#[derive(Clone, Debug, PartialEq)]
pub struct BaselineOutput {
    pub state: MatchingState,
    pub matching: PermutationMatching,
    pub iterations: usize,
    /// False when the iteration cap was hit before the stopping rule.
    pub converged: bool,
}

/// Runs `cfg.method`; IPFP starts from the uniform matrix.
pub fn run_baseline(aff: &AffinityDecomposition, cfg: &BaselineConfig) -> Result<BaselineOutput> {
    match cfg.method {
        BaselineMethod::Sm => spectral_match(aff, cfg),
        BaselineMethod::Rrwm => rrwm(aff, cfg),
        BaselineMethod::Gagm => gagm(aff, cfg),
        BaselineMethod::Ipfp => ipfp(aff, cfg, &MatchingState::uniform(aff.n())).map(|(out, _)| out),
    }
}

fn warn_unconverged(method: BaselineMethod, iters: usize) {
    log::warn!("{} stopped at the iteration cap ({iters}) before converging", method.name());
}
