use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::record::{record_dpgm, record_gagm, record_quadratic_probe, record_rrwm, record_sm, UnrollConfig};
use super::tape::{AffinityParams, Tape};
use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::learn::cross_entropy_with_grad;
use crate::problem::{AffinityDecomposition, NodeMask, PermutationMatching, SolverParams};

/// Differentiable maps available for checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffMethod {
    Dpgm,
    Sm,
    Rrwm,
    Gagm,
    /// Quadratic in the parameters and independent of any solver.
    Probe,
}

impl DiffMethod {
    /// Finite-difference step balancing truncation against rounding.
    ///
    /// The inflation `exp(β x / max x)` inside the reweighted walk makes
    /// that map strongly curved, so its central differences need a smaller
    /// step than the other methods for the same accuracy.
    pub fn default_step(self) -> f64 {
        match self {
            Self::Rrwm => 1e-6,
            _ => 1e-5,
        }
    }
}

impl std::str::FromStr for DiffMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dpgm" => Ok(Self::Dpgm),
            "sm" => Ok(Self::Sm),
            "rrwm" => Ok(Self::Rrwm),
            "gagm" => Ok(Self::Gagm),
            "probe" => Ok(Self::Probe),
            other => Err(Error::Config(format!("method '{other}' is not differentiable here"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradConfig {
    pub method: DiffMethod,
    pub solver: SolverParams,
    pub baseline: BaselineConfig,
    pub unroll: UnrollConfig,
    /// Coordinates perturbed by [`finite_diff_check`]; at least 20 are used
    /// when that many exist.
    pub samples: usize,
    pub seed: u64,
}

impl Default for GradConfig {
    fn default() -> Self {
        Self {
            method: DiffMethod::Dpgm,
            solver: SolverParams { lambda: 1.0, beta: 1.0, ..SolverParams::default() },
            baseline: BaselineConfig::default(),
            unroll: UnrollConfig::fixed(5, 30),
            samples: 20,
            seed: 0,
        }
    }
}

/// Records the unrolled forward pass selected by `cfg.method`.
pub fn record(params: &AffinityParams, cfg: &GradConfig) -> Result<Tape> {
    match cfg.method {
        DiffMethod::Dpgm => record_dpgm(params, &cfg.solver, &cfg.unroll),
        DiffMethod::Sm => record_sm(params, &cfg.unroll),
        DiffMethod::Rrwm => record_rrwm(params, &cfg.baseline, &cfg.unroll),
        DiffMethod::Gagm => record_gagm(params, &cfg.baseline, &cfg.unroll),
        DiffMethod::Probe => Ok(record_quadratic_probe(params)),
    }
}

/// Scalar loss on the flattened output of a tape.
#[derive(Clone, Debug, PartialEq)]
pub enum LossSpec {
    /// `Σ z ⊙ R`.
    Linear(Vec<f64>),
    /// Clamped binary cross-entropy against a permutation.
    CrossEntropy { truth: PermutationMatching, mask: NodeMask },
}

impl LossSpec {
    pub fn value_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self {
            Self::Linear(r) => {
                if r.len() != z.len() {
                    return Err(Error::DimensionMismatch { expected: z.len(), found: r.len() });
                }
                Ok((r.iter().zip(z).map(|(r, z)| r * z).sum(), r.clone()))
            }
            Self::CrossEntropy { truth, mask } => cross_entropy_with_grad(z, truth, mask),
        }
    }
}

/// One checked coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckedCoordinate {
    /// `"u"` or `"w"`.
    pub kind: &'static str,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub coordinates: Vec<CheckedCoordinate>,
}

/// Compares tape gradients with central differences `(f(x+h) − f(x−h)) / 2h`
/// on a seeded random sample of unary and pairwise coordinates.
///
/// Unary coordinates with `u_k ≤ h` are skipped: the starting point switches
/// from the uniform matrix to the projection of `u` when `u` leaves zero, so
/// the map is not differentiable there. Relative errors use the larger of
/// the two magnitudes, floored at `1e-8`.
pub fn finite_diff_check(
    aff: &AffinityDecomposition,
    cfg: &GradConfig,
    loss: &LossSpec,
    h: f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::Config(format!("step h must lie in [1e-7, 1e-3], got {h}")));
    }
    let params = AffinityParams::from_affinity(aff);
    let tape = record(&params, cfg)?;
    let (_, seed) = loss.value_and_grad(tape.output())?;
    let grads = tape.backward(&seed)?;

    let mut candidates: Vec<(bool, usize)> = Vec::new();
    let probe = cfg.method == DiffMethod::Probe;
    candidates.extend((0..params.u.len()).filter(|&k| probe || params.u[k] > h).map(|k| (true, k)));
    candidates.extend((0..params.weights.len()).map(|k| (false, k)));
    let want = cfg.samples.max(20).min(candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked: Vec<usize> = sample(&mut rng, candidates.len(), want).into_vec();
    picked.sort_unstable();

    let eval = |p: &AffinityParams| -> Result<f64> {
        let t = record(p, cfg)?;
        Ok(loss.value_and_grad(t.output())?.0)
    };
    let mut coordinates = Vec::with_capacity(want);
    let mut worst = 0.0f64;
    for &c in &picked {
        let (is_u, k) = candidates[c];
        let mut plus = params.clone();
        let mut minus = params.clone();
        let analytic = if is_u {
            plus.u[k] += h;
            minus.u[k] -= h;
            grads.du[k]
        } else {
            plus.weights[k] += h;
            minus.weights[k] -= h;
            grads.dw[k]
        };
        let numeric = (eval(&plus)? - eval(&minus)?) / (2.0 * h);
        let rel_error = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
        worst = worst.max(rel_error);
        coordinates.push(CheckedCoordinate { kind: if is_u { "u" } else { "w" }, index: k, analytic, numeric, rel_error });
    }
    Ok(GradCheckReport { max_rel_error: worst, coordinates })
}
