use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::KeypointPairSample;
use crate::error::{Error, Result};
use crate::problem::{AffinityDecomposition, GraphInstance, NodeMask, PairwiseEntry, PermutationMatching};

/// Default denominator of the edge-distance kernel for feature graphs.
pub const SYNTHETIC_SCALE: f64 = 2900.0;

/// Parameters of an Erdős–Rényi pair with inliers, outliers and feature noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_in: usize,
    pub n_out: usize,
    pub p_edge: f64,
    pub sigma: f64,
    /// Feature dimension.
    pub dim: usize,
    pub rng_seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self { n_in: 30, n_out: 0, p_edge: 0.7, sigma: 0.0, dim: 20, rng_seed: 0 }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_in == 0 {
            return Err(Error::Config("n_in must be at least 1".into()));
        }
        if !(self.p_edge > 0.0 && self.p_edge <= 1.0) {
            return Err(Error::Config(format!("p_edge must lie in (0, 1], got {}", self.p_edge)));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("sigma must be nonnegative, got {}", self.sigma)));
        }
        if self.dim == 0 {
            return Err(Error::Config("feature dimension must be at least 1".into()));
        }
        Ok(())
    }
}

/// Random graph with independent edges of probability `p` and features
/// uniform on `[0, 1]^dim`.
pub fn erdos_renyi(n: usize, p: f64, dim: usize, rng: &mut impl Rng) -> GraphInstance {
    let features = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.random::<f64>() < p {
                edges.push((a, b));
            }
        }
    }
    GraphInstance::new(features, edges).expect("generated graph is well formed")
}

/// Reference graph plus a relabeled copy of its topology. Inlier features get
/// Gaussian noise, outlier features are redrawn, and the copy's node order is
/// shuffled; the shuffle is the ground truth on inliers.
pub fn gen_er_pair(spec: &SyntheticSpec) -> Result<KeypointPairSample> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let n = spec.n_in + spec.n_out;
    let g1 = erdos_renyi(n, spec.p_edge, spec.dim, &mut rng);
    let noise = Normal::new(0.0, spec.sigma).map_err(|e| Error::Config(e.to_string()))?;
    let features: Vec<Vec<f64>> = g1
        .features()
        .iter()
        .enumerate()
        .map(|(i, q)| {
            if i < spec.n_in {
                q.iter().map(|&v| v + noise.sample(&mut rng)).collect()
            } else {
                (0..spec.dim).map(|_| rng.random::<f64>()).collect()
            }
        })
        .collect();
    let copy = GraphInstance::new(features, g1.edges().to_vec())?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let g2 = copy.permuted(&perm)?;
    let mut mask = NodeMask::all(n);
    for i in spec.n_in..n {
        mask.rows[i] = false;
        mask.cols[perm[i]] = false;
    }
    Ok(KeypointPairSample { g1, g2, truth: PermutationMatching::new(perm)?, mask })
}

/// Edge-pair affinity from feature distances with no unary term:
/// `exp(−(d_ii' − d_jj')² / scale)` on `E1 × E2`.
pub fn synthetic_affinity(sample: &KeypointPairSample, scale: f64) -> Result<AffinityDecomposition> {
    distance_kernel(&sample.g1, &sample.g2, scale)
}

pub(crate) fn distance_kernel(g1: &GraphInstance, g2: &GraphInstance, scale: f64) -> Result<AffinityDecomposition> {
    if !(scale > 0.0) {
        return Err(Error::Config(format!("kernel scale must be positive, got {scale}")));
    }
    if g1.dim() != g2.dim() {
        return Err(Error::DimensionMismatch { expected: g1.dim(), found: g2.dim() });
    }
    let n = g1.n();
    AffinityDecomposition::from_edge_pairs(g1, g2, Array1::zeros(n * n), |i, i2, j, j2| {
        let diff = g1.feature_distance(i, i2) - g2.feature_distance(j, j2);
        (-diff * diff / scale).exp()
    })
}

/// Dense random test instance: unary entries and pairwise weights uniform on
/// `[0, 1)`, supported on two independent Erdős–Rényi graphs. Both
/// orientations of every edge pair get independent weights.
pub fn random_affinity(n: usize, p_edge: f64, seed: u64) -> AffinityDecomposition {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g1 = erdos_renyi(n, p_edge, 1, &mut rng);
    let g2 = erdos_renyi(n, p_edge, 1, &mut rng);
    let u = Array1::from_iter((0..n * n).map(|_| rng.random::<f64>()));
    let mut entries = Vec::new();
    for &(a, b) in g1.edges() {
        for &(c, d) in g2.edges() {
            for (j, j2) in [(c, d), (d, c)] {
                entries.push(PairwiseEntry { first: a * n + j, second: b * n + j2, weight: rng.random() });
            }
        }
    }
    AffinityDecomposition::new(n, u, entries).expect("generated affinity is valid")
}
