//! Supervised learning of a node-affinity metric through the unrolled
//! proximal solver.
//!
//! Unary affinities are `u_ij = exp(v1_iᵀ W v2_j)` for a learnable `W`;
//! pairwise affinities `exp((v1_iᵀ v2_j)(v1_i'ᵀ v2_j'))` are fixed. A
//! clamped binary cross-entropy between the solver output and the ground
//! truth is minimized by plain minibatch SGD, with gradients from the
//! [`grad`](crate::grad) tape.

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{erdos_renyi, KeypointPairSample};
use crate::error::{Error, Result};
use crate::grad::{record_dpgm, AffinityParams, UnrollConfig};
use crate::harness::matching_accuracy;
use crate::problem::{
    discretize, AffinityDecomposition, GraphInstance, MatchingState, NodeMask, PermutationMatching, SolverParams,
};

/// Largest exponent passed to `exp` in either affinity.
pub const EXPONENT_CLIP: f64 = 30.0;
/// Clamp applied to `z` inside the cross-entropy.
pub const LOSS_EPS: f64 = 1e-7;

/// Learnable `D × D` metric.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightMatrix {
    pub w: Array2<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightFile {
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
}

impl WeightMatrix {
    /// `scale · I`.
    pub fn identity(dim: usize, scale: f64) -> Self {
        Self { w: Array2::eye(dim) * scale }
    }

    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// `{"W": [[...], ...]}`.
    pub fn to_json(&self) -> Result<String> {
        let file = WeightFile { w: self.w.rows().into_iter().map(|r| r.to_vec()).collect() };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightFile = serde_json::from_str(text)?;
        let d = file.w.len();
        if let Some(bad) = file.w.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
        }
        let flat: Vec<f64> = file.w.into_iter().flatten().collect();
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("weight matrix has non-finite entries"));
        }
        Ok(Self { w: Array2::from_shape_vec((d, d), flat).expect("square") })
    }
}

fn check_dims(g1: &GraphInstance, g2: &GraphInstance, dim: usize) -> Result<()> {
    if g1.n() != g2.n() {
        return Err(Error::DimensionMismatch { expected: g1.n(), found: g2.n() });
    }
    for g in [g1, g2] {
        if g.n() > 0 && g.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: g.dim() });
        }
    }
    Ok(())
}

/// Bilinear exponents `v1_iᵀ W v2_j`, row-major.
fn bilinear(g1: &GraphInstance, g2: &GraphInstance, w: &WeightMatrix) -> Vec<f64> {
    let n = g1.n();
    let wv2: Vec<Array1<f64>> = (0..n).map(|j| w.w.dot(&Array1::from(g2.feature(j).to_vec()))).collect();
    let mut a = Vec::with_capacity(n * n);
    for i in 0..n {
        let v1 = g1.feature(i);
        for x in &wv2 {
            a.push(v1.iter().zip(x).map(|(p, q)| p * q).sum());
        }
    }
    a
}

/// `u_ij = exp(min(v1_iᵀ W v2_j, 30))`.
pub fn node_affinity(g1: &GraphInstance, g2: &GraphInstance, w: &WeightMatrix) -> Result<Array1<f64>> {
    check_dims(g1, g2, w.dim())?;
    Ok(bilinear(g1, g2, w).into_iter().map(|a| a.min(EXPONENT_CLIP).exp()).collect())
}

/// Fixed pairwise affinity on `E1 × E2`:
/// `exp(min((v1_iᵀ v2_j)(v1_i'ᵀ v2_j'), 30))`, with `u = 0`.
pub fn edge_affinity(g1: &GraphInstance, g2: &GraphInstance) -> Result<AffinityDecomposition> {
    check_dims(g1, g2, g1.dim())?;
    let n = g1.n();
    let dot = |i: usize, j: usize| -> f64 { g1.feature(i).iter().zip(g2.feature(j)).map(|(a, b)| a * b).sum() };
    AffinityDecomposition::from_edge_pairs(g1, g2, Array1::zeros(n * n), |i, i2, j, j2| {
        (dot(i, j) * dot(i2, j2)).min(EXPONENT_CLIP).exp()
    })
}

/// Clamped binary cross-entropy over genuine entries and its gradient with
/// respect to `z` (zero where the clamp is active).
pub fn cross_entropy_with_grad(z: &[f64], truth: &PermutationMatching, mask: &NodeMask) -> Result<(f64, Vec<f64>)> {
    let n = truth.len();
    if z.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, found: z.len() });
    }
    if mask.rows.len() != n || mask.cols.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: mask.rows.len() });
    }
    let mut loss = 0.0;
    let mut grad = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if !mask.entry(i, j) {
                continue;
            }
            let k = i * n + j;
            let zc = z[k].clamp(LOSS_EPS, 1.0 - LOSS_EPS);
            let inside = z[k] > LOSS_EPS && z[k] < 1.0 - LOSS_EPS;
            if truth.target(i) == j {
                loss -= zc.ln();
                if inside {
                    grad[k] = -1.0 / zc;
                }
            } else {
                loss -= (1.0 - zc).ln();
                if inside {
                    grad[k] = 1.0 / (1.0 - zc);
                }
            }
        }
    }
    Ok((loss, grad))
}

pub fn cross_entropy_loss(z: &MatchingState, truth: &PermutationMatching, mask: &NodeMask) -> Result<f64> {
    cross_entropy_with_grad(z.as_slice(), truth, mask).map(|(l, _)| l)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Proximal parameters of the unrolled solver.
    pub solver: SolverParams,
    pub unroll: UnrollConfig,
    /// Diagonal value of the initial `W`.
    pub init_scale: f64,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            epochs: 50,
            batch_size: 8,
            solver: SolverParams { lambda: 1.0, beta: 1.0, ..SolverParams::default() },
            unroll: UnrollConfig::fixed(10, 30),
            init_scale: 1.0,
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate must be nonnegative, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.unroll.early_stop_tol.is_some() {
            return Err(Error::Config("training needs a fixed unroll depth".into()));
        }
        self.solver.validate()
    }
}

/// Per-epoch training diagnostics.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingCurve {
    /// Mean loss over the epoch's training samples, at the weights each
    /// sample's batch started from.
    pub train_loss: Vec<f64>,
    /// Held-out matching accuracy after the epoch.
    pub heldout_accuracy: Vec<f64>,
}

/// A sample with its fixed pairwise affinity precomputed.
struct Prepared<'a> {
    sample: &'a KeypointPairSample,
    edges: AffinityDecomposition,
}

fn prepare(samples: &[KeypointPairSample], dim: usize) -> Result<Vec<Prepared<'_>>> {
    samples
        .iter()
        .map(|s| {
            check_dims(&s.g1, &s.g2, dim)?;
            Ok(Prepared { sample: s, edges: edge_affinity(&s.g1, &s.g2)? })
        })
        .collect()
}

/// Loss of one sample and its gradient with respect to `W`.
fn sample_gradient(p: &Prepared<'_>, w: &WeightMatrix, cfg: &TrainConfig) -> Result<(f64, Array2<f64>)> {
    let s = p.sample;
    let a = bilinear(&s.g1, &s.g2, w);
    let u: Vec<f64> = a.iter().map(|&a| a.min(EXPONENT_CLIP).exp()).collect();
    let mut params = AffinityParams::from_affinity(&p.edges);
    params.u = u.clone();
    let tape = record_dpgm(&params, &cfg.solver, &cfg.unroll)?;
    let (loss, seed) = cross_entropy_with_grad(tape.output(), &s.truth, &s.mask)?;
    let grads = tape.backward(&seed)?;
    let n = s.n();
    let d = w.dim();
    let mut gw = Array2::zeros((d, d));
    for i in 0..n {
        let v1 = s.g1.feature(i);
        for j in 0..n {
            let k = i * n + j;
            if a[k] >= EXPONENT_CLIP {
                continue;
            }
            let c = grads.du[k] * u[k];
            if c == 0.0 {
                continue;
            }
            let v2 = s.g2.feature(j);
            for (r, &x) in v1.iter().enumerate() {
                let cx = c * x;
                for (q, &y) in v2.iter().enumerate() {
                    gw[[r, q]] += cx * y;
                }
            }
        }
    }
    Ok((loss, gw))
}

/// Loss and `∂loss/∂W` for one sample; exposed for gradient checks.
pub fn loss_and_weight_gradient(
    sample: &KeypointPairSample,
    w: &WeightMatrix,
    cfg: &TrainConfig,
) -> Result<(f64, Array2<f64>)> {
    let prepared = prepare(std::slice::from_ref(sample), w.dim())?;
    sample_gradient(&prepared[0], w, cfg)
}

/// Solves with the unrolled solver and rounds.
pub fn predict(sample: &KeypointPairSample, w: &WeightMatrix, cfg: &TrainConfig) -> Result<PermutationMatching> {
    let edges = edge_affinity(&sample.g1, &sample.g2)?;
    predict_prepared(&Prepared { sample, edges }, w, cfg)
}

fn predict_prepared(p: &Prepared<'_>, w: &WeightMatrix, cfg: &TrainConfig) -> Result<PermutationMatching> {
    let mut params = AffinityParams::from_affinity(&p.edges);
    params.u = node_affinity(&p.sample.g1, &p.sample.g2, w)?.to_vec();
    let tape = record_dpgm(&params, &cfg.solver, &cfg.unroll)?;
    discretize(&tape.output_state())
}

/// Mean matching accuracy of `w` over `samples`.
pub fn evaluate(samples: &[KeypointPairSample], w: &WeightMatrix, cfg: &TrainConfig) -> Result<f64> {
    let prepared = prepare(samples, w.dim())?;
    mean_accuracy(&prepared, w, cfg)
}

fn mean_accuracy(prepared: &[Prepared<'_>], w: &WeightMatrix, cfg: &TrainConfig) -> Result<f64> {
    if prepared.is_empty() {
        return Ok(0.0);
    }
    let acc: Vec<f64> = prepared
        .par_iter()
        .map(|p| predict_prepared(p, w, cfg).and_then(|m| matching_accuracy(&m, &p.sample.truth, &p.sample.mask)))
        .collect::<Result<_>>()?;
    Ok(acc.iter().sum::<f64>() / acc.len() as f64)
}

/// Minibatch SGD on `W` starting from `init_scale · I`.
///
/// Samples are shuffled each epoch with the seeded generator; per-sample
/// gradients are evaluated in parallel and reduced in sample order, so runs
/// are reproducible. Aborts with [`Error::Divergence`] on a non-finite loss.
pub fn train(
    dataset: &[KeypointPairSample],
    heldout: &[KeypointPairSample],
    cfg: &TrainConfig,
) -> Result<(WeightMatrix, TrainingCurve)> {
    cfg.validate()?;
    let first = dataset.first().ok_or_else(|| Error::Config("training set is empty".into()))?;
    let dim = first.g1.dim();
    let train_set = prepare(dataset, dim)?;
    let held = prepare(heldout, dim)?;
    let mut w = WeightMatrix::identity(dim, cfg.init_scale);
    let mut curve = TrainingCurve::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut losses = vec![0.0; train_set.len()];
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Array2<f64>)> = batch
                .par_iter()
                .map(|&k| sample_gradient(&train_set[k], &w, cfg))
                .collect::<Result<_>>()?;
            let mut grad = Array2::zeros((dim, dim));
            for (&k, (loss, g)) in batch.iter().zip(&results) {
                if !loss.is_finite() {
                    return Err(Error::Divergence(format!("loss {loss} in epoch {epoch}")));
                }
                losses[k] = *loss;
                grad += g;
            }
            w.w.scaled_add(-cfg.learning_rate / batch.len() as f64, &grad);
            if w.w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!("weights became non-finite in epoch {epoch}")));
            }
        }
        // Summed in dataset order so the value does not depend on the shuffle.
        curve.train_loss.push(losses.iter().sum::<f64>() / train_set.len() as f64);
        curve.heldout_accuracy.push(mean_accuracy(&held, &w, cfg)?);
        log::info!(
            "epoch {epoch}: loss {:.4}, held-out accuracy {:.4}",
            curve.train_loss[epoch],
            curve.heldout_accuracy[epoch]
        );
    }
    Ok((w, curve))
}

/// Synthetic pairs whose features are related through a hidden linear map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantedMetricSpec {
    pub n_in: usize,
    pub dim: usize,
    /// Norm scale of the feature noise; each coordinate has std `sigma/√dim`.
    pub sigma: f64,
    pub p_edge: f64,
    /// Probability that each node pair of the second graph has its edge
    /// status flipped after copying the first graph's topology.
    pub edge_noise: f64,
}

impl Default for PlantedMetricSpec {
    fn default() -> Self {
        Self { n_in: 15, dim: 20, sigma: 0.5, p_edge: 0.3, edge_noise: 0.1 }
    }
}

fn unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// Generates `count` pairs sharing one hidden `H` (entries `N(0, 1/dim)`).
/// Node features of the first graph are random unit vectors; the matched
/// node of the second graph gets `normalize(H v1 + noise)`.
pub fn planted_metric_dataset(spec: &PlantedMetricSpec, count: usize, seed: u64) -> Result<Vec<KeypointPairSample>> {
    if spec.n_in == 0 || spec.dim == 0 {
        return Err(Error::Config("planted-metric pairs need n_in and dim of at least 1".into()));
    }
    if !(spec.sigma >= 0.0) || !(0.0..=1.0).contains(&spec.edge_noise) || !(spec.p_edge > 0.0 && spec.p_edge <= 1.0) {
        return Err(Error::Config("invalid planted-metric spec".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim;
    let h_scale = 1.0 / (d as f64).sqrt();
    let h = Array2::from_shape_fn((d, d), |_| h_scale * Distribution::<f64>::sample(&StandardNormal, &mut rng));
    let noise_std = spec.sigma / (d as f64).sqrt();
    let n = spec.n_in;
    (0..count)
        .map(|_| {
            let mut g1 = erdos_renyi(n, spec.p_edge, 1, &mut rng);
            let v1: Vec<Vec<f64>> = (0..n).map(|_| unit_vector(d, &mut rng)).collect();
            g1 = GraphInstance::new(v1.clone(), g1.edges().to_vec())?;
            let mapped: Vec<Vec<f64>> = v1
                .iter()
                .map(|v| {
                    let hv = h.dot(&Array1::from(v.clone()));
                    let x: Vec<f64> = hv.iter().map(|&y| y + noise_std * rng.sample::<f64, _>(StandardNormal)).collect();
                    let norm = x.iter().map(|a| a * a).sum::<f64>().sqrt();
                    x.into_iter().map(|a| a / norm).collect()
                })
                .collect();
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    if g1.has_edge(a, b) != (rng.random::<f64>() < spec.edge_noise) {
                        edges.push((a, b));
                    }
                }
            }
            let copy = GraphInstance::new(mapped, edges)?;
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let g2 = copy.permuted(&perm)?;
            Ok(KeypointPairSample { g1, g2, truth: PermutationMatching::new(perm)?, mask: NodeMask::all(n) })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::grad::{finite_diff_check, DiffMethod, GradConfig, LossSpec};

    fn graph(features: Vec<Vec<f64>>, edges: Vec<(usize, usize)>) -> GraphInstance {
        GraphInstance::new(features, edges).unwrap()
    }

    fn small_sample(seed: u64) -> KeypointPairSample {
        let spec = PlantedMetricSpec { n_in: 5, dim: 4, p_edge: 0.6, ..PlantedMetricSpec::default() };
        planted_metric_dataset(&spec, 1, seed).unwrap().remove(0)
    }

    #[test]
    fn zero_weights_give_unit_affinity() {
        let g = graph(vec![vec![1.0, 2.0], vec![-3.0, 0.5]], vec![(0, 1)]);
        let u = node_affinity(&g, &g, &WeightMatrix { w: Array2::zeros((2, 2)) }).unwrap();
        assert!(u.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn identity_on_orthonormal_features() {
        let e = |k: usize| (0..3).map(|i| if i == k { 1.0 } else { 0.0 }).collect::<Vec<f64>>();
        let g = graph(vec![e(0), e(1), e(2)], vec![]);
        let u = node_affinity(&g, &g, &WeightMatrix::identity(3, 1.0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { std::f64::consts::E } else { 1.0 };
                assert_eq!(u[i * 3 + j], expected);
            }
        }
    }

    #[test]
    fn node_affinity_matches_triple_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let feats = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
            (0..3).map(|_| (0..4).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()).collect()
        };
        let (g1, g2) = (graph(feats(&mut rng), vec![]), graph(feats(&mut rng), vec![]));
        let w = WeightMatrix { w: Array2::from_shape_fn((4, 4), |(r, c)| ((r * 4 + c) as f64 * 0.37).sin()) };
        let u = node_affinity(&g1, &g2, &w).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut a = 0.0;
                for r in 0..4 {
                    for c in 0..4 {
                        a += g1.feature(i)[r] * w.w[[r, c]] * g2.feature(j)[c];
                    }
                }
                assert!((u[i * 3 + j] - a.exp()).abs() < 1e-12 * a.exp());
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = graph(vec![vec![1.0, 0.0]], vec![]);
        assert!(matches!(node_affinity(&g, &g, &WeightMatrix::identity(3, 1.0)), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn edge_affinity_clips_large_exponents() {
        // (2·4)(3·5) = 120, clipped to 30.
        let g1 = graph(vec![vec![2.0], vec![3.0]], vec![(0, 1)]);
        let g2 = graph(vec![vec![4.0], vec![5.0]], vec![(0, 1)]);
        let aff = edge_affinity(&g1, &g2).unwrap();
        let raw = (2.0 * 4.0) * (3.0 * 5.0);
        assert_eq!(raw, 120.0);
        let dense = aff.to_dense().unwrap();
        assert_eq!(dense[[0, 3]], EXPONENT_CLIP.exp());
        assert!(aff.u().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_features_and_support() {
        let zeros = graph(vec![vec![0.0; 2]; 3], vec![(0, 1), (1, 2)]);
        let aff = edge_affinity(&zeros, &zeros).unwrap();
        assert!(aff.weights().iter().all(|&w| w == 1.0));

        let sample = small_sample(1);
        let dense = edge_affinity(&sample.g1, &sample.g2).unwrap().to_dense().unwrap();
        let n = sample.n();
        for (a, row) in dense.outer_iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                let (i, j, i2, j2) = (a / n, a % n, b / n, b % n);
                let supported = sample.g1.has_edge(i, i2) && sample.g2.has_edge(j, j2);
                assert_eq!(v > 0.0, supported, "({a}, {b})");
            }
        }
    }

    #[test]
    fn cross_entropy_closed_forms() {
        let truth = PermutationMatching::identity(2);
        let uniform = MatchingState::uniform(2);
        let l = cross_entropy_loss(&uniform, &truth, &NodeMask::all(2)).unwrap();
        assert!((l - 4.0 * std::f64::consts::LN_2).abs() < 1e-14);

        let onehot = MatchingState::from_permutation(&PermutationMatching::identity(3));
        let l = cross_entropy_loss(&onehot, &PermutationMatching::identity(3), &NodeMask::all(3)).unwrap();
        assert!((l - (-9.0 * (1.0 - LOSS_EPS).ln())).abs() < 1e-15);
        assert!(l < 1e-5);
    }

    #[test]
    fn cross_entropy_matches_summation_oracle() {
        let z = [0.2, 0.5, 0.3, 0.6, 0.1, 0.3, 0.2, 0.4, 0.4];
        let truth = PermutationMatching::new(vec![1, 0, 2]).unwrap();
        let mut expected = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let star = if truth.target(i) == j { 1.0 } else { 0.0 };
                let v: f64 = z[i * 3 + j];
                expected -= star * v.ln() + (1.0 - star) * (1.0 - v).ln();
            }
        }
        let (l, g) = cross_entropy_with_grad(&z, &truth, &NodeMask::all(3)).unwrap();
        assert!((l - expected).abs() < 1e-13);
        assert_eq!(g[1], -1.0 / 0.5);
        assert_eq!(g[0], 1.0 / 0.8);
    }

    #[test]
    fn masked_entries_do_not_count() {
        let z = vec![0.25; 16];
        let truth = PermutationMatching::identity(4);
        let mut mask = NodeMask::all(4);
        mask.rows[3] = false;
        mask.cols[3] = false;
        let (l, g) = cross_entropy_with_grad(&z, &truth, &mask).unwrap();
        let full3 = cross_entropy_with_grad(&[0.25; 9], &PermutationMatching::identity(3), &NodeMask::all(3)).unwrap().0;
        assert!((l - full3).abs() < 1e-14);
        assert!(g[12..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn weight_file_round_trip() {
        let w = WeightMatrix { w: Array2::from_shape_fn((3, 3), |(r, c)| r as f64 - 0.1 * c as f64) };
        let text = w.to_json().unwrap();
        assert!(text.contains("\"W\""));
        assert_eq!(WeightMatrix::from_json(&text).unwrap(), w);
        assert!(WeightMatrix::from_json(r#"{"W": [[1.0, 2.0], [3.0]]}"#).is_err());
    }

    #[test]
    fn zero_learning_rate_keeps_identity() {
        let data = planted_metric_dataset(&PlantedMetricSpec { n_in: 5, dim: 4, ..PlantedMetricSpec::default() }, 4, 0).unwrap();
        let cfg = TrainConfig { learning_rate: 0.0, epochs: 3, batch_size: 2, ..TrainConfig::default() };
        let (w, curve) = train(&data, &data, &cfg).unwrap();
        assert_eq!(w, WeightMatrix::identity(4, 1.0));
        assert_eq!(curve.train_loss.len(), 3);
        assert!(curve.train_loss.windows(2).all(|p| p[0] == p[1]));
        assert!(curve.heldout_accuracy.windows(2).all(|p| p[0] == p[1]));
    }

    #[test]
    fn single_step_moves_by_scaled_gradient() {
        let sample = small_sample(2);
        let cfg = TrainConfig { learning_rate: 0.05, epochs: 1, batch_size: 1, ..TrainConfig::default() };
        let (_, g) = loss_and_weight_gradient(&sample, &WeightMatrix::identity(4, 1.0), &cfg).unwrap();
        let (w, _) = train(std::slice::from_ref(&sample), &[], &cfg).unwrap();
        let mut expected = WeightMatrix::identity(4, 1.0).w;
        expected.scaled_add(-0.05, &g);
        assert_eq!(w.w, expected);
    }

    #[test]
    fn weight_gradient_matches_differences() {
        let sample = small_sample(4);
        let cfg = TrainConfig { unroll: UnrollConfig::fixed(5, 30), ..TrainConfig::default() };
        let w = WeightMatrix { w: Array2::from_shape_fn((4, 4), |(r, c)| if r == c { 1.0 } else { 0.1 * (r + 2 * c) as f64 }) };
        let (_, g) = loss_and_weight_gradient(&sample, &w, &cfg).unwrap();
        let h = 1e-5;
        for (r, c) in [(0, 0), (1, 3), (2, 1), (3, 3)] {
            let mut plus = w.clone();
            plus.w[[r, c]] += h;
            let mut minus = w.clone();
            minus.w[[r, c]] -= h;
            let fd = (loss_and_weight_gradient(&sample, &plus, &cfg).unwrap().0
                - loss_and_weight_gradient(&sample, &minus, &cfg).unwrap().0)
                / (2.0 * h);
            assert!((fd - g[[r, c]]).abs() <= 1e-4 * fd.abs().max(g[[r, c]].abs()).max(1e-8), "({r},{c}): {fd} vs {}", g[[r, c]]);
        }
    }

    #[test]
    fn loss_through_solver_passes_tape_check() {
        let sample = small_sample(5);
        let mut aff = edge_affinity(&sample.g1, &sample.g2).unwrap();
        aff = aff.with_unary(node_affinity(&sample.g1, &sample.g2, &WeightMatrix::identity(4, 1.0)).unwrap()).unwrap();
        let loss = LossSpec::CrossEntropy { truth: sample.truth.clone(), mask: sample.mask.clone() };
        let cfg = GradConfig { method: DiffMethod::Dpgm, ..GradConfig::default() };
        let report = finite_diff_check(&aff, &cfg, &loss, 1e-6).unwrap();
        assert!(report.max_rel_error <= 1e-4, "{}", report.max_rel_error);
    }

    #[test]
    fn noiseless_planted_pairs_are_related_by_the_truth() {
        let spec = PlantedMetricSpec { n_in: 6, dim: 5, sigma: 0.0, edge_noise: 0.0, ..PlantedMetricSpec::default() };
        for s in planted_metric_dataset(&spec, 3, 8).unwrap() {
            for i in 0..6 {
                for i2 in 0..6 {
                    assert_eq!(s.g1.has_edge(i, i2), s.g2.has_edge(s.truth.target(i), s.truth.target(i2)));
                }
                let norm: f64 = s.g2.feature(s.truth.target(i)).iter().map(|x| x * x).sum();
                assert!((norm - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn training_rejects_bad_configs() {
        let data = planted_metric_dataset(&PlantedMetricSpec { n_in: 4, dim: 3, ..PlantedMetricSpec::default() }, 2, 0).unwrap();
        assert!(matches!(train(&[], &[], &TrainConfig::default()), Err(Error::Config(_))));
        let cfg = TrainConfig { batch_size: 0, ..TrainConfig::default() };
        assert!(matches!(train(&data, &[], &cfg), Err(Error::Config(_))));
        let cfg = TrainConfig { learning_rate: -1.0, ..TrainConfig::default() };
        assert!(matches!(train(&data, &[], &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn huge_learning_rate_reports_divergence_or_stays_finite() {
        let data = planted_metric_dataset(&PlantedMetricSpec { n_in: 5, dim: 4, ..PlantedMetricSpec::default() }, 4, 1).unwrap();
        let cfg = TrainConfig { learning_rate: 1e300, epochs: 3, batch_size: 1, ..TrainConfig::default() };
        match train(&data, &[], &cfg) {
            Ok((w, curve)) => {
                assert!(w.w.iter().all(|v| v.is_finite()));
                assert!(curve.train_loss.iter().all(|l| l.is_finite()));
            }
            Err(e) => assert!(matches!(e, Error::Divergence(_)), "{e}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn loss_is_nonnegative(z in proptest::collection::vec(0.0f64..=1.0, 9), shift in 0usize..3) {
            let truth = PermutationMatching::new((0..3).map(|i| (i + shift) % 3).collect()).unwrap();
            let (l, _) = cross_entropy_with_grad(&z, &truth, &NodeMask::all(3)).unwrap();
            prop_assert!(l >= 0.0);
        }

        #[test]
        fn relabeling_the_second_graph_keeps_the_loss(seed in 0u64..200, rot in 1usize..5) {
            let sample = small_sample(seed);
            let n = sample.n();
            let perm: Vec<usize> = (0..n).map(|j| (j + rot) % n).collect();
            let g2 = sample.g2.permuted(&perm).unwrap();
            let truth = PermutationMatching::new((0..n).map(|i| perm[sample.truth.target(i)]).collect()).unwrap();
            let relabeled = KeypointPairSample { g2, truth, ..sample.clone() };
            let cfg = TrainConfig::default();
            let w = WeightMatrix::identity(4, 1.0);
            let a = loss_and_weight_gradient(&sample, &w, &cfg).unwrap().0;
            let b = loss_and_weight_gradient(&relabeled, &w, &cfg).unwrap().0;
            prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{} vs {}", a, b);
        }
    }
}
