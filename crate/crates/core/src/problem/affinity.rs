use std::collections::HashSet;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::problem::GraphInstance;

/// Largest `n` for which [`AffinityDecomposition::to_dense`] will allocate
/// the `n² × n²` matrix.
pub const DENSE_LIMIT: usize = 80;

/// One symmetric off-diagonal weight of the pairwise matrix: the value sits at
/// both `(first, second)` and `(second, first)`.
///
/// Indices are flattened row-major, `i * n + j` meaning "node `i` of the first
/// graph matched to node `j` of the second".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairwiseEntry {
    pub first: usize,
    pub second: usize,
    pub weight: f64,
}

/// The affinity matrix `M = diag(u) + P`, with `P` kept sparse.
#[derive(Clone, Debug, PartialEq)]
pub struct AffinityDecomposition {
    n: usize,
    u: Array1<f64>,
    entries: Vec<PairwiseEntry>,
}

impl AffinityDecomposition {
    /// Validates nonnegativity, finiteness, index ranges, the zero diagonal of
    /// `P` and that no symmetric position is stored twice.
    pub fn new(n: usize, u: Array1<f64>, entries: Vec<PairwiseEntry>) -> Result<Self> {
        let nn = n * n;
        if u.len() != nn {
            return Err(Error::DimensionMismatch { expected: nn, found: u.len() });
        }
        if let Some(bad) = u.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("unary affinity {bad} is not a finite nonnegative value")));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if e.first >= nn || e.second >= nn {
                return Err(Error::invalid(format!(
                    "pairwise index ({}, {}) out of range for n = {n}",
                    e.first, e.second
                )));
            }
            if e.first == e.second {
                return Err(Error::invalid("pairwise matrix must have a zero diagonal"));
            }
            if !e.weight.is_finite() || e.weight < 0.0 {
                return Err(Error::invalid(format!("pairwise weight {} is not finite and nonnegative", e.weight)));
            }
            if !seen.insert((e.first.min(e.second), e.first.max(e.second))) {
                return Err(Error::invalid(format!(
                    "pairwise position ({}, {}) stored twice",
                    e.first, e.second
                )));
            }
        }
        Ok(Self { n, u, entries })
    }

    /// Builds `P` on the support `E1 × E2`. For every edge `{a, b}` of `g1` and
    /// `{c, d}` of `g2`, `weight(i, i2, j, j2)` is queried for the aligned
    /// orientation `(a, b, c, d)` and the crossed one `(a, b, d, c)`; the
    /// result is stored at `P[(i,j),(i2,j2)]` and its mirror.
    pub fn from_edge_pairs<F>(g1: &GraphInstance, g2: &GraphInstance, u: Array1<f64>, mut weight: F) -> Result<Self>
    where
        F: FnMut(usize, usize, usize, usize) -> f64,
    {
        if g1.n() != g2.n() {
            return Err(Error::DimensionMismatch { expected: g1.n(), found: g2.n() });
        }
        let n = g1.n();
        let mut entries = Vec::with_capacity(2 * g1.edges().len() * g2.edges().len());
        for &(a, b) in g1.edges() {
            for &(c, d) in g2.edges() {
                for (j, j2) in [(c, d), (d, c)] {
                    entries.push(PairwiseEntry { first: a * n + j, second: b * n + j2, weight: weight(a, b, j, j2) });
                }
            }
        }
        Self::new(n, u, entries)
    }

    /// Koopman-Beckmann affinity `M = A1 ⊗ A2` with no unary term.
    pub fn koopman_beckmann(g1: &GraphInstance, g2: &GraphInstance) -> Result<Self> {
        let n = g1.n();
        Self::from_edge_pairs(g1, g2, Array1::zeros(n * n), |_, _, _, _| 1.0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn u(&self) -> &Array1<f64> {
        &self.u
    }

    pub fn entries(&self) -> &[PairwiseEntry] {
        &self.entries
    }

    /// Copy with a replaced unary vector.
    pub fn with_unary(&self, u: Array1<f64>) -> Result<Self> {
        Self::new(self.n, u, self.entries.clone())
    }

    /// Copy with replaced pairwise weights, in entry order.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self> {
        if weights.len() != self.entries.len() {
            return Err(Error::DimensionMismatch { expected: self.entries.len(), found: weights.len() });
        }
        let entries = self
            .entries
            .iter()
            .zip(weights)
            .map(|(e, &w)| PairwiseEntry { weight: w, ..*e })
            .collect();
        Self::new(self.n, self.u.clone(), entries)
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    /// `u` viewed as an `n × n` matrix.
    pub fn unary_matrix(&self) -> Array2<f64> {
        Array2::from_shape_vec((self.n, self.n), self.u.to_vec()).expect("u has n² entries")
    }

    /// Message passing `y = P z` over the stored edge pairs.
    pub fn message_pass(&self, z: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; z.len()];
        for e in &self.entries {
            y[e.first] += e.weight * z[e.second];
            y[e.second] += e.weight * z[e.first];
        }
        y
    }

    /// `y = M z = u ⊙ z + P z`.
    pub fn affinity_mul(&self, z: &[f64]) -> Vec<f64> {
        let mut y = self.message_pass(z);
        for ((y, u), z) in y.iter_mut().zip(&self.u).zip(z) {
            *y += u * z;
        }
        y
    }

    /// `zᵀ P z`.
    pub fn pairwise_energy(&self, z: &[f64]) -> f64 {
        self.entries.iter().map(|e| 2.0 * e.weight * z[e.first] * z[e.second]).sum()
    }

    /// `uᵀ z + zᵀ P z`, the energy of the quadratic assignment objective.
    pub fn energy(&self, z: &[f64]) -> f64 {
        self.u.iter().zip(z).map(|(u, z)| u * z).sum::<f64>() + self.pairwise_energy(z)
    }

    /// Lipschitz bound `|E1| · |E2|` on the energy gradient for Koopman-Beckmann
    /// style affinities: the number of distinct edge pairs (two oriented
    /// entries per pair). Diagnostic only.
    pub fn lipschitz_estimate(&self) -> f64 {
        self.entries.len() as f64 / 2.0
    }

    /// Dense `M = diag(u) + P`. Refused above [`DENSE_LIMIT`].
    pub fn to_dense(&self) -> Result<Array2<f64>> {
        if self.n > DENSE_LIMIT {
            return Err(Error::SizeLimit { n: self.n, max: DENSE_LIMIT });
        }
        let nn = self.n * self.n;
        let mut m = Array2::from_diag(&self.u);
        debug_assert_eq!(m.dim(), (nn, nn));
        for e in &self.entries {
            m[[e.first, e.second]] += e.weight;
            m[[e.second, e.first]] += e.weight;
        }
        Ok(m)
    }

    /// Relabels both graphs: node `i` of G1 becomes `p1[i]`, node `j` of G2
    /// becomes `p2[j]`.
    pub fn relabeled(&self, p1: &[usize], p2: &[usize]) -> Result<Self> {
        let n = self.n;
        let map = |k: usize| p1[k / n] * n + p2[k % n];
        let mut u = Array1::zeros(n * n);
        for (k, &v) in self.u.iter().enumerate() {
            u[map(k)] = v;
        }
        let entries = self
            .entries
            .iter()
            .map(|e| PairwiseEntry { first: map(e.first), second: map(e.second), weight: e.weight })
            .collect();
        Self::new(n, u, entries)
    }
}
