use ndarray::Array2;

use crate::error::{Error, Result};

/// Relaxed assignment: a nonnegative `n × n` matrix whose entry `(i, j)` is
/// the weight on matching node `i` of the first graph to node `j` of the
/// second. Doubly stochastic after a Sinkhorn projection.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchingState {
    z: Array2<f64>,
}

impl MatchingState {
    pub fn new(z: Array2<f64>) -> Result<Self> {
        let (r, c) = z.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        Ok(Self { z: z.as_standard_layout().into_owned() })
    }

    /// Builds a state from a row-major vector of length `n²`.
    pub fn from_vec(n: usize, z: Vec<f64>) -> Result<Self> {
        if z.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, found: z.len() });
        }
        Ok(Self { z: Array2::from_shape_vec((n, n), z).expect("length checked") })
    }

    /// The barycenter `1/n` of the doubly stochastic matrices.
    pub fn uniform(n: usize) -> Self {
        Self { z: Array2::from_elem((n, n), 1.0 / n as f64) }
    }

    /// The 0/1 matrix of a permutation.
    pub fn from_permutation(p: &PermutationMatching) -> Self {
        let n = p.len();
        let mut z = Array2::zeros((n, n));
        for (i, &j) in p.assignment().iter().enumerate() {
            z[[i, j]] = 1.0;
        }
        Self { z }
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.z
    }

    pub fn into_matrix(self) -> Array2<f64> {
        self.z
    }

    /// Row-major `n²` view.
    pub fn as_slice(&self) -> &[f64] {
        self.z.as_slice().expect("standard layout")
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.z[[i, j]]
    }

    /// Largest deviation of any row or column sum from one.
    pub fn stochastic_deviation(&self) -> f64 {
        let rows = self.z.rows().into_iter().map(|r| (r.sum() - 1.0).abs());
        let cols = self.z.columns().into_iter().map(|c| (c.sum() - 1.0).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }

    /// `max |a - b|` over entries.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.as_slice()
            .iter()
            .zip(other.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `‖a - b‖²₂`.
    pub fn squared_distance(&self, other: &Self) -> f64 {
        self.as_slice().iter().zip(other.as_slice()).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// A bijection from the nodes of the first graph to those of the second.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PermutationMatching {
    assignment: Vec<usize>,
}

impl PermutationMatching {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        let n = assignment.len();
        let mut seen = vec![false; n];
        for &j in &assignment {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::invalid(format!("{assignment:?} is not a permutation")));
            }
        }
        Ok(Self { assignment })
    }

    pub fn identity(n: usize) -> Self {
        Self { assignment: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    /// Matched node of `i` in the second graph.
    pub fn target(&self, i: usize) -> usize {
        self.assignment[i]
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &j) in self.assignment.iter().enumerate() {
            inv[j] = i;
        }
        Self { assignment: inv }
    }

    /// Flattened 0/1 indicator of length `n²`.
    pub fn indicator(&self) -> Vec<f64> {
        let n = self.len();
        let mut x = vec![0.0; n * n];
        for (i, &j) in self.assignment.iter().enumerate() {
            x[i * n + j] = 1.0;
        }
        x
    }
}
