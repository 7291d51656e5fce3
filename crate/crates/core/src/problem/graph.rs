use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// An undirected graph with one feature vector per node.
///
/// Edges are stored once as `(lo, hi)` pairs with `lo < hi`, sorted.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphInstance {
    features: Vec<Vec<f64>>,
    edges: Vec<(usize, usize)>,
}

impl GraphInstance {
    /// Builds a graph, normalising edge orientation and rejecting self-loops,
    /// duplicate edges, out-of-range endpoints and ragged feature vectors.
    pub fn new(features: Vec<Vec<f64>>, edges: Vec<(usize, usize)>) -> Result<Self> {
        let n = features.len();
        if let Some(first) = features.first() {
            let dim = first.len();
            if let Some(bad) = features.iter().find(|f| f.len() != dim) {
                return Err(Error::DimensionMismatch { expected: dim, found: bad.len() });
            }
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in &edges {
            if a >= n || b >= n {
                return Err(Error::invalid(format!("edge ({a}, {b}) out of range for {n} nodes")));
            }
            if a == b {
                return Err(Error::invalid(format!("self-loop on node {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::invalid(format!("duplicate edge ({a}, {b})")));
            }
        }
        Ok(Self { features, edges: seen.into_iter().collect() })
    }

    /// Graph without edges.
    pub fn isolated(features: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(features, Vec::new())
    }

    pub fn n(&self) -> usize {
        self.features.len()
    }

    /// Feature dimension; zero for an empty graph.
    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let n = self.n();
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in &self.edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        adj
    }

    /// Euclidean distance between the feature vectors of two nodes.
    pub fn feature_distance(&self, a: usize, b: usize) -> f64 {
        self.features[a]
            .iter()
            .zip(&self.features[b])
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Relabels nodes so that old node `i` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: perm.len() });
        }
        let mut features = vec![Vec::new(); self.n()];
        for (i, &p) in perm.iter().enumerate() {
            features[p] = self.features[i].clone();
        }
        let edges = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        Self::new(features, edges)
    }
}

/// Marks which rows (nodes of the first graph) and columns (nodes of the
/// second graph) are genuine. Auxiliary padding nodes and outliers are
/// excluded from accuracy and loss evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeMask {
    pub rows: Vec<bool>,
    pub cols: Vec<bool>,
}

impl NodeMask {
    /// Mask with every node genuine.
    pub fn all(n: usize) -> Self {
        Self { rows: vec![true; n], cols: vec![true; n] }
    }

    /// True when no node is masked out.
    pub fn is_empty(&self) -> bool {
        self.rows.iter().chain(&self.cols).all(|&g| g)
    }

    pub fn masked_rows(&self) -> usize {
        self.rows.iter().filter(|&&g| !g).count()
    }

    pub fn masked_cols(&self) -> usize {
        self.cols.iter().filter(|&&g| !g).count()
    }

    pub fn entry(&self, i: usize, j: usize) -> bool {
        self.rows[i] && self.cols[j]
    }
}

/// Pads the smaller graph with isolated, zero-feature auxiliary nodes so
/// both graphs have `max(n1, n2)` nodes. The returned mask flags the
/// auxiliary rows and columns.
pub fn pad_to_equal_size(
    g1: &GraphInstance,
    g2: &GraphInstance,
) -> (GraphInstance, GraphInstance, NodeMask) {
    let n = g1.n().max(g2.n());
    let pad = |g: &GraphInstance, dim: usize| -> GraphInstance {
        let mut features = g.features.clone();
        features.resize(n, vec![0.0; dim]);
        GraphInstance { features, edges: g.edges.clone() }
    };
    let dim = g1.dim().max(g2.dim());
    let mask = NodeMask {
        rows: (0..n).map(|i| i < g1.n()).collect(),
        cols: (0..n).map(|j| j < g2.n()).collect(),
    };
    (pad(g1, dim), pad(g2, dim), mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(n: usize) -> Vec<Vec<f64>> {
        (0..n).map(|i| vec![i as f64, 1.0]).collect()
    }

    #[test]
    fn rejects_malformed_graphs() {
        assert!(GraphInstance::new(feats(3), vec![(0, 3)]).is_err());
        assert!(GraphInstance::new(feats(3), vec![(1, 1)]).is_err());
        assert!(GraphInstance::new(feats(3), vec![(0, 1), (1, 0)]).is_err());
        let ragged = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(matches!(
            GraphInstance::new(ragged, vec![]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn edges_are_normalised() {
        let g = GraphInstance::new(feats(3), vec![(2, 0), (1, 0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1), (0, 2)]);
        assert!(g.has_edge(2, 0));
        assert!(!g.has_edge(1, 2));
    }

    #[test]
    fn padding_equal_sizes_is_noop() {
        let g1 = GraphInstance::new(feats(3), vec![(0, 1)]).unwrap();
        let g2 = GraphInstance::new(feats(3), vec![(1, 2)]).unwrap();
        let (p1, p2, mask) = pad_to_equal_size(&g1, &g2);
        assert_eq!(p1, g1);
        assert_eq!(p2, g2);
        assert!(mask.is_empty());
    }

    #[test]
    fn padding_adds_isolated_zero_nodes() {
        let g1 = GraphInstance::new(feats(3), vec![(0, 1), (1, 2)]).unwrap();
        let g2 = GraphInstance::new(feats(5), vec![(0, 4)]).unwrap();
        let (p1, p2, mask) = pad_to_equal_size(&g1, &g2);
        assert_eq!(p1.n(), 5);
        assert_eq!(p2, g2);
        assert_eq!(p1.edges(), g1.edges());
        assert_eq!(p1.feature(3), &[0.0, 0.0]);
        assert_eq!(p1.feature(4), &[0.0, 0.0]);
        assert_eq!(mask.rows, vec![true, true, true, false, false]);
        assert_eq!(mask.masked_cols(), 0);
    }

    #[test]
    fn permutation_relabels_edges_and_features() {
        let g = GraphInstance::new(feats(3), vec![(0, 1)]).unwrap();
        let p = g.permuted(&[2, 0, 1]).unwrap();
        assert!(p.has_edge(2, 0));
        assert_eq!(p.feature(2), g.feature(0));
    }
}
