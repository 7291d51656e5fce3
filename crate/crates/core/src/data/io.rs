use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::KeypointPairSample;
use crate::error::{Error, Result};
use crate::problem::{pad_to_equal_size, GraphInstance, PermutationMatching};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub features: Vec<Vec<f64>>,
    pub edges: Vec<[usize; 2]>,
}

impl GraphJson {
    pub fn from_graph(g: &GraphInstance) -> Self {
        Self { features: g.features().to_vec(), edges: g.edges().iter().map(|&(a, b)| [a, b]).collect() }
    }

    pub fn to_graph(&self) -> Result<GraphInstance> {
        GraphInstance::new(self.features.clone(), self.edges.iter().map(|&[a, b]| (a, b)).collect())
    }
}

/// On-disk graph pair. `truth[i]` is the node of `g2` matched to node `i`
/// of `g1`; `mask` flags genuine nodes and defaults to all of them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphPairJson {
    pub g1: GraphJson,
    pub g2: GraphJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<MaskJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskJson {
    pub rows: Vec<bool>,
    pub cols: Vec<bool>,
}

impl GraphPairJson {
    pub fn from_sample(s: &KeypointPairSample) -> Self {
        Self {
            g1: GraphJson::from_graph(&s.g1),
            g2: GraphJson::from_graph(&s.g2),
            truth: Some(s.truth.assignment().to_vec()),
            mask: (!s.mask.is_empty()).then(|| MaskJson { rows: s.mask.rows.clone(), cols: s.mask.cols.clone() }),
        }
    }

    /// Builds equal-size graphs, padding the smaller one with auxiliary
    /// nodes. Without a truth the identity stands in, so only the graphs and
    /// mask are meaningful; `has_truth` reports which case applies.
    pub fn to_sample(&self) -> Result<(KeypointPairSample, bool)> {
        let g1 = self.g1.to_graph()?;
        let g2 = self.g2.to_graph()?;
        let (n1, n2) = (g1.n(), g2.n());
        if g1.dim() != g2.dim() && n1 > 0 && n2 > 0 {
            return Err(Error::DimensionMismatch { expected: g1.dim(), found: g2.dim() });
        }
        let (p1, p2, mut mask) = pad_to_equal_size(&g1, &g2);
        let n = p1.n();
        if let Some(m) = &self.mask {
            if m.rows.len() != n1 || m.cols.len() != n2 {
                return Err(Error::invalid("mask lengths must equal the graph sizes"));
            }
            for (slot, &g) in mask.rows.iter_mut().zip(&m.rows) {
                *slot &= g;
            }
            for (slot, &g) in mask.cols.iter_mut().zip(&m.cols) {
                *slot &= g;
            }
        }
        let truth = match &self.truth {
            None => PermutationMatching::identity(n),
            Some(t) => complete_injection(t, n1, n2, n)?,
        };
        Ok((KeypointPairSample { g1: p1, g2: p2, truth, mask }, self.truth.is_some()))
    }
}

/// Extends an injection of `n1` rows into `n2` columns to a permutation of
/// `n`, assigning the unused columns to the padding rows in order.
fn complete_injection(t: &[usize], n1: usize, n2: usize, n: usize) -> Result<PermutationMatching> {
    if t.len() != n1 {
        return Err(Error::DimensionMismatch { expected: n1, found: t.len() });
    }
    let mut used = vec![false; n];
    for &j in t {
        if j >= n2 || used[j] {
            return Err(Error::invalid(format!("truth is not an injection into {n2} nodes")));
        }
        used[j] = true;
    }
    let mut assignment = t.to_vec();
    assignment.extend((0..n).filter(|&j| !used[j]));
    PermutationMatching::new(assignment)
}

pub fn read_pair(path: &Path) -> Result<GraphPairJson> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_pair(pair: &GraphPairJson, path: &Path) -> Result<()> {
    write_json(pair, path)
}

/// Reads a JSON array of graph pairs.
pub fn read_dataset(path: &Path) -> Result<Vec<GraphPairJson>> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_dataset(pairs: &[GraphPairJson], path: &Path) -> Result<()> {
    write_json(&pairs, path)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
