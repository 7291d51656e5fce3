//! Instance generators, affinity kernels, Delaunay graphs and JSON I/O.

mod geometry;
mod io;
mod pointcloud;
mod synthetic;

use crate::problem::{GraphInstance, NodeMask, PermutationMatching};

pub use geometry::delaunay;
pub use io::{read_dataset, read_pair, write_dataset, write_pair, GraphJson, GraphPairJson, MaskJson};
pub use pointcloud::{gen_point_pair, house_affinity, load_landmarks, PointCloudSpec, HOUSE_SCALE};
pub use synthetic::{erdos_renyi, gen_er_pair, random_affinity, synthetic_affinity, SyntheticSpec, SYNTHETIC_SCALE};

/// Two graphs with a planted correspondence on their genuine nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointPairSample {
    pub g1: GraphInstance,
    pub g2: GraphInstance,
    /// `truth[i]` is the node of `g2` matched to node `i` of `g1`. Entries for
    /// masked rows complete the bijection but carry no meaning.
    pub truth: PermutationMatching,
    pub mask: NodeMask,
}

impl KeypointPairSample {
    pub fn n(&self) -> usize {
        self.g1.n()
    }
}
