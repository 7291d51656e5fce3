//! Problem representation: graphs, affinities, relaxed and discrete
//! assignments, objectives and the exhaustive oracle.

mod affinity;
mod assignment;
mod graph;
mod matching;
mod objective;
mod oracle;
mod params;

pub use affinity::{AffinityDecomposition, PairwiseEntry, DENSE_LIMIT};
pub use assignment::{discretize, max_weight_assignment};
pub use graph::{pad_to_equal_size, GraphInstance, NodeMask};
pub use matching::{MatchingState, PermutationMatching};
pub use objective::{qap_objective, relaxed_objective};
pub use oracle::{brute_force_qap, BRUTE_FORCE_LIMIT};
pub use params::{SolverParams, SolverTrace};
