//! Graph matching by proximal steps on an entropy-regularized quadratic
//! assignment relaxation.
//!
//! The crate is organised around an [`AffinityDecomposition`] (unary vector
//! `u` plus a sparse, symmetric pairwise matrix `P`) that every solver
//! consumes:
//!
//! * [`solver`]: the proximal matcher. Each step is a closed-form
//!   KL-proximal update followed by a Sinkhorn projection.
//! * [`baselines`]: spectral matching, RRWM, graduated assignment and IPFP.
//! * [`grad`]: reverse-mode gradients through the unrolled solvers.
//! * [`learn`]: a learnable node-affinity metric trained through the solver.
//! * [`data`] and [`harness`]: instance generators and the benchmark runner.

pub mod baselines;
pub mod data;
pub mod error;
pub mod grad;
pub mod harness;
pub mod learn;
pub mod problem;
pub mod sinkhorn;
pub mod solver;

pub use error::{Error, Result};
pub use problem::{
    brute_force_qap, discretize, pad_to_equal_size, qap_objective, relaxed_objective,
    AffinityDecomposition, GraphInstance, MatchingState, NodeMask, PairwiseEntry,
    PermutationMatching, SolverParams, SolverTrace,
};
pub use sinkhorn::{sinkhorn_normalize, SinkhornConfig, SinkhornOutput};
pub use solver::{dpgm_solve, DpgmResult};
