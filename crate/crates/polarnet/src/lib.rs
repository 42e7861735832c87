//! Multipolar polarization metrics on attributed networks.
//!
//! The crate measures how polarized a network is when each node holds a
//! stance in `[0, 1]` towards each of several opinions. The core primitive
//! is the generalized Euclidean distance built on the Moore-Penrose
//! pseudoinverse of the graph Laplacian; on top of it sit five candidate
//! polarization metrics (APD, ADM, PC, MDS, TV), deterministic and
//! stochastic network generators, and a synthetic experiment harness that
//! classifies each metric's trend under four scenarios.

pub mod experiments;
pub mod generators;
pub mod graph;
pub mod manifest;
pub mod metrics;
pub mod opinions;
pub mod seed;

pub use graph::{Graph, GraphError, LaplacianKernel};
pub use opinions::{CommunityAssignment, OpinionError, OpinionMatrix};
