//! Deterministic local-scale network builders and the seeded stochastic
//! block model, plus the community-removal step the large-scale
//! experiments nest on.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::graph::Graph;
use crate::opinions::CommunityAssignment;
use crate::seed;

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("community network needs at least {needed} nodes for {communities} communities, got {got}")]
    TooFewNodes { communities: usize, needed: usize, got: usize },
    #[error("{nodes} nodes cannot be split into {communities} equal communities")]
    Unbalanced { communities: usize, nodes: usize },
    #[error("edge probabilities must satisfy 0 <= p_out < p_in <= 1 (p_in={p_in}, p_out={p_out})")]
    BadProbabilities { p_in: f64, p_out: f64 },
    #[error("no connected sample in {0} attempts")]
    ConnectivityFailure(usize),
    #[error("cannot remove community: at least 2 must remain")]
    LastCommunities,
    #[error("community {index} out of range for {count} communities")]
    BadCommunity { index: usize, count: usize },
}

/// Path graph: node i connected to node i+1.
pub fn chain(n: usize) -> Graph {
    assert!(n >= 1);
    let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
    Graph::new(n, &edges).expect("chain edges are valid")
}

/// Clique: every node connected to every other.
pub fn complete(n: usize) -> Graph {
    assert!(n >= 1);
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push((i, j));
        }
    }
    Graph::new(n, &edges).expect("clique edges are valid")
}

/// Equal-size complete subgraphs joined by two bridge edges between each
/// neighboring pair: a ring for three or more communities, a single
/// adjacent pair for two. Bridge endpoints are the last/second-last node
/// of one community and the first/second node of the next.
pub fn community_network(
    n_comms: usize,
    total_nodes: usize,
) -> Result<(Graph, CommunityAssignment), GeneratorError> {
    assert!(n_comms >= 2);
    if total_nodes < 3 * n_comms {
        return Err(GeneratorError::TooFewNodes {
            communities: n_comms,
            needed: 3 * n_comms,
            got: total_nodes,
        });
    }
    if total_nodes % n_comms != 0 {
        return Err(GeneratorError::Unbalanced { communities: n_comms, nodes: total_nodes });
    }
    let size = total_nodes / n_comms;
    let mut edges = Vec::new();
    for c in 0..n_comms {
        let base = c * size;
        for i in 0..size {
            for j in (i + 1)..size {
                edges.push((base + i, base + j));
            }
        }
    }
    let pair_count = if n_comms == 2 { 1 } else { n_comms };
    for c in 0..pair_count {
        let here = c * size;
        let next = ((c + 1) % n_comms) * size;
        edges.push((here + size - 1, next));
        edges.push((here + size - 2, next + 1));
    }
    let graph = Graph::new(total_nodes, &edges).expect("community edges are valid");
    let assignment = CommunityAssignment::contiguous_blocks(n_comms, total_nodes);
    Ok((graph, assignment))
}

/// Planted-partition stochastic block model parameters.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SbmParams {
    pub community_count: usize,
    pub community_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub rng_seed: u64,
}

impl SbmParams {
    /// Assortativity constraint: 0 <= p_out < p_in <= 1.
    pub fn validate(&self) -> Result<(), GeneratorError> {
        assert!(self.community_count >= 2);
        assert!(self.community_size >= 1);
        if !(self.p_out >= 0.0 && self.p_out < self.p_in && self.p_in <= 1.0) {
            return Err(GeneratorError::BadProbabilities { p_in: self.p_in, p_out: self.p_out });
        }
        Ok(())
    }

    /// Warn (not error) when a community's expected internal degree does
    /// not dominate its expected external degree, p_in <= (n-1) p_out.
    pub fn assortativity_warning(&self) -> Option<String> {
        let n = self.community_count as f64;
        if self.p_in <= (n - 1.0) * self.p_out {
            Some(format!(
                "p_in = {} <= (n-1) p_out = {}: expected within-community edges \
                 do not dominate cross edges",
                self.p_in,
                (n - 1.0) * self.p_out
            ))
        } else {
            None
        }
    }
}

const SBM_MAX_ATTEMPTS: usize = 100;

/// Sample a planted-partition graph. Each potential edge is drawn
/// independently in lexicographic pair order, so a seed fully determines
/// the graph. Disconnected samples are redrawn with a fresh derived seed,
/// up to 100 attempts.
pub fn sbm(params: &SbmParams) -> Result<(Graph, CommunityAssignment), GeneratorError> {
    params.validate()?;
    let total = params.community_count * params.community_size;
    let assignment = CommunityAssignment::contiguous_blocks(params.community_count, total);
    for attempt in 0..SBM_MAX_ATTEMPTS {
        let mut rng = ChaCha12Rng::seed_from_u64(seed::mix(params.rng_seed, attempt as u64));
        let mut edges = Vec::new();
        for i in 0..total {
            for j in (i + 1)..total {
                let p = if assignment.community_of(i) == assignment.community_of(j) {
                    params.p_in
                } else {
                    params.p_out
                };
                if rng.gen::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        let graph = Graph::new(total, &edges).expect("sbm edges are valid");
        if graph.is_connected() {
            return Ok((graph, assignment));
        }
    }
    Err(GeneratorError::ConnectivityFailure(SBM_MAX_ATTEMPTS))
}

/// Drop one community and its incident edges. Remaining nodes are
/// reindexed contiguously in their original order; edges among them are
/// unchanged. At least two communities must remain.
pub fn remove_community(
    graph: &Graph,
    assignment: &CommunityAssignment,
    community: usize,
) -> Result<(Graph, CommunityAssignment), GeneratorError> {
    let count = assignment.community_count();
    if community >= count {
        return Err(GeneratorError::BadCommunity { index: community, count });
    }
    if count <= 2 {
        return Err(GeneratorError::LastCommunities);
    }
    let mut new_index = vec![usize::MAX; graph.node_count()];
    let mut membership = Vec::new();
    let mut kept = 0usize;
    for node in 0..graph.node_count() {
        let c = assignment.community_of(node);
        if c != community {
            new_index[node] = kept;
            kept += 1;
            membership.push(if c > community { c - 1 } else { c });
        }
    }
    let edges: Vec<(usize, usize)> = graph
        .edges()
        .iter()
        .filter(|&&(a, b)| new_index[a] != usize::MAX && new_index[b] != usize::MAX)
        .map(|&(a, b)| (new_index[a], new_index[b]))
        .collect();
    let graph = Graph::new(kept, &edges).expect("restricted edges are valid");
    let assignment =
        CommunityAssignment::new(membership, count - 1).expect("kept communities are nonempty");
    Ok((graph, assignment))
}
