//! Opinion matrices and the constructors/samplers the experiments need.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Entries may stray this far outside [0, 1] before validation flags them.
const RANGE_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum OpinionError {
    #[error("expected {expected} communities, got {got}")]
    WrongCommunityCount { expected: usize, got: usize },
    #[error("columns {0} and {1} are not orthogonal")]
    NotOrthogonal(usize, usize),
    #[error("rotation pushes stance ({row}, {col}) to {value} outside [0, 1]")]
    RangeViolation { row: usize, col: usize, value: f64 },
    #[error("rotation angle {0} outside [0, 45] degrees")]
    BadAngle(f64),
    #[error("opinion column {0} is the zero vector")]
    ZeroVector(usize),
    #[error("community {0} has no members")]
    EmptyCommunity(usize),
    #[error("membership index {index} out of range for {count} communities")]
    BadMembership { index: usize, count: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Partition of the nodes into communities, indices `0..community_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunityAssignment {
    membership: Vec<usize>,
    community_count: usize,
}

impl CommunityAssignment {
    /// Every community index must occur at least once.
    pub fn new(membership: Vec<usize>, community_count: usize) -> Result<Self, OpinionError> {
        assert!(community_count > 0, "community_count must be positive");
        let mut seen = vec![false; community_count];
        for &m in &membership {
            if m >= community_count {
                return Err(OpinionError::BadMembership { index: m, count: community_count });
            }
            seen[m] = true;
        }
        if let Some(c) = seen.iter().position(|&s| !s) {
            return Err(OpinionError::EmptyCommunity(c));
        }
        Ok(Self { membership, community_count })
    }

    /// `total_nodes` split into `communities` equal contiguous blocks.
    pub fn contiguous_blocks(communities: usize, total_nodes: usize) -> Self {
        assert_eq!(total_nodes % communities, 0, "unbalanced blocks");
        let size = total_nodes / communities;
        let membership = (0..total_nodes).map(|i| i / size).collect();
        Self { membership, community_count: communities }
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn community_count(&self) -> usize {
        self.community_count
    }

    pub fn node_count(&self) -> usize {
        self.membership.len()
    }

    pub fn community_of(&self, node: usize) -> usize {
        self.membership[node]
    }

    /// Membership CSV: header `node,community`, one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,community\n");
        for (node, &community) in self.membership.iter().enumerate() {
            writeln!(out, "{node},{community}").unwrap();
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, OpinionError> {
        let mut membership = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("node")) {
                continue;
            }
            let mut parts = line.split(',');
            let (node, community) = match (parts.next(), parts.next()) {
                (Some(n), Some(c)) => (n.trim(), c.trim()),
                _ => {
                    return Err(OpinionError::Parse {
                        line: lineno + 1,
                        message: format!("expected node,community, got {line:?}"),
                    })
                }
            };
            let parse = |s: &str| {
                s.parse::<usize>().map_err(|_| OpinionError::Parse {
                    line: lineno + 1,
                    message: format!("bad index {s:?}"),
                })
            };
            let (node, community) = (parse(node)?, parse(community)?);
            if node != membership.len() {
                return Err(OpinionError::Parse {
                    line: lineno + 1,
                    message: format!("node {node} out of order"),
                });
            }
            membership.push(community);
        }
        let count = membership.iter().max().map_or(0, |&m| m + 1);
        Self::new(membership, count.max(1))
    }
}

/// One reported problem with an opinion matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    OutOfRange { row: usize, col: usize, value: f64 },
    ZeroColumn { col: usize },
}

/// |V| x |O| matrix of stances in [0, 1]; columns are network opinions.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionMatrix {
    stances: DMatrix<f64>,
}

impl OpinionMatrix {
    pub fn from_matrix(stances: DMatrix<f64>) -> Self {
        Self { stances }
    }

    pub fn stances(&self) -> &DMatrix<f64> {
        &self.stances
    }

    pub fn node_count(&self) -> usize {
        self.stances.nrows()
    }

    pub fn opinion_count(&self) -> usize {
        self.stances.ncols()
    }

    pub fn opinion(&self, index: usize) -> DVector<f64> {
        self.stances.column(index).into_owned()
    }

    pub fn stance_row(&self, node: usize) -> DVector<f64> {
        self.stances.row(node).transpose()
    }

    /// One opinion per community: stance 1 for the node's own community,
    /// 0 elsewhere. Columns have disjoint supports, so they are exactly
    /// pairwise orthogonal.
    pub fn unique_orthogonal(assignment: &CommunityAssignment) -> Self {
        let mut stances = DMatrix::zeros(assignment.node_count(), assignment.community_count());
        for (node, &community) in assignment.membership().iter().enumerate() {
            stances[(node, community)] = 1.0;
        }
        Self { stances }
    }

    /// Two-opinion matrix for a 3-community split: the two extreme
    /// communities get one-hot stances, the neutral community gets the
    /// average of the extremes, [0.5, 0.5].
    pub fn neutral_between(
        assignment: &CommunityAssignment,
        neutral_community: usize,
    ) -> Result<Self, OpinionError> {
        if assignment.community_count() != 3 {
            return Err(OpinionError::WrongCommunityCount {
                expected: 3,
                got: assignment.community_count(),
            });
        }
        let extremes: Vec<usize> = (0..3).filter(|&c| c != neutral_community).collect();
        let mut stances = DMatrix::zeros(assignment.node_count(), 2);
        for (node, &community) in assignment.membership().iter().enumerate() {
            if community == neutral_community {
                stances[(node, 0)] = 0.5;
                stances[(node, 1)] = 0.5;
            } else if community == extremes[0] {
                stances[(node, 0)] = 1.0;
            } else {
                stances[(node, 1)] = 1.0;
            }
        }
        Ok(Self { stances })
    }

    /// Rotate columns `i` and `j` towards each other by `phi` degrees in
    /// the 2-plane they span, keeping magnitudes constant. The angle
    /// between the results is 90 - 2 phi degrees.
    pub fn rotate_pair(&self, i: usize, j: usize, phi: f64) -> Result<Self, OpinionError> {
        if !(0.0..=45.0).contains(&phi) {
            return Err(OpinionError::BadAngle(phi));
        }
        let oi = self.opinion(i);
        let oj = self.opinion(j);
        let (ni, nj) = (oi.norm(), oj.norm());
        if ni == 0.0 {
            return Err(OpinionError::ZeroVector(i));
        }
        if nj == 0.0 {
            return Err(OpinionError::ZeroVector(j));
        }
        if oi.dot(&oj).abs() > 1e-9 * ni * nj {
            return Err(OpinionError::NotOrthogonal(i, j));
        }
        let u = &oi / ni;
        let v = &oj / nj;
        let (sin, cos) = phi.to_radians().sin_cos();
        let new_i = (&u * cos + &v * sin) * ni;
        let new_j = (&u * sin + &v * cos) * nj;
        let mut stances = self.stances.clone();
        stances.set_column(i, &new_i);
        stances.set_column(j, &new_j);
        // clamp rounding noise, error on anything real
        for col in [i, j] {
            for row in 0..stances.nrows() {
                let value = stances[(row, col)];
                if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&value) {
                    return Err(OpinionError::RangeViolation { row, col, value });
                }
                stances[(row, col)] = value.clamp(0.0, 1.0);
            }
        }
        Ok(Self { stances })
    }

    /// One opinion per community; each node's stance on its own opinion is
    /// drawn from Normal(mu, sigma) clipped to [0, 1], all other stances 0.
    /// Deterministic given the seed (ChaCha12 stream, ziggurat normals).
    pub fn sample_consensus(
        assignment: &CommunityAssignment,
        mu: f64,
        sigma: f64,
        rng_seed: u64,
    ) -> Self {
        assert!((0.0..=1.0).contains(&mu), "mu must be in [0, 1]");
        assert!(sigma >= 0.0, "sigma must be nonnegative");
        let mut rng = ChaCha12Rng::seed_from_u64(rng_seed);
        let mut stances = DMatrix::zeros(assignment.node_count(), assignment.community_count());
        if sigma == 0.0 {
            for (node, &community) in assignment.membership().iter().enumerate() {
                stances[(node, community)] = mu;
            }
            return Self { stances };
        }
        let normal = Normal::new(mu, sigma).expect("valid normal parameters");
        for (node, &community) in assignment.membership().iter().enumerate() {
            stances[(node, community)] = normal.sample(&mut rng).clamp(0.0, 1.0);
        }
        Self { stances }
    }

    /// Report any entry outside [0, 1] (beyond 1e-12) and any zero column.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        for col in 0..self.opinion_count() {
            let mut all_zero = true;
            for row in 0..self.node_count() {
                let value = self.stances[(row, col)];
                if value != 0.0 {
                    all_zero = false;
                }
                if !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&value) {
                    report.push(Violation::OutOfRange { row, col, value });
                }
            }
            if all_zero {
                report.push(Violation::ZeroColumn { col });
            }
        }
        report
    }

    /// Opinion CSV: header `node,op0,op1,...`, one row per node.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node");
        for col in 0..self.opinion_count() {
            write!(out, ",op{col}").unwrap();
        }
        out.push('\n');
        for row in 0..self.node_count() {
            write!(out, "{row}").unwrap();
            for col in 0..self.opinion_count() {
                write!(out, ",{}", self.stances[(row, col)]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    pub fn parse_csv(text: &str) -> Result<Self, OpinionError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(OpinionError::Parse {
            line: 1,
            message: "empty opinion file".into(),
        })?;
        let cols = header.split(',').count().saturating_sub(1);
        if cols == 0 {
            return Err(OpinionError::Parse {
                line: 1,
                message: "header must name at least one opinion column".into(),
            });
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != cols + 1 {
                return Err(OpinionError::Parse {
                    line: lineno + 1,
                    message: format!("expected {} fields, got {}", cols + 1, fields.len()),
                });
            }
            let stances = fields[1..]
                .iter()
                .map(|s| {
                    s.parse::<f64>().map_err(|_| OpinionError::Parse {
                        line: lineno + 1,
                        message: format!("bad stance {s:?}"),
                    })
                })
                .collect::<Result<Vec<f64>, _>>()?;
            rows.push(stances);
        }
        let node_count = rows.len();
        let stances = DMatrix::from_fn(node_count, cols, |r, c| rows[r][c]);
        Ok(Self { stances })
    }
}

/// Angle between two opinion columns, in degrees in [0, 180].
pub fn opinion_angle(a: &DVector<f64>, b: &DVector<f64>) -> Result<f64, OpinionError> {
    let (na, nb) = (a.norm(), b.norm());
    if na == 0.0 || nb == 0.0 {
        return Err(OpinionError::ZeroVector(if na == 0.0 { 0 } else { 1 }));
    }
    let cos = (a.dot(b) / (na * nb)).clamp(-1.0, 1.0);
    Ok(cos.acos().to_degrees())
}
