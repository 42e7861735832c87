//! The five multipolar polarization methods: average pairwise distance,
//! average distance to mean, principal component, one-dimensional metric
//! MDS, and total variation.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, LaplacianKernel};
use crate::opinions::OpinionMatrix;
use crate::seed;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("need at least 2 opinions, got {0}")]
    TooFewOpinions(usize),
    #[error("opinion matrix has {got} rows but the graph has {expected} nodes")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("covariance of stance rows is zero (all rows identical)")]
    DegenerateCovariance,
    #[error("no samples")]
    EmptySamples,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

fn check_rows(kernel: &LaplacianKernel, opinions: &OpinionMatrix) -> Result<(), MetricError> {
    if opinions.node_count() != kernel.node_count() {
        return Err(MetricError::DimensionMismatch {
            expected: kernel.node_count(),
            got: opinions.node_count(),
        });
    }
    Ok(())
}

/// Average pairwise GED over all unordered opinion column pairs.
pub fn apd(kernel: &LaplacianKernel, opinions: &OpinionMatrix) -> Result<f64, MetricError> {
    check_rows(kernel, opinions)?;
    let m = opinions.opinion_count();
    if m < 2 {
        return Err(MetricError::TooFewOpinions(m));
    }
    let mut total = 0.0;
    for i in 0..m {
        let oi = opinions.opinion(i);
        for j in (i + 1)..m {
            total += kernel.ged(&oi, &opinions.opinion(j))?;
        }
    }
    Ok(total / (m * (m - 1) / 2) as f64)
}

/// Average GED from each opinion column to the arithmetic mean of columns.
pub fn adm(kernel: &LaplacianKernel, opinions: &OpinionMatrix) -> Result<f64, MetricError> {
    check_rows(kernel, opinions)?;
    let m = opinions.opinion_count();
    let n = opinions.node_count();
    let mut mean = DVector::zeros(n);
    for i in 0..m {
        mean += opinions.opinion(i);
    }
    mean /= m as f64;
    let mut total = 0.0;
    for i in 0..m {
        total += kernel.ged(&opinions.opinion(i), &mean)?;
    }
    Ok(total / m as f64)
}

/// Unit-norm first principal component of the mean-centered stance rows.
/// Sign fixed so the largest-magnitude entry is nonnegative.
pub fn first_principal_component(opinions: &OpinionMatrix) -> Result<DVector<f64>, MetricError> {
    let n = opinions.node_count();
    if n < 2 {
        return Err(MetricError::TooFewNodes(n));
    }
    let m = opinions.opinion_count();
    let x = opinions.stances();
    let col_means = DVector::from_fn(m, |c, _| x.column(c).sum() / n as f64);
    let centered = DMatrix::from_fn(n, m, |r, c| x[(r, c)] - col_means[c]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let eig = cov.symmetric_eigen();
    let (best, best_val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &l)| if l > acc.1 { (i, l) } else { acc });
    if best_val <= 1e-24 {
        return Err(MetricError::DegenerateCovariance);
    }
    let mut w = eig.eigenvectors.column(best).into_owned();
    w /= w.norm();
    let dominant = w.iter().enumerate().fold((0, 0.0_f64), |acc, (i, &v)| {
        if v.abs() > acc.1 { (i, v.abs()) } else { acc }
    });
    if w[dominant.0] < 0.0 {
        w = -w;
    }
    Ok(w)
}

/// GED between the zero vector and the stance rows projected (uncentered)
/// onto the first principal component. A degenerate covariance means every
/// node holds the same stance vector, so the projection is constant and
/// the polarization is zero on a connected graph.
pub fn pc(kernel: &LaplacianKernel, opinions: &OpinionMatrix) -> Result<f64, MetricError> {
    check_rows(kernel, opinions)?;
    let direction = match first_principal_component(opinions) {
        Ok(w) => w,
        Err(MetricError::DegenerateCovariance) => {
            let mut e0 = DVector::zeros(opinions.opinion_count());
            e0[0] = 1.0;
            e0
        }
        Err(e) => return Err(e),
    };
    let projected = opinions.stances() * direction;
    Ok(kernel.quadratic_form(&projected)?.sqrt())
}

/// Sum of per-opinion sample variances (denominator |V| - 1). Graph-free.
pub fn tv(opinions: &OpinionMatrix) -> Result<f64, MetricError> {
    let n = opinions.node_count();
    if n < 2 {
        return Err(MetricError::TooFewNodes(n));
    }
    let mut total = 0.0;
    for c in 0..opinions.opinion_count() {
        let col = opinions.opinion(c);
        let mean = col.sum() / n as f64;
        total += col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    }
    Ok(total)
}

/// Settings for the stress-majorization MDS.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MdsConfig {
    /// Number of random restarts aggregated by [`mds_polarization`].
    pub n_init: usize,
    pub max_iter: usize,
    /// Stop when the relative stress improvement drops below this.
    pub rel_tol: f64,
    pub rng_seed: u64,
}

impl Default for MdsConfig {
    fn default() -> Self {
        Self { n_init: 100, max_iter: 300, rel_tol: 1e-4, rng_seed: 0 }
    }
}

/// Metric value with replication mean and 95-percentile interval bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolarizationEstimate {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: Vec<f64>,
}

impl PolarizationEstimate {
    pub fn from_samples(samples: Vec<f64>) -> Result<Self, MetricError> {
        if samples.is_empty() {
            return Err(MetricError::EmptySamples);
        }
        let mean = samples.iter().sum::<f64>() / samples.len() as f64;
        let (ci_low, ci_high) = percentile_ci(&samples)?;
        Ok(Self { mean, ci_low, ci_high, samples })
    }
}

/// 2.5th and 97.5th percentiles with linear interpolation between order
/// statistics.
pub fn percentile_ci(samples: &[f64]) -> Result<(f64, f64), MetricError> {
    if samples.is_empty() {
        return Err(MetricError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Ok((percentile(&sorted, 2.5), percentile(&sorted, 97.5)))
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Pairwise Euclidean distances between stance rows, the dissimilarities
/// the embedding tries to reproduce.
pub fn stance_dissimilarities(opinions: &OpinionMatrix) -> DMatrix<f64> {
    let n = opinions.node_count();
    let mut d = DMatrix::zeros(n, n);
    for i in 0..n {
        let ri = opinions.stance_row(i);
        for j in (i + 1)..n {
            let dist = (&ri - opinions.stance_row(j)).norm();
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    d
}

fn embedding_stress(x: &DVector<f64>, dissim: &DMatrix<f64>) -> f64 {
    let n = x.len();
    let mut stress = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = (x[i] - x[j]).abs();
            stress += (d - dissim[(i, j)]).powi(2);
        }
    }
    stress
}

/// One Guttman transform step of SMACOF in one dimension.
fn guttman_step(x: &DVector<f64>, dissim: &DMatrix<f64>) -> DVector<f64> {
    let n = x.len();
    let mut next = DVector::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        let mut diag = 0.0;
        for j in 0..n {
            if i == j {
                continue;
            }
            let d = (x[i] - x[j]).abs();
            if d > 1e-15 {
                let b = dissim[(i, j)] / d;
                acc -= b * x[j];
                diag += b;
            }
        }
        next[i] = (diag * x[i] + acc) / n as f64;
    }
    next
}

/// One-dimensional metric MDS of the node stance vectors via stress
/// majorization. Initialized uniformly in [0, 1) from a seed derived from
/// (rng_seed, init_index). Returns the best iterate and its stress; stress
/// never increases across iterations.
pub fn mds_embed(
    opinions: &OpinionMatrix,
    config: &MdsConfig,
    init_index: usize,
) -> Result<(DVector<f64>, f64), MetricError> {
    let dissim = stance_dissimilarities(opinions);
    mds_embed_dissim(&dissim, config, init_index)
}

/// As [`mds_embed`] but on a precomputed dissimilarity matrix.
pub fn mds_embed_dissim(
    dissim: &DMatrix<f64>,
    config: &MdsConfig,
    init_index: usize,
) -> Result<(DVector<f64>, f64), MetricError> {
    let n = dissim.nrows();
    if n < 2 {
        return Err(MetricError::TooFewNodes(n));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed::mix(config.rng_seed, init_index as u64));
    let mut x = DVector::from_fn(n, |_, _| rng.gen::<f64>());
    let mut stress = embedding_stress(&x, dissim);
    for _ in 0..config.max_iter {
        let next = guttman_step(&x, dissim);
        let next_stress = embedding_stress(&next, dissim);
        if next_stress <= stress {
            x = next;
            let improvement = stress - next_stress;
            let converged = stress <= 0.0 || improvement < config.rel_tol * stress;
            stress = next_stress;
            if converged {
                break;
            }
        } else {
            break;
        }
    }
    Ok((x, stress))
}

/// Polarization per restart is sqrt(x^T L^+ x) of the embedding; the
/// estimate aggregates all `n_init` restarts. Restarts run in parallel but
/// each derives its own seed, so the result is independent of scheduling.
pub fn mds_polarization(
    kernel: &LaplacianKernel,
    opinions: &OpinionMatrix,
    config: &MdsConfig,
) -> Result<PolarizationEstimate, MetricError> {
    check_rows(kernel, opinions)?;
    let dissim = stance_dissimilarities(opinions);
    let samples = (0..config.n_init)
        .into_par_iter()
        .map(|i| {
            let (x, _) = mds_embed_dissim(&dissim, config, i)?;
            Ok(kernel.quadratic_form(&x)?.sqrt())
        })
        .collect::<Result<Vec<f64>, MetricError>>()?;
    PolarizationEstimate::from_samples(samples)
}
