//! The four synthetic scenarios at local and large scale, replication
//! with confidence intervals, trend classification, and the conformity
//! table.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generators::{self, GeneratorError, SbmParams};
use crate::graph::{Graph, GraphError, LaplacianKernel};
use crate::metrics::{self, MdsConfig, MetricError, PolarizationEstimate};
use crate::opinions::{CommunityAssignment, OpinionError, OpinionMatrix};
use crate::seed::{mix, stream};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
    #[error("need at least 3 sweep points to classify a trend, got {0}")]
    TooFewPoints(usize),
    #[error("missing scenario output: {0}")]
    MissingScenario(String),
    #[error("table has no rows for method {0}")]
    MissingMethod(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Opinion(#[from] OpinionError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    UniqueOpinions,
    NeutralOrthogonal,
    Correlation,
    Consensus,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::UniqueOpinions => "unique_opinions",
            Scenario::NeutralOrthogonal => "neutral_orthogonal",
            Scenario::Correlation => "correlation",
            Scenario::Consensus => "consensus",
        }
    }

    pub const ALL: [Scenario; 4] = [
        Scenario::UniqueOpinions,
        Scenario::NeutralOrthogonal,
        Scenario::Correlation,
        Scenario::Consensus,
    ];

    fn tag(&self) -> u64 {
        match self {
            Scenario::UniqueOpinions => 1,
            Scenario::NeutralOrthogonal => 2,
            Scenario::Correlation => 3,
            Scenario::Consensus => 4,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "unique_opinions" | "unique" => Ok(Scenario::UniqueOpinions),
            "neutral_orthogonal" | "neutral" => Ok(Scenario::NeutralOrthogonal),
            "correlation" => Ok(Scenario::Correlation),
            "consensus" => Ok(Scenario::Consensus),
            other => Err(format!("unknown scenario {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Local,
    Large,
}

impl std::str::FromStr for Scale {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "local" => Ok(Scale::Local),
            "large" => Ok(Scale::Large),
            other => Err(format!("unknown scale {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Chain,
    Complete,
    Community,
}

impl NetworkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            NetworkKind::Chain => "chain",
            NetworkKind::Complete => "complete",
            NetworkKind::Community => "community",
        }
    }

    pub const ALL: [NetworkKind; 3] =
        [NetworkKind::Chain, NetworkKind::Complete, NetworkKind::Community];
}

impl std::str::FromStr for NetworkKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "chain" => Ok(NetworkKind::Chain),
            "complete" => Ok(NetworkKind::Complete),
            "community" => Ok(NetworkKind::Community),
            other => Err(format!("unknown network kind {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Apd,
    Adm,
    Pc,
    Mds,
    Tv,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Apd, Method::Adm, Method::Pc, Method::Mds, Method::Tv];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Apd => "APD",
            Method::Adm => "ADM",
            Method::Pc => "PC",
            Method::Mds => "MDS",
            Method::Tv => "TV",
        }
    }
}

/// The non-MDS methods evaluated together on one instance.
const POINT_METHODS: [Method; 4] = [Method::Apd, Method::Adm, Method::Pc, Method::Tv];

/// Full description of one scenario run. A config (including the master
/// seed) fixes every number in the resulting table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub scale: Scale,
    /// Which deterministic network family to use; local scale only.
    pub network_kind: Option<NetworkKind>,
    /// Scenario x-values: node counts, community counts, angles or sigmas.
    pub sweep: Vec<f64>,
    /// Fresh network/stance draws per sweep point wherever randomness exists.
    pub replications: usize,
    /// Nodes per community at large scale.
    pub community_size: usize,
    /// Node count for local runs whose sweep is not over |V|.
    pub local_nodes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub mds: MdsConfig,
    /// Samples for MDS at large scale; each draws its own fresh network.
    pub mds_large_samples: usize,
    pub master_seed: u64,
}

impl ScenarioConfig {
    /// Paper-scale defaults: 100-node communities, 10 replications (100
    /// for the neutral scenario, 500 of its MDS samples), p_in = 0.1,
    /// p_out = 0.01, 100 MDS restarts.
    pub fn paper(
        scenario: Scenario,
        scale: Scale,
        network_kind: Option<NetworkKind>,
        master_seed: u64,
    ) -> Self {
        let sweep = match (scenario, scale) {
            (Scenario::UniqueOpinions, Scale::Local) => vec![6.0, 8.0, 10.0, 12.0],
            (Scenario::UniqueOpinions, Scale::Large) => vec![2.0, 3.0, 4.0, 5.0, 6.0],
            (Scenario::NeutralOrthogonal, Scale::Local) => vec![9.0, 12.0, 15.0, 18.0],
            (Scenario::NeutralOrthogonal, Scale::Large) => vec![0.0],
            (Scenario::Correlation, _) => (0..=9).map(|i| 90.0 - 10.0 * i as f64).collect(),
            (Scenario::Consensus, _) => vec![0.2, 0.15, 0.1, 0.05, 0.01],
        };
        let replications = match (scenario, scale) {
            (Scenario::NeutralOrthogonal, Scale::Large) => 100,
            (_, Scale::Large) => 10,
            (Scenario::Consensus, Scale::Local) => 10,
            (_, Scale::Local) => 1,
        };
        let mds = MdsConfig::default();
        let mds_large_samples = match (scenario, scale) {
            (Scenario::NeutralOrthogonal, Scale::Large) => 500,
            _ => mds.n_init,
        };
        Self {
            scenario,
            scale,
            network_kind,
            sweep,
            replications,
            community_size: 100,
            local_nodes: 12,
            p_in: 0.1,
            p_out: 0.01,
            mds,
            mds_large_samples,
            master_seed,
        }
    }

    /// Reduced-scale overrides for fast runs: 30-node communities, 5
    /// replications, 20 MDS restarts/samples. Edge probabilities are
    /// rescaled so expected node degrees match the paper-scale networks;
    /// at p_in = 0.1 a 30-node community is too sparse to stay connected.
    pub fn desk(mut self) -> Self {
        self.community_size = 30;
        self.p_in = 0.34;
        self.p_out = 0.034;
        if self.replications > 1 {
            self.replications = 5;
        }
        self.mds.n_init = 20;
        self.mds_large_samples = 20;
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.sweep.is_empty() {
            return Err(ExperimentError::ConfigMismatch("empty sweep".into()));
        }
        let increasing = self.sweep.windows(2).all(|w| w[1] > w[0]);
        let decreasing = self.sweep.windows(2).all(|w| w[1] < w[0]);
        if self.sweep.len() > 1 && !increasing && !decreasing {
            return Err(ExperimentError::ConfigMismatch("sweep must be strictly monotone".into()));
        }
        match self.scale {
            Scale::Local if self.network_kind.is_none() => {
                return Err(ExperimentError::ConfigMismatch(
                    "local scale requires a network kind".into(),
                ))
            }
            Scale::Large if self.network_kind.is_some() => {
                return Err(ExperimentError::ConfigMismatch(
                    "large scale does not take a network kind".into(),
                ))
            }
            _ => {}
        }
        if self.replications < 1 || self.mds.n_init < 1 || self.mds_large_samples < 1 {
            return Err(ExperimentError::ConfigMismatch("counts must be positive".into()));
        }
        Ok(())
    }

    fn mds_for(&self, rng_seed: u64) -> MdsConfig {
        MdsConfig { rng_seed, ..self.mds.clone() }
    }

    fn sbm_params(&self, communities: usize, rng_seed: u64) -> SbmParams {
        SbmParams {
            community_count: communities,
            community_size: self.community_size,
            p_in: self.p_in,
            p_out: self.p_out,
            rng_seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableRow {
    pub x: f64,
    pub method: String,
    pub estimate: PolarizationEstimate,
}

/// Flattened row as written to / read back from the table CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRecord {
    pub x: f64,
    pub method: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub config: ScenarioConfig,
    pub rows: Vec<TableRow>,
}

/// Format with 12 significant digits so reruns can be text-diffed.
pub fn fmt_sig(v: f64) -> String {
    format!("{v:.11e}")
}

impl ExperimentTable {
    pub fn records(&self) -> Vec<TableRecord> {
        self.rows
            .iter()
            .map(|r| TableRecord {
                x: r.x,
                method: r.method.clone(),
                mean: r.estimate.mean,
                ci_low: r.estimate.ci_low,
                ci_high: r.estimate.ci_high,
                n_samples: r.estimate.samples.len(),
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,method,mean,ci_low,ci_high,n_samples\n");
        for r in self.records() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.x,
                r.method,
                fmt_sig(r.mean),
                fmt_sig(r.ci_low),
                fmt_sig(r.ci_high),
                r.n_samples
            )
            .unwrap();
        }
        out
    }
}

/// Parse a table CSV back into records (used by the report command).
pub fn parse_table_csv(text: &str) -> Result<Vec<TableRecord>, ExperimentError> {
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("x,")) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(ExperimentError::Parse {
                line: lineno + 1,
                message: format!("expected 6 fields, got {}", fields.len()),
            });
        }
        let num = |s: &str| {
            s.parse::<f64>().map_err(|_| ExperimentError::Parse {
                line: lineno + 1,
                message: format!("bad number {s:?}"),
            })
        };
        records.push(TableRecord {
            x: num(fields[0])?,
            method: fields[1].to_string(),
            mean: num(fields[2])?,
            ci_low: num(fields[3])?,
            ci_high: num(fields[4])?,
            n_samples: num(fields[5])? as usize,
        });
    }
    Ok(records)
}

// seed stream purposes
const P_REP: u64 = 10;
const P_MDS_NET: u64 = 11;
const P_MDS_INIT: u64 = 12;
const P_STANCE: u64 = 13;
const P_MDS_INIT_ALT: u64 = 14;

/// Run `eval` on seeds derived as mix(master_seed, index) and aggregate
/// mean and 95-percentile interval. Order-independent by construction.
pub fn replicate<F>(
    eval: F,
    replications: usize,
    master_seed: u64,
) -> Result<PolarizationEstimate, ExperimentError>
where
    F: Fn(u64) -> Result<f64, ExperimentError> + Sync,
{
    let samples = (0..replications)
        .into_par_iter()
        .map(|i| eval(mix(master_seed, i as u64)))
        .collect::<Result<Vec<f64>, ExperimentError>>()?;
    Ok(PolarizationEstimate::from_samples(samples)?)
}

fn local_network(
    kind: NetworkKind,
    communities: usize,
    total: usize,
) -> Result<(Graph, CommunityAssignment), ExperimentError> {
    match kind {
        NetworkKind::Chain => {
            Ok((generators::chain(total), CommunityAssignment::contiguous_blocks(communities, total)))
        }
        NetworkKind::Complete => Ok((
            generators::complete(total),
            CommunityAssignment::contiguous_blocks(communities, total),
        )),
        NetworkKind::Community => Ok(generators::community_network(communities, total)?),
    }
}

/// APD, ADM, PC and TV on one instance, in [`POINT_METHODS`] order.
fn point_values(
    kernel: &LaplacianKernel,
    opinions: &OpinionMatrix,
) -> Result<[f64; 4], ExperimentError> {
    Ok([
        metrics::apd(kernel, opinions)?,
        metrics::adm(kernel, opinions)?,
        metrics::pc(kernel, opinions)?,
        metrics::tv(opinions)?,
    ])
}

fn estimate_rows(
    x: f64,
    point: [Vec<f64>; 4],
    mds: Vec<f64>,
    suffix: &str,
) -> Result<Vec<TableRow>, ExperimentError> {
    let mut rows = Vec::new();
    for (method, samples) in POINT_METHODS.iter().zip(point.into_iter()) {
        rows.push(TableRow {
            x,
            method: format!("{}{}", method.as_str(), suffix),
            estimate: PolarizationEstimate::from_samples(samples)?,
        });
    }
    // keep the APD, ADM, PC, MDS, TV column order of the paper's figures
    let tv = rows.pop().expect("tv row");
    rows.push(TableRow {
        x,
        method: format!("MDS{suffix}"),
        estimate: PolarizationEstimate::from_samples(mds)?,
    });
    rows.push(tv);
    Ok(rows)
}

/// Run one scenario at one scale and return the full estimate grid.
pub fn run_scenario(config: &ScenarioConfig) -> Result<ExperimentTable, ExperimentError> {
    config.validate()?;
    let rows = match (config.scenario, config.scale) {
        (Scenario::UniqueOpinions, Scale::Local) => unique_local(config)?,
        (Scenario::UniqueOpinions, Scale::Large) => unique_large(config)?,
        (Scenario::NeutralOrthogonal, Scale::Local) => neutral_local(config)?,
        (Scenario::NeutralOrthogonal, Scale::Large) => neutral_large(config)?,
        (Scenario::Correlation, Scale::Local) => correlation_local(config)?,
        (Scenario::Correlation, Scale::Large) => correlation_large(config)?,
        (Scenario::Consensus, Scale::Local) => consensus_local(config)?,
        (Scenario::Consensus, Scale::Large) => consensus_large(config)?,
    };
    Ok(ExperimentTable { config: config.clone(), rows })
}

fn kind_of(config: &ScenarioConfig) -> NetworkKind {
    config.network_kind.expect("validated local config")
}

fn sweep_usize(config: &ScenarioConfig) -> Vec<usize> {
    config.sweep.iter().map(|&x| x as usize).collect()
}

fn unique_local(config: &ScenarioConfig) -> Result<Vec<TableRow>, ExperimentError> {
    let kind = kind_of(config);
    let tag = config.scenario.tag();
    let mut rows = Vec::new();
    for (xi, &n) in sweep_usize(config).iter().enumerate() {
        let (graph, _) = local_network(kind, 2, n)?;
        let kernel = LaplacianKernel::new(&graph)?;
        // one unique orthogonal opinion per node
        let per_node = CommunityAssignment::contiguous_blocks(n, n);
        let opinions = OpinionMatrix::unique_orthogonal(&per_node);
        let values = point_values(&kernel, &opinions)?;
        let mds_cfg = config.mds_for(stream(config.master_seed, &[tag, P_MDS_INIT, xi as u64]));
        let mds = metrics::mds_polarization(&kernel, &opinions, &mds_cfg)?;
        rows.extend(estimate_rows(
            n as f64,
            values.map(|v| vec![v]),
            mds.samples,
            "",
        )?);
    }
    Ok(rows)
}

fn unique_large(config: &ScenarioConfig) -> Result<Vec<TableRow>, ExperimentError> {
    let sizes = sweep_usize(config);
    let n_max = *sizes.iter().max().expect("nonempty sweep");
    let n_min = *sizes.iter().min().expect("nonempty sweep");
    let tag = config.scenario.tag();

    // nested removal chain: one n_max network per replication, communities
    // stripped from the end so smaller n are induced subgraphs; resampled
    // until every stage of the chain is connected
    const CHAIN_ATTEMPTS: u64 = 100;
    let per_rep: Vec<Vec<(usize, [f64; 4])>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            'attempt: for attempt in 0..CHAIN_ATTEMPTS {
                let params = config.sbm_params(
                    n_max,
                    stream(config.master_seed, &[tag, P_REP, r as u64, attempt]),
                );
                let (mut graph, mut assignment) = generators::sbm(&params)?;
                let mut out = Vec::new();
                let mut n = n_max;
                loop {
                    if !graph.is_connected() {
                        continue 'attempt;
                    }
                    if sizes.contains(&n) {
                        let kernel = LaplacianKernel::new(&graph)?;
                        let opinions = OpinionMatrix::unique_orthogonal(&assignment);
                        out.push((n, point_values(&kernel, &opinions)?));
                    }
                    if n == n_min {
                        break;
                    }
                    let last = assignment.community_count() - 1;
                    let (g, a) = generators::remove_community(&graph, &assignment, last)?;
                    graph = g;
                    assignment = a;
                    n -= 1;
                }
                return Ok(out);
            }
            Err(GeneratorError::ConnectivityFailure(CHAIN_ATTEMPTS as usize).into())
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut rows = Vec::new();
    for (xi, &n) in sizes.iter().enumerate() {
        let mut point: [Vec<f64>; 4] = Default::default();
        for rep in &per_rep {
            let (_, values) = rep.iter().find(|(k, _)| *k == n).expect("complete grid");
            for (bucket, &v) in point.iter_mut().zip(values.iter()) {
                bucket.push(v);
            }
        }
        let init_seed = stream(config.master_seed, &[tag, P_MDS_INIT, xi as u64]);
        let mds = (0..config.mds_large_samples)
            .into_par_iter()
            .map(|s| {
                let params = config.sbm_params(
                    n,
                    stream(config.master_seed, &[tag, P_MDS_NET, xi as u64, s as u64]),
                );
                let (graph, assignment) = generators::sbm(&params)?;
                let kernel = LaplacianKernel::new(&graph)?;
                let opinions = OpinionMatrix::unique_orthogonal(&assignment);
                let (x, _) = metrics::mds_embed(&opinions, &config.mds_for(init_seed), s)?;
                Ok(kernel.quadratic_form(&x)?.sqrt())
            })
            .collect::<Result<Vec<f64>, ExperimentError>>()?;
        rows.extend(estimate_rows(n as f64, point, mds, "")?);
    }
    Ok(rows)
}

const NEUTRAL_COMMUNITY: usize = 1;

fn neutral_local(config: &ScenarioConfig) -> Result<Vec<TableRow>, ExperimentError> {
    let kind = kind_of(config);
    let tag = config.scenario.tag();
    let mut rows = Vec::new();
    for (xi, &n) in sweep_usize(config).iter().enumerate() {
        let (graph, assignment) = local_network(kind, 3, n)?;
        let kernel = LaplacianKernel::new(&graph)?;
        let neutral = OpinionMatrix::neutral_between(&assignment, NEUTRAL_COMMUNITY)?;
        let orthogonal = OpinionMatrix::unique_orthogonal(&assignment);
        let before = point_values(&kernel, &neutral)?;
        let after = point_values(&kernel, &orthogonal)?;
        let deltas: [f64; 4] = std::array::from_fn(|i| after[i] - before[i]);

        let cfg_n = config.mds_for(stream(config.master_seed, &[tag, P_MDS_INIT, xi as u64]));
        let cfg_o = config.mds_for(stream(config.master_seed, &[tag, P_MDS_INIT_ALT, xi as u64]));
        let mds_n = metrics::mds_polarization(&kernel, &neutral, &cfg_n)?;
        let mds_o = metrics::mds_polarization(&kernel, &orthogonal, &cfg_o)?;
        let mds_delta: Vec<f64> = mds_o
            .samples
            .iter()
            .zip(mds_n.samples.iter())
            .map(|(o, n)| o - n)
            .collect();

        rows.extend(estimate_rows(n as f64, deltas.map(|v| vec![v]), mds_delta, "")?);
        rows.extend(estimate_rows(
            n as f64,
            before.map(|v| vec![v]),
            mds_n.samples,
            "_baseline",
        )?);
    }
    Ok(rows)
}

fn neutral_large(config: &ScenarioConfig) -> Result<Vec<TableRow>, ExperimentError> {
    let tag = config.scenario.tag();
    let x = config.sweep[0];

    struct RepOutcome {
        deltas: [f64; 4],
        baselines: [f64; 4],
    }
    let reps: Vec<RepOutcome> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let params =
                config.sbm_params(3, stream(config.master_seed, &[tag, P_REP, r as u64]));
            let (graph, assignment) = generators::sbm(&params)?;
            let kernel = LaplacianKernel::new(&graph)?;
            let neutral = OpinionMatrix::neutral_between(&assignment, NEUTRAL_COMMUNITY)?;
            let orthogonal = OpinionMatrix::unique_orthogonal(&assignment);
            let before = point_values(&kernel, &neutral)?;
            let after = point_values(&kernel, &orthogonal)?;
            Ok(RepOutcome {
                deltas: std::array::from_fn(|i| after[i] - before[i]),
                baselines: before,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut point_delta: [Vec<f64>; 4] = Default::default();
    let mut point_base: [Vec<f64>; 4] = Default::default();
    for rep in &reps {
        for i in 0..4 {
            point_delta[i].push(rep.deltas[i]);
            point_base[i].push(rep.baselines[i]);
        }
    }

    let init_n = stream(config.master_seed, &[tag, P_MDS_INIT]);
    let init_o = stream(config.master_seed, &[tag, P_MDS_INIT_ALT]);
    let mds: Vec<(f64, f64)> = (0..config.mds_large_samples)
        .into_par_iter()
        .map(|s| {
            let params =
                config.sbm_params(3, stream(config.master_seed, &[tag, P_MDS_NET, s as u64]));
            let (graph, assignment) = generators::sbm(&params)?;
            let kernel = LaplacianKernel::new(&graph)?;
            let neutral = OpinionMatrix::neutral_between(&assignment, NEUTRAL_COMMUNITY)?;
            let orthogonal = OpinionMatrix::unique_orthogonal(&assignment);
            let (xn, _) = metrics::mds_embed(&neutral, &config.mds_for(init_n), s)?;
            let (xo, _) = metrics::mds_embed(&orthogonal, &config.mds_for(init_o), s)?;
            let vn = kernel.quadratic_form(&xn)?.sqrt();
            let vo = kernel.quadratic_form(&xo)?.sqrt();
            Ok((vo - vn, vn))
        })
        .collect::<Result<_, ExperimentError>>()?;
    let (mds_delta, mds_base): (Vec<f64>, Vec<f64>) = mds.into_iter().unzip();

    let mut rows = estimate_rows(x, point_delta, mds_delta, "")?;
    rows.extend(estimate_rows(x, point_base, mds_base, "_baseline")?);
    Ok(rows)
}

/// The two opinions the correlation scenario pulls together.
const ROTATED_PAIR: (usize, usize) = (0, 1);

fn rotated_opinions(
    assignment: &CommunityAssignment,
    theta: f64,
) -> Result<OpinionMatrix, ExperimentError> {
    let phi = (90.0 - theta) / 2.0;
    let base = OpinionMatrix::unique_orthogonal(assignment);
    Ok(base.rotate_pair(ROTATED_PAIR.0, ROTATED_PAIR.1, phi)?)
}

fn correlation_local(config: &ScenarioConfig) -> Result<Vec<TableRow>, ExperimentError> {
    let kind = kind_of(config);
    let tag = config.scenario.tag();
    let (graph, assignment) = local_network(kind, 3, config.local_nodes)?;
    let kernel = LaplacianKernel::new(&graph)?;
    let mut rows = Vec::new();
    for (xi, &theta) in config.sweep.iter().enumerate() {
        let opinions = rotated_opinions(&assignment, theta)?;
        let values = point_values(&kernel, &opinions)?;
        let mds_cfg = config.mds_for(stream(config.master_seed, &[tag, P_MDS_INIT, xi as u64]));
        let mds = metrics::mds_polarization(&kernel, &opinions, &mds_cfg)?;
        rows.extend(estimate_rows(theta, values.map(|v| vec![v]), mds.samples, "")?);
    }
    Ok(rows)
}

fn correlation_large(config: &ScenarioConfig) -> Result<Vec<TableRow>, ExperimentError> {
    let tag = config.scenario.tag();
    // the same replicated networks are reused across the sweep so the
    // trend is not drowned by network resampling noise
    let per_rep: Vec<Vec<[f64; 4]>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let params =
                config.sbm_params(3, stream(config.master_seed, &[tag, P_REP, r as u64]));
            let (graph, assignment) = generators::sbm(&params)?;
            let kernel = LaplacianKernel::new(&graph)?;
            config
                .sweep
                .iter()
                .map(|&theta| point_values(&kernel, &rotated_opinions(&assignment, theta)?))
                .collect()
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut rows = Vec::new();
    for (xi, &theta) in config.sweep.iter().enumerate() {
        let mut point: [Vec<f64>; 4] = Default::default();
        for rep in &per_rep {
            for (bucket, &v) in point.iter_mut().zip(rep[xi].iter()) {
                bucket.push(v);
            }
        }
        let init_seed = stream(config.master_seed, &[tag, P_MDS_INIT, xi as u64]);
        let mds = (0..config.mds_large_samples)
            .into_par_iter()
            .map(|s| {
                let params = config.sbm_params(
                    3,
                    stream(config.master_seed, &[tag, P_MDS_NET, xi as u64, s as u64]),
                );
                let (graph, assignment) = generators::sbm(&params)?;
                let kernel = LaplacianKernel::new(&graph)?;
                let opinions = rotated_opinions(&assignment, theta)?;
                let (x, _) = metrics::mds_embed(&opinions, &config.mds_for(init_seed), s)?;
                Ok(kernel.quadratic_form(&x)?.sqrt())
            })
            .collect::<Result<Vec<f64>, ExperimentError>>()?;
        rows.extend(estimate_rows(theta, point, mds, "")?);
    }
    Ok(rows)
}

const CONSENSUS_MU: f64 = 0.5;

fn consensus_local(config: &ScenarioConfig) -> Result<Vec<TableRow>, ExperimentError> {
    let kind = kind_of(config);
    let tag = config.scenario.tag();
    let (graph, assignment) = local_network(kind, 3, config.local_nodes)?;
    let kernel = LaplacianKernel::new(&graph)?;
    let mut rows = Vec::new();
    for (xi, &sigma) in config.sweep.iter().enumerate() {
        let per_rep: Vec<([f64; 4], Vec<f64>)> = (0..config.replications)
            .into_par_iter()
            .map(|r| {
                let stance_seed =
                    stream(config.master_seed, &[tag, P_STANCE, xi as u64, r as u64]);
                let opinions =
                    OpinionMatrix::sample_consensus(&assignment, CONSENSUS_MU, sigma, stance_seed);
                let values = point_values(&kernel, &opinions)?;
                let mds_cfg = config.mds_for(stream(
                    config.master_seed,
                    &[tag, P_MDS_INIT, xi as u64, r as u64],
                ));
                let mds = metrics::mds_polarization(&kernel, &opinions, &mds_cfg)?;
                Ok((values, mds.samples))
            })
            .collect::<Result<_, ExperimentError>>()?;

        let mut point: [Vec<f64>; 4] = Default::default();
        let mut mds_samples = Vec::new();
        for (values, mds) in per_rep {
            for (bucket, &v) in point.iter_mut().zip(values.iter()) {
                bucket.push(v);
            }
            mds_samples.extend(mds);
        }
        rows.extend(estimate_rows(sigma, point, mds_samples, "")?);
    }
    Ok(rows)
}

fn consensus_large(config: &ScenarioConfig) -> Result<Vec<TableRow>, ExperimentError> {
    let tag = config.scenario.tag();
    let per_rep: Vec<Vec<[f64; 4]>> = (0..config.replications)
        .into_par_iter()
        .map(|r| {
            let params =
                config.sbm_params(3, stream(config.master_seed, &[tag, P_REP, r as u64]));
            let (graph, assignment) = generators::sbm(&params)?;
            let kernel = LaplacianKernel::new(&graph)?;
            config
                .sweep
                .iter()
                .enumerate()
                .map(|(xi, &sigma)| {
                    let stance_seed =
                        stream(config.master_seed, &[tag, P_STANCE, xi as u64, r as u64]);
                    let opinions = OpinionMatrix::sample_consensus(
                        &assignment,
                        CONSENSUS_MU,
                        sigma,
                        stance_seed,
                    );
                    point_values(&kernel, &opinions)
                })
                .collect()
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut rows = Vec::new();
    for (xi, &sigma) in config.sweep.iter().enumerate() {
        let mut point: [Vec<f64>; 4] = Default::default();
        for rep in &per_rep {
            for (bucket, &v) in point.iter_mut().zip(rep[xi].iter()) {
                bucket.push(v);
            }
        }
        let init_seed = stream(config.master_seed, &[tag, P_MDS_INIT, xi as u64]);
        let mds = (0..config.mds_large_samples)
            .into_par_iter()
            .map(|s| {
                let params = config.sbm_params(
                    3,
                    stream(config.master_seed, &[tag, P_MDS_NET, xi as u64, s as u64]),
                );
                let (graph, assignment) = generators::sbm(&params)?;
                let kernel = LaplacianKernel::new(&graph)?;
                let stance_seed = stream(
                    config.master_seed,
                    &[tag, P_STANCE, P_MDS_NET, xi as u64, s as u64],
                );
                let opinions =
                    OpinionMatrix::sample_consensus(&assignment, CONSENSUS_MU, sigma, stance_seed);
                let (x, _) = metrics::mds_embed(&opinions, &config.mds_for(init_seed), s)?;
                Ok(kernel.quadratic_form(&x)?.sqrt())
            })
            .collect::<Result<Vec<f64>, ExperimentError>>()?;
        rows.extend(estimate_rows(sigma, point, mds, "")?);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// trend classification and the conformity table
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Increasing,
    Decreasing,
    Constant,
}

impl Trend {
    pub fn as_str(&self) -> &'static str {
        match self {
            Trend::Increasing => "increasing",
            Trend::Decreasing => "decreasing",
            Trend::Constant => "constant",
        }
    }
}

/// Numeric stand-ins for the paper's visual trend judgements. Defaults:
/// Spearman 0.8, 2% relative range, 5% delta tolerance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendThresholds {
    pub spearman: f64,
    pub rel_range: f64,
    pub delta_frac: f64,
}

impl Default for TrendThresholds {
    fn default() -> Self {
        Self { spearman: 0.8, rel_range: 0.02, delta_frac: 0.05 }
    }
}

fn rank_with_ties(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation of a series against its sweep position.
fn spearman_vs_position(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let ranks = rank_with_ties(values);
    let pos_mean = (n - 1.0) / 2.0;
    let rank_mean = ranks.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_pos = 0.0;
    let mut var_rank = 0.0;
    for (i, &r) in ranks.iter().enumerate() {
        let dp = i as f64 - pos_mean;
        let dr = r - rank_mean;
        cov += dp * dr;
        var_pos += dp * dp;
        var_rank += dr * dr;
    }
    if var_rank == 0.0 {
        return 0.0;
    }
    cov / (var_pos * var_rank).sqrt()
}

/// Classify a series in sweep order as increasing, decreasing or constant.
///
/// With `baseline` set (the neutral-scenario delta design) the rule is on
/// the mean delta: constant when it is within `delta_frac` of the baseline
/// polarization, otherwise classified by sign. Without it, the sweep rule
/// applies: monotone direction needs Spearman rank correlation at the
/// threshold and a relative range of at least `rel_range`.
pub fn classify_trend(
    series: &[(f64, f64)],
    baseline: Option<f64>,
    thresholds: &TrendThresholds,
) -> Result<Trend, ExperimentError> {
    if let Some(base) = baseline {
        if series.is_empty() {
            return Err(ExperimentError::TooFewPoints(0));
        }
        let delta = series.iter().map(|&(_, v)| v).sum::<f64>() / series.len() as f64;
        if delta.abs() <= thresholds.delta_frac * base.abs() {
            return Ok(Trend::Constant);
        }
        return Ok(if delta > 0.0 { Trend::Increasing } else { Trend::Decreasing });
    }
    if series.len() < 3 {
        return Err(ExperimentError::TooFewPoints(series.len()));
    }
    let values: Vec<f64> = series.iter().map(|&(_, v)| v).collect();
    let rho = spearman_vs_position(&values);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let rel_range = if mean == 0.0 {
        if max > min {
            f64::INFINITY
        } else {
            0.0
        }
    } else {
        (max - min) / mean.abs()
    };
    if rel_range >= thresholds.rel_range {
        if rho >= thresholds.spearman {
            return Ok(Trend::Increasing);
        }
        if rho <= -thresholds.spearman {
            return Ok(Trend::Decreasing);
        }
    }
    Ok(Trend::Constant)
}

/// Per-scenario records for the two series conformity is judged on.
#[derive(Debug, Clone)]
pub struct ScenarioRecords {
    pub local_community: Vec<TableRecord>,
    pub large: Vec<TableRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendVerdict {
    pub method: String,
    pub scenario: Scenario,
    pub local_trend: Trend,
    pub large_trend: Trend,
    pub conforms: bool,
}

fn desired_trends(scenario: Scenario) -> &'static [Trend] {
    match scenario {
        Scenario::UniqueOpinions => &[Trend::Constant, Trend::Decreasing],
        Scenario::NeutralOrthogonal => &[Trend::Constant],
        Scenario::Correlation => &[Trend::Decreasing],
        Scenario::Consensus => &[Trend::Increasing],
    }
}

fn method_series(records: &[TableRecord], method: &str) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.method == method)
        .map(|r| (r.x, r.mean))
        .collect()
}

fn classify_records(
    scenario: Scenario,
    records: &[TableRecord],
    method: Method,
    thresholds: &TrendThresholds,
) -> Result<Trend, ExperimentError> {
    let series = method_series(records, method.as_str());
    if series.is_empty() {
        return Err(ExperimentError::MissingMethod(method.as_str().to_string()));
    }
    if scenario == Scenario::NeutralOrthogonal {
        let baseline_series = method_series(records, &format!("{}_baseline", method.as_str()));
        if baseline_series.is_empty() {
            return Err(ExperimentError::MissingMethod(format!("{}_baseline", method.as_str())));
        }
        let baseline =
            baseline_series.iter().map(|&(_, v)| v).sum::<f64>() / baseline_series.len() as f64;
        classify_trend(&series, Some(baseline), thresholds)
    } else {
        classify_trend(&series, None, thresholds)
    }
}

/// Judge every method against every scenario's desired behavior. A method
/// conforms when both the local community series and the large SBM series
/// fall in the scenario's desired trend class.
pub fn run_conformity(
    tables: &BTreeMap<Scenario, ScenarioRecords>,
    thresholds: &TrendThresholds,
) -> Result<Vec<TrendVerdict>, ExperimentError> {
    for scenario in Scenario::ALL {
        if !tables.contains_key(&scenario) {
            return Err(ExperimentError::MissingScenario(scenario.as_str().to_string()));
        }
    }
    let mut verdicts = Vec::new();
    for method in Method::ALL {
        for scenario in Scenario::ALL {
            let records = &tables[&scenario];
            let local_trend =
                classify_records(scenario, &records.local_community, method, thresholds)?;
            let large_trend = classify_records(scenario, &records.large, method, thresholds)?;
            let desired = desired_trends(scenario);
            let conforms = desired.contains(&local_trend) && desired.contains(&large_trend);
            verdicts.push(TrendVerdict {
                method: method.as_str().to_string(),
                scenario,
                local_trend,
                large_trend,
                conforms,
            });
        }
    }
    Ok(verdicts)
}

/// 5x4 pass/fail matrix, rows = methods, columns = scenarios.
pub fn conformity_csv(verdicts: &[TrendVerdict]) -> String {
    let mut out = String::from("method");
    for scenario in Scenario::ALL {
        write!(out, ",{}", scenario.as_str()).unwrap();
    }
    out.push('\n');
    for method in Method::ALL {
        write!(out, "{}", method.as_str()).unwrap();
        for scenario in Scenario::ALL {
            let v = verdicts
                .iter()
                .find(|v| v.method == method.as_str() && v.scenario == scenario)
                .expect("complete verdict grid");
            write!(out, ",{}", if v.conforms { "pass" } else { "fail" }).unwrap();
        }
        out.push('\n');
    }
    out
}

/// Human-readable per-method trend classifications.
pub fn conformity_summary(verdicts: &[TrendVerdict]) -> String {
    let mut out = String::new();
    for method in Method::ALL {
        writeln!(out, "{}:", method.as_str()).unwrap();
        for scenario in Scenario::ALL {
            let v = verdicts
                .iter()
                .find(|v| v.method == method.as_str() && v.scenario == scenario)
                .expect("complete verdict grid");
            writeln!(
                out,
                "  {:<20} local={:<10} large={:<10} {}",
                scenario.as_str(),
                v.local_trend.as_str(),
                v.large_trend.as_str(),
                if v.conforms { "pass" } else { "fail" }
            )
            .unwrap();
        }
    }
    out
}
