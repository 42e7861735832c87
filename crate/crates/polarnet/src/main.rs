use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use polarnet::experiments::{
    self, conformity_csv, conformity_summary, fmt_sig, parse_table_csv, ExperimentError,
    Method, NetworkKind, Scale, Scenario, ScenarioConfig, ScenarioRecords,
    TrendThresholds,
};
use polarnet::generators::{self, GeneratorError, SbmParams};
use polarnet::graph::{Graph, GraphError, LaplacianKernel};
use polarnet::manifest::{write_atomic, RunManifest};
use polarnet::metrics::{self, MdsConfig, MetricError};
use polarnet::opinions::{OpinionError, OpinionMatrix};

#[derive(Parser)]
#[command(name = "polarnet", version, about = "Multipolar polarization metrics on networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a network (and memberships) to files
    Generate(GenerateArgs),
    /// Compute polarization metrics on a graph + opinion file pair
    Metric(MetricArgs),
    /// Run one synthetic scenario and write its result tables
    Experiment(ExperimentArgs),
    /// Build the conformity matrix from four scenario output directories
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// chain | complete | community | sbm
    #[arg(long)]
    kind: String,
    /// Total node count (chain, complete, community)
    #[arg(long)]
    nodes: Option<usize>,
    /// Number of communities (community, sbm)
    #[arg(long)]
    communities: Option<usize>,
    /// Nodes per community (sbm)
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    /// Defaults to POLARNET_SEED or 0
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    opinions: PathBuf,
    /// Comma-separated subset of apd,adm,pc,mds,tv
    #[arg(long, default_value = "apd,adm,pc,mds,tv")]
    methods: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 100)]
    mds_n_init: usize,
    #[arg(long, default_value_t = 300)]
    mds_max_iter: usize,
    #[arg(long, default_value_t = 1e-4)]
    mds_rel_tol: f64,
    /// Also write the records as JSON
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    scenario: String,
    /// local | large
    #[arg(long)]
    scale: String,
    /// chain | complete | community | all (local scale only)
    #[arg(long)]
    kind: Option<String>,
    /// Reduced-scale run: 30-node communities, 5 replications, 20 MDS restarts
    #[arg(long)]
    desk: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long)]
    community_size: Option<usize>,
    #[arg(long)]
    mds_n_init: Option<usize>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    /// Comma-separated x-values overriding the scenario default sweep
    #[arg(long)]
    sweep: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Output directories of the four scenarios, in order:
    /// unique_opinions neutral_orthogonal correlation consensus
    dirs: Vec<PathBuf>,
    /// Write the conformity matrix CSV here (stdout otherwise)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    spearman: f64,
    #[arg(long, default_value_t = 0.02)]
    rel_range: f64,
    #[arg(long, default_value_t = 0.05)]
    delta_frac: f64,
}

struct CliError {
    message: String,
    code: i32,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 2 }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 3 }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(e.to_string())
    }
}

fn graph_code(e: &GraphError) -> i32 {
    match e {
        GraphError::NegativeQuadraticForm(_) => 4,
        _ => 3,
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        Self { code: graph_code(&e), message: e.to_string() }
    }
}

impl From<OpinionError> for CliError {
    fn from(e: OpinionError) -> Self {
        Self::data(e.to_string())
    }
}

fn metric_code(e: &MetricError) -> i32 {
    match e {
        MetricError::DegenerateCovariance => 4,
        MetricError::Graph(g) => graph_code(g),
        _ => 3,
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        Self { code: metric_code(&e), message: e.to_string() }
    }
}

fn generator_code(e: &GeneratorError) -> i32 {
    match e {
        GeneratorError::ConnectivityFailure(_) => 4,
        _ => 2,
    }
}

impl From<GeneratorError> for CliError {
    fn from(e: GeneratorError) -> Self {
        Self { code: generator_code(&e), message: e.to_string() }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let code = match &e {
            ExperimentError::ConfigMismatch(_) | ExperimentError::TooFewPoints(_) => 2,
            ExperimentError::Graph(g) => graph_code(g),
            ExperimentError::Metric(m) => metric_code(m),
            ExperimentError::Generator(g) => generator_code(g),
            _ => 3,
        };
        Self { code, message: e.to_string() }
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Metric(args) => cmd_metric(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::Report(args) => cmd_report(args),
    };
    if let Err(e) = result {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn default_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| std::env::var("POLARNET_SEED").ok().and_then(|v| v.parse().ok()))
        .unwrap_or(0)
}

fn write_file(manifest: &mut RunManifest, path: &Path, contents: &str) -> Result<(), CliError> {
    write_atomic(path, contents)
        .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))?;
    manifest.add_artifact(path);
    Ok(())
}

fn finish_manifest(manifest: &mut RunManifest, path: &Path) -> Result<(), CliError> {
    manifest.add_artifact(path);
    write_atomic(path, &manifest.to_json())
        .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), CliError> {
    let seed = default_seed(args.seed);
    let need = |opt: Option<usize>, flag: &str| {
        opt.ok_or_else(|| CliError::usage(format!("--{flag} is required for kind {}", args.kind)))
    };
    let (graph, assignment) = match args.kind.as_str() {
        "chain" => (generators::chain(need(args.nodes, "nodes")?), None),
        "complete" => (generators::complete(need(args.nodes, "nodes")?), None),
        "community" => {
            let communities = args.communities.unwrap_or(2);
            let (g, a) = generators::community_network(communities, need(args.nodes, "nodes")?)?;
            (g, Some(a))
        }
        "sbm" => {
            let params = SbmParams {
                community_count: need(args.communities, "communities")?,
                community_size: need(args.size, "size")?,
                p_in: args.p_in,
                p_out: args.p_out,
                rng_seed: seed,
            };
            params.validate()?;
            if let Some(warning) = params.assortativity_warning() {
                eprintln!("warning: {warning}");
            }
            let (g, a) = generators::sbm(&params)?;
            (g, Some(a))
        }
        other => return Err(CliError::usage(format!("unknown kind {other:?}"))),
    };

    fs::create_dir_all(&args.out_dir)?;
    let config = serde_json::json!({
        "kind": args.kind,
        "nodes": args.nodes,
        "communities": args.communities,
        "size": args.size,
        "p_in": args.p_in,
        "p_out": args.p_out,
        "seed": seed,
    });
    let mut manifest = RunManifest::new("generate", config);
    write_file(&mut manifest, &args.out_dir.join("edges.txt"), &graph.to_edge_list())?;
    if let Some(assignment) = &assignment {
        write_file(&mut manifest, &args.out_dir.join("membership.csv"), &assignment.to_csv())?;
    }
    finish_manifest(&mut manifest, &args.out_dir.join("manifest.json"))?;
    println!(
        "wrote {} nodes, {} edges to {}",
        graph.node_count(),
        graph.edge_count(),
        args.out_dir.display()
    );
    Ok(())
}

fn parse_methods(spec: &str) -> Result<Vec<Method>, CliError> {
    spec.split(',')
        .map(|m| match m.trim().to_ascii_lowercase().as_str() {
            "apd" => Ok(Method::Apd),
            "adm" => Ok(Method::Adm),
            "pc" => Ok(Method::Pc),
            "mds" => Ok(Method::Mds),
            "tv" => Ok(Method::Tv),
            other => Err(CliError::usage(format!("unknown method {other:?}"))),
        })
        .collect()
}

fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn cmd_metric(args: MetricArgs) -> Result<(), CliError> {
    let methods = parse_methods(&args.methods)?;
    let graph = Graph::parse_edge_list(&read_to_string(&args.graph)?)
        .map_err(|e| CliError { code: 3, message: format!("{}: {e}", args.graph.display()) })?;
    let opinions = OpinionMatrix::parse_csv(&read_to_string(&args.opinions)?)
        .map_err(|e| CliError { code: 3, message: format!("{}: {e}", args.opinions.display()) })?;
    if opinions.node_count() != graph.node_count() {
        return Err(CliError::data(format!(
            "{}: {} opinion rows but the graph has {} nodes",
            args.opinions.display(),
            opinions.node_count(),
            graph.node_count()
        )));
    }
    for violation in opinions.validate() {
        eprintln!("warning: {}: {violation:?}", args.opinions.display());
    }

    let needs_kernel = methods.iter().any(|m| *m != Method::Tv);
    let kernel = if needs_kernel { Some(LaplacianKernel::new(&graph)?) } else { None };
    let mds_config = MdsConfig {
        n_init: args.mds_n_init,
        max_iter: args.mds_max_iter,
        rel_tol: args.mds_rel_tol,
        rng_seed: default_seed(args.seed),
    };

    let mut records = Vec::new();
    for method in &methods {
        let kernel = kernel.as_ref();
        match method {
            Method::Apd => {
                let v = metrics::apd(kernel.unwrap(), &opinions)?;
                println!("APD {}", fmt_sig(v));
                records.push(serde_json::json!({"method": "APD", "value": v}));
            }
            Method::Adm => {
                let v = metrics::adm(kernel.unwrap(), &opinions)?;
                println!("ADM {}", fmt_sig(v));
                records.push(serde_json::json!({"method": "ADM", "value": v}));
            }
            Method::Pc => {
                let v = metrics::pc(kernel.unwrap(), &opinions)?;
                println!("PC {}", fmt_sig(v));
                records.push(serde_json::json!({"method": "PC", "value": v}));
            }
            Method::Mds => {
                let est = metrics::mds_polarization(kernel.unwrap(), &opinions, &mds_config)?;
                println!("MDS {} {} {}", fmt_sig(est.mean), fmt_sig(est.ci_low), fmt_sig(est.ci_high));
                records.push(serde_json::json!({
                    "method": "MDS",
                    "value": est.mean,
                    "ci_low": est.ci_low,
                    "ci_high": est.ci_high,
                    "n_samples": est.samples.len(),
                }));
            }
            Method::Tv => {
                let v = metrics::tv(&opinions)?;
                println!("TV {}", fmt_sig(v));
                records.push(serde_json::json!({"method": "TV", "value": v}));
            }
        }
    }

    if let Some(json_path) = &args.json {
        let body = serde_json::to_string_pretty(&records).expect("records serialize");
        write_atomic(json_path, &body)
            .map_err(|e| CliError::data(format!("writing {}: {e}", json_path.display())))?;
    }
    Ok(())
}

fn table_file_stem(scale: Scale, kind: Option<NetworkKind>) -> String {
    match scale {
        Scale::Large => "large".to_string(),
        Scale::Local => format!("local_{}", kind.expect("local kind").as_str()),
    }
}

fn cmd_experiment(args: ExperimentArgs) -> Result<(), CliError> {
    let scenario = Scenario::from_str(&args.scenario).map_err(CliError::usage)?;
    let scale = Scale::from_str(&args.scale).map_err(CliError::usage)?;
    let seed = default_seed(args.seed);

    let kinds: Vec<Option<NetworkKind>> = match scale {
        Scale::Large => {
            if args.kind.is_some() {
                return Err(CliError::usage("--kind applies to local scale only"));
            }
            vec![None]
        }
        Scale::Local => match args.kind.as_deref().unwrap_or("all") {
            "all" => NetworkKind::ALL.iter().map(|&k| Some(k)).collect(),
            one => vec![Some(NetworkKind::from_str(one).map_err(CliError::usage)?)],
        },
    };

    fs::create_dir_all(&args.out_dir)?;
    let mut manifest = RunManifest::new("experiment", serde_json::Value::Null);
    let mut configs = Vec::new();
    for kind in kinds {
        let mut config = ScenarioConfig::paper(scenario, scale, kind, seed);
        if args.desk {
            config = config.desk();
        }
        if let Some(r) = args.replications {
            config.replications = r;
        }
        if let Some(c) = args.community_size {
            config.community_size = c;
        }
        if let Some(n) = args.mds_n_init {
            config.mds.n_init = n;
            config.mds_large_samples = config.mds_large_samples.min(n.max(1));
        }
        if let Some(p) = args.p_in {
            config.p_in = p;
        }
        if let Some(p) = args.p_out {
            config.p_out = p;
        }
        if let Some(sweep) = &args.sweep {
            config.sweep = sweep
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::usage(format!("bad --sweep value: {e}")))?;
        }
        let table = experiments::run_scenario(&config)?;
        let stem = table_file_stem(scale, kind);
        write_file(&mut manifest, &args.out_dir.join(format!("{stem}.csv")), &table.to_csv())?;
        let json = serde_json::to_string_pretty(&table).expect("table serializes");
        write_file(&mut manifest, &args.out_dir.join(format!("{stem}.json")), &json)?;
        println!("wrote {stem}.csv ({} rows)", table.rows.len());
        configs.push(config);
    }
    manifest.config = serde_json::to_value(&configs).expect("configs serialize");
    let manifest_name = match scale {
        Scale::Local => "manifest_local.json",
        Scale::Large => "manifest_large.json",
    };
    finish_manifest(&mut manifest, &args.out_dir.join(manifest_name))?;
    Ok(())
}

fn load_scenario_records(scenario: Scenario, dir: &Path) -> Result<ScenarioRecords, CliError> {
    let load = |name: &str| -> Result<_, CliError> {
        let path = dir.join(name);
        if !path.exists() {
            return Err(CliError::data(format!(
                "missing scenario output for {}: {}",
                scenario.as_str(),
                path.display()
            )));
        }
        Ok(parse_table_csv(&read_to_string(&path)?)
            .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?)
    };
    Ok(ScenarioRecords {
        local_community: load("local_community.csv")?,
        large: load("large.csv")?,
    })
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    if args.dirs.len() != 4 {
        return Err(CliError::usage(
            "report takes exactly four directories: unique_opinions neutral_orthogonal correlation consensus",
        ));
    }
    let thresholds = TrendThresholds {
        spearman: args.spearman,
        rel_range: args.rel_range,
        delta_frac: args.delta_frac,
    };
    let mut tables = BTreeMap::new();
    for (scenario, dir) in Scenario::ALL.iter().zip(args.dirs.iter()) {
        tables.insert(*scenario, load_scenario_records(*scenario, dir)?);
    }
    let verdicts = experiments::run_conformity(&tables, &thresholds)?;
    print!("{}", conformity_summary(&verdicts));
    let csv = conformity_csv(&verdicts);
    match &args.out {
        Some(path) => {
            write_atomic(path, &csv)
                .map_err(|e| CliError::data(format!("writing {}: {e}", path.display())))?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
