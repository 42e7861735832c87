//! End-to-end tests of the polarnet binary: exit codes, determinism,
//! file formats and the manifest contract.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polarnet"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn generate_chain_writes_edge_list() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["generate", "--kind", "chain", "--nodes", "12", "--out-dir"])
        .status
        .code();
    // missing value for --out-dir is a usage error
    assert_eq!(out, Some(2));

    let out = run(&[
        "generate",
        "--kind",
        "chain",
        "--nodes",
        "12",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let edges = fs::read_to_string(dir.path().join("edges.txt")).unwrap();
    assert!(edges.starts_with("# nodes=12"));
    assert_eq!(edges.lines().filter(|l| !l.starts_with('#')).count(), 11);
    assert!(dir.path().join("manifest.json").exists());
}

#[test]
fn generate_sbm_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
        let out = run(&[
            "generate",
            "--kind",
            "sbm",
            "--communities",
            "3",
            "--size",
            "30",
            "--p-in",
            "0.3",
            "--p-out",
            "0.05",
            "--seed",
            seed,
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    let read = |d: &tempfile::TempDir, f: &str| fs::read_to_string(d.path().join(f)).unwrap();
    assert_eq!(read(&a, "edges.txt"), read(&b, "edges.txt"));
    assert_eq!(read(&a, "membership.csv"), read(&b, "membership.csv"));
    assert_ne!(read(&a, "edges.txt"), read(&c, "edges.txt"));
}

#[test]
fn metric_two_node_chain_identity_opinions() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let ops = dir.path().join("o.csv");
    fs::write(&graph, "# nodes=2\n0 1\n").unwrap();
    fs::write(&ops, "node,op0,op1\n0,1,0\n1,0,1\n").unwrap();
    let out = run(&[
        "metric",
        "--graph",
        graph.to_str().unwrap(),
        "--opinions",
        ops.to_str().unwrap(),
        "--methods",
        "apd,adm,tv",
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    // two opposed nodes over one edge: APD = 1, ADM = 1/2, TV = 1
    assert!(text.contains("APD 1.00000000000e0"), "{text}");
    assert!(text.contains("ADM 5.00000000000e-1"), "{text}");
    assert!(text.contains("TV 1.00000000000e0"), "{text}");
}

#[test]
fn metric_disconnected_graph_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let ops = dir.path().join("o.csv");
    fs::write(&graph, "# nodes=4\n0 1\n2 3\n").unwrap();
    fs::write(&ops, "node,op0\n0,1\n1,0\n2,1\n3,0\n").unwrap();
    let out = run(&[
        "metric",
        "--graph",
        graph.to_str().unwrap(),
        "--opinions",
        ops.to_str().unwrap(),
        "--methods",
        "apd",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
    assert!(stderr_of(&out).to_lowercase().contains("disconnected"));
}

#[test]
fn metric_dimension_mismatch_names_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let ops = dir.path().join("o.csv");
    fs::write(&graph, "# nodes=3\n0 1\n1 2\n").unwrap();
    fs::write(&ops, "node,op0\n0,1\n1,0\n").unwrap();
    let out = run(&[
        "metric",
        "--graph",
        graph.to_str().unwrap(),
        "--opinions",
        ops.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn metric_json_report_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.txt");
    let ops = dir.path().join("o.csv");
    let json = dir.path().join("report.json");
    fs::write(&graph, "# nodes=2\n0 1\n").unwrap();
    fs::write(&ops, "node,op0,op1\n0,1,0\n1,0,1\n").unwrap();
    let out = run(&[
        "metric",
        "--graph",
        graph.to_str().unwrap(),
        "--opinions",
        ops.to_str().unwrap(),
        "--methods",
        "apd,mds",
        "--mds-n-init",
        "5",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let parsed: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let records = parsed.as_array().unwrap();
    assert!(records.iter().any(|r| r["method"] == "APD" && r["value"].is_number()), "{parsed}");
    let mds = records.iter().find(|r| r["method"] == "MDS").unwrap();
    assert!(mds["ci_low"].is_number() && mds["n_samples"] == 5, "{parsed}");
}

#[test]
fn experiment_desk_runs_and_is_seed_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = run(&[
            "experiment",
            "--scenario",
            "consensus",
            "--scale",
            "local",
            "--kind",
            "community",
            "--desk",
            "--seed",
            "11",
            "--out-dir",
            dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    let fa = fs::read_to_string(a.path().join("local_community.csv")).unwrap();
    let fb = fs::read_to_string(b.path().join("local_community.csv")).unwrap();
    assert_eq!(fa, fb, "same seed must reproduce byte-identical tables");
    assert!(a.path().join("manifest_local.json").exists());
}

#[test]
fn experiment_manifest_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "experiment",
        "--scenario",
        "unique_opinions",
        "--scale",
        "local",
        "--kind",
        "chain",
        "--desk",
        "--seed",
        "3",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("manifest_local.json")).unwrap(),
    )
    .unwrap();
    // local runs store one config per network kind
    assert_eq!(manifest["config"][0]["master_seed"], 3);
    assert_eq!(manifest["config"][0]["scenario"], "unique_opinions");
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(artifacts.iter().any(|a| a.as_str().unwrap().ends_with("local_chain.csv")));
}

#[test]
fn report_missing_directory_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere");
    let out = run(&[
        "report",
        missing.to_str().unwrap(),
        missing.to_str().unwrap(),
        missing.to_str().unwrap(),
        missing.to_str().unwrap(),
    ]);
    assert_ne!(out.status.code(), Some(0));
    assert!(stderr_of(&out).contains("nowhere"), "{}", stderr_of(&out));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["generate", "--kind", "chain", "--nodes", "5", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

/// Full desk pipeline: all four scenarios at both scales, then the report.
/// Checks the conformity matrix shape and that every cell is pass or fail.
#[test]
fn desk_pipeline_produces_well_formed_conformity_matrix() {
    let root = tempfile::tempdir().unwrap();
    let scenarios = ["unique_opinions", "neutral_orthogonal", "correlation", "consensus"];
    for scenario in scenarios {
        let dir = root.path().join(scenario);
        fs::create_dir(&dir).unwrap();
        for scale in ["local", "large"] {
            let mut args = vec![
                "experiment",
                "--scenario",
                scenario,
                "--scale",
                scale,
                "--desk",
                "--seed",
                "0",
                "--out-dir",
                dir.to_str().unwrap(),
            ];
            if scale == "local" {
                args.extend(["--kind", "community"]);
            }
            let out = run(&args);
            assert!(out.status.success(), "{scenario}/{scale}: {}", stderr_of(&out));
        }
    }
    let matrix_path = root.path().join("conformity.csv");
    let dirs: Vec<String> = scenarios
        .iter()
        .map(|s| root.path().join(s).to_str().unwrap().to_string())
        .collect();
    let out = run(&[
        "report",
        &dirs[0],
        &dirs[1],
        &dirs[2],
        &dirs[3],
        "--out",
        matrix_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let matrix = fs::read_to_string(&matrix_path).unwrap();
    let lines: Vec<&str> = matrix.lines().collect();
    assert_eq!(lines.len(), 6);
    assert_eq!(lines[0], "method,unique_opinions,neutral_orthogonal,correlation,consensus");
    for line in &lines[1..] {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 5);
        for cell in &cells[1..] {
            assert!(*cell == "pass" || *cell == "fail", "bad cell {cell}");
        }
    }
}

#[test]
fn atomic_outputs_leave_no_temp_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "generate",
        "--kind",
        "community",
        "--communities",
        "3",
        "--nodes",
        "12",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    for entry in fs::read_dir(dir.path()).unwrap() {
        let name = entry.unwrap().file_name().into_string().unwrap();
        assert!(!name.ends_with(".tmp"), "leftover temp file {name}");
    }
}

#[test]
fn env_seed_is_used_when_flag_absent() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        let out = bin()
            .args([
                "generate",
                "--kind",
                "sbm",
                "--communities",
                "2",
                "--size",
                "20",
                "--p-in",
                "0.4",
                "--p-out",
                "0.1",
                "--out-dir",
                dir.path().to_str().unwrap(),
            ])
            .env("POLARNET_SEED", "99")
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr_of(&out));
    }
    let fa = fs::read_to_string(a.path().join("edges.txt")).unwrap();
    let fb = fs::read_to_string(b.path().join("edges.txt")).unwrap();
    assert_eq!(fa, fb);
    // and the env seed differs from the default seed 0
    let c = tempfile::tempdir().unwrap();
    let out = run(&[
        "generate",
        "--kind",
        "sbm",
        "--communities",
        "2",
        "--size",
        "20",
        "--p-in",
        "0.4",
        "--p-out",
        "0.1",
        "--out-dir",
        c.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let fc = fs::read_to_string(c.path().join("edges.txt")).unwrap();
    assert_ne!(fa, fc);
}

fn graph_csv_fixture(dir: &Path) -> (String, String) {
    let graph = dir.join("g.txt");
    let ops = dir.join("o.csv");
    fs::write(&graph, "# nodes=3\n0 1\n1 2\n0 2\n").unwrap();
    fs::write(&ops, "node,op0,op1,op2\n0,1,0,0\n1,0,1,0\n2,0,0,1\n").unwrap();
    (graph.to_str().unwrap().to_string(), ops.to_str().unwrap().to_string())
}

#[test]
fn metric_selects_requested_methods_only() {
    let dir = tempfile::tempdir().unwrap();
    let (graph, ops) = graph_csv_fixture(dir.path());
    let out = run(&["metric", "--graph", &graph, "--opinions", &ops, "--methods", "tv"]);
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.contains("TV"));
    assert!(!text.contains("APD"));
}
