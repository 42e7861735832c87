//! Property-based tests: the pseudoinverse against an independent Jacobi
//! eigensolver oracle, distance invariants, stance-matrix invariants and
//! closed forms, all on randomly generated small instances.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use polarnet::generators;
use polarnet::metrics;
use polarnet::{CommunityAssignment, Graph, LaplacianKernel, OpinionMatrix};

mod common;
use common::pinv_oracle;

// ---------------------------------------------------------------------------
// strategies
// ---------------------------------------------------------------------------

/// A connected graph on 2..=12 nodes: a path backbone plus random chords.
fn connected_graph() -> impl Strategy<Value = Graph> {
    (2usize..=12).prop_flat_map(|n| {
        let max_chords = n * (n - 1) / 2;
        proptest::collection::vec((0..n, 0..n), 0..=max_chords).prop_map(move |chords| {
            let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
            for (a, b) in chords {
                if a != b {
                    edges.push((a.min(b), a.max(b)));
                }
            }
            Graph::new(n, &edges).expect("valid random graph")
        })
    })
}

/// Stance vector entries in [0, 1].
fn stance_vector(n: usize) -> impl Strategy<Value = DVector<f64>> {
    proptest::collection::vec(0.0..1.0f64, n).prop_map(DVector::from_vec)
}

/// Equal-size community assignment with at least 2 communities.
fn equal_blocks() -> impl Strategy<Value = CommunityAssignment> {
    (2usize..=5, 1usize..=4)
        .prop_map(|(communities, size)| CommunityAssignment::contiguous_blocks(communities, communities * size))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pseudoinverse_matches_jacobi_oracle(graph in connected_graph()) {
        let kernel = LaplacianKernel::new(&graph).unwrap();
        let oracle = pinv_oracle(&graph);
        let n = graph.node_count();
        for i in 0..n {
            for j in 0..n {
                prop_assert!(
                    (kernel.pinv()[(i, j)] - oracle[i][j]).abs() < 1e-9,
                    "entry ({i}, {j}): {} vs oracle {}",
                    kernel.pinv()[(i, j)],
                    oracle[i][j]
                );
            }
        }
    }

    #[test]
    fn ged_is_symmetric(graph in connected_graph(), seed in any::<u64>()) {
        let n = graph.node_count();
        let kernel = LaplacianKernel::new(&graph).unwrap();
        // two deterministic pseudo-random stance vectors from the seed
        let a = DVector::from_fn(n, |i, _| {
            (polarnet::seed::mix(seed, i as u64) % 1000) as f64 / 1000.0
        });
        let b = DVector::from_fn(n, |i, _| {
            (polarnet::seed::mix(seed, (i + n) as u64) % 1000) as f64 / 1000.0
        });
        let ab = kernel.ged(&a, &b).unwrap();
        let ba = kernel.ged(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
    }

    #[test]
    fn ged_ignores_constant_shifts(graph in connected_graph(), shift in -5.0..5.0f64) {
        // the all-ones vector spans the Laplacian null space on a connected
        // graph, so adding a constant to one input cannot change the distance
        let n = graph.node_count();
        let kernel = LaplacianKernel::new(&graph).unwrap();
        let a = DVector::from_fn(n, |i, _| i as f64 / n as f64);
        let b = DVector::zeros(n);
        let shifted = a.add_scalar(shift);
        let d0 = kernel.ged(&a, &b).unwrap();
        let d1 = kernel.ged(&shifted, &b).unwrap();
        // tolerance reflects eigensolver accuracy at shift magnitudes up to 5
        prop_assert!((d0 - d1).abs() < 1e-6, "{d0} vs {d1}");
    }

    #[test]
    fn ged_scales_homogeneously(graph in connected_graph(), t in -3.0..3.0f64) {
        let n = graph.node_count();
        let kernel = LaplacianKernel::new(&graph).unwrap();
        let a = DVector::from_fn(n, |i, _| ((i * 7919) % 101) as f64 / 101.0);
        let b = DVector::from_fn(n, |i, _| ((i * 104729) % 97) as f64 / 97.0);
        let base = kernel.ged(&a, &b).unwrap();
        let scaled = kernel.ged(&(&a * t), &(&b * t)).unwrap();
        prop_assert!((scaled - t.abs() * base).abs() < 1e-9 * (1.0 + base));
    }

    #[test]
    fn quadratic_form_is_nonnegative(graph in connected_graph(), x in stance_vector(12)) {
        let n = graph.node_count();
        let kernel = LaplacianKernel::new(&graph).unwrap();
        let x = DVector::from_fn(n, |i, _| x[i % x.len()]);
        prop_assert!(kernel.quadratic_form(&x).unwrap() >= 0.0);
    }

    #[test]
    fn rotation_preserves_norms_and_closes_angle(
        assignment in equal_blocks(),
        phi in 0.0..=45.0f64,
    ) {
        let opinions = OpinionMatrix::unique_orthogonal(&assignment);
        let rotated = opinions.rotate_pair(0, 1, phi).unwrap();
        for col in 0..opinions.opinion_count() {
            prop_assert!(
                (rotated.opinion(col).norm() - opinions.opinion(col).norm()).abs() < 1e-9
            );
        }
        let angle =
            polarnet::opinions::opinion_angle(&rotated.opinion(0), &rotated.opinion(1)).unwrap();
        prop_assert!((angle - (90.0 - 2.0 * phi)).abs() < 1e-6, "angle {angle} for phi {phi}");
    }

    #[test]
    fn tv_block_closed_form(n in 2usize..=6, m in 1usize..=20) {
        let assignment = CommunityAssignment::contiguous_blocks(n, n * m);
        let opinions = OpinionMatrix::unique_orthogonal(&assignment);
        if n * m < 2 {
            return Ok(());
        }
        let expected = m as f64 * (n as f64 - 1.0) / (m as f64 * n as f64 - 1.0);
        prop_assert!((metrics::tv(&opinions).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn consensus_samples_are_valid_and_deterministic(
        assignment in equal_blocks(),
        sigma in 0.0..=0.5f64,
        seed in any::<u64>(),
    ) {
        let a = OpinionMatrix::sample_consensus(&assignment, 0.5, sigma, seed);
        let b = OpinionMatrix::sample_consensus(&assignment, 0.5, sigma, seed);
        prop_assert_eq!(a.stances(), b.stances());
        for col in 0..a.opinion_count() {
            for row in 0..a.node_count() {
                let v = a.stances()[(row, col)];
                prop_assert!((0.0..=1.0).contains(&v));
                // off-community stances stay zero
                if assignment.community_of(row) != col {
                    prop_assert_eq!(v, 0.0);
                }
            }
        }
    }

    #[test]
    fn point_metrics_invariant_under_relabeling(
        communities in 2usize..=4,
        size in 3usize..=4,
        rot in 0usize..=11,
    ) {
        let total = communities * size;
        let rot = rot % total;
        let (graph, assignment) = generators::community_network(communities, total).unwrap();
        let opinions = OpinionMatrix::unique_orthogonal(&assignment);
        let kernel = LaplacianKernel::new(&graph).unwrap();

        // relabel nodes by a cyclic shift
        let perm: Vec<usize> = (0..total).map(|i| (i + rot) % total).collect();
        let edges: Vec<(usize, usize)> =
            graph.edges().iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let permuted_graph = Graph::new(total, &edges).unwrap();
        let mut stances = DMatrix::zeros(total, communities);
        for node in 0..total {
            stances.set_row(node, &opinions.stances().row((total + node - rot) % total));
        }
        let permuted = OpinionMatrix::from_matrix(stances);
        let permuted_kernel = LaplacianKernel::new(&permuted_graph).unwrap();

        let before = [
            metrics::apd(&kernel, &opinions).unwrap(),
            metrics::adm(&kernel, &opinions).unwrap(),
            metrics::pc(&kernel, &opinions).unwrap(),
        ];
        let after = [
            metrics::apd(&permuted_kernel, &permuted).unwrap(),
            metrics::adm(&permuted_kernel, &permuted).unwrap(),
            metrics::pc(&permuted_kernel, &permuted).unwrap(),
        ];
        for (b, a) in before.iter().zip(after.iter()) {
            prop_assert!((b - a).abs() < 1e-9, "{b} vs {a}");
        }
    }

    #[test]
    fn edge_list_round_trip(graph in connected_graph()) {
        let text = graph.to_edge_list();
        let parsed = Graph::parse_edge_list(&text).unwrap();
        prop_assert_eq!(parsed.node_count(), graph.node_count());
        prop_assert_eq!(parsed.edges(), graph.edges());
    }

    #[test]
    fn percentile_interval_brackets_samples(
        samples in proptest::collection::vec(-100.0..100.0f64, 1..50),
    ) {
        let (lo, hi) = metrics::percentile_ci(&samples).unwrap();
        let min = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo >= min - 1e-12 && hi <= max + 1e-12 && lo <= hi);
    }
}
