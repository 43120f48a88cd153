use std::collections::BTreeSet;

use demograph_core::merge::{epoch_rng, AnchorSampling};
use demograph_core::{
    init_concept_features, merge_kgs, sample_anchor_nodes, DenseMatrix, Graph, GraphParts, KgEdge,
    KnowledgeGraph, MergeConfig, MergeMode, NodeOrigin, Splits,
};
use proptest::prelude::*;

fn graph(n: usize, edges: Vec<(usize, usize)>, dim: usize) -> Graph {
    Graph::new(GraphParts {
        features: DenseMatrix::zeros(n, dim),
        labels: vec![Some(0); n],
        edges,
        splits: Splits::default(),
        origin: vec![NodeOrigin::Original; n],
    })
    .unwrap()
}

fn kg_of(raw: &[(u8, u8, u8)]) -> KnowledgeGraph {
    KnowledgeGraph::from_edges(
        raw.iter().map(|&(h, r, t)| KgEdge {
            head: format!("c{h}"),
            relation: format!("r{r}"),
            tail: format!("c{t}"),
        }),
        Default::default(),
    )
}

proptest! {
    #[test]
    fn counting_identities(
        n in 1usize..40,
        raw_edges in prop::collection::vec((0usize..40, 0usize..40), 0..80),
        raw_kg in prop::collection::vec((0u8..15, 0u8..3, 0u8..15), 0..30),
        n_c in 0usize..50,
        seed in any::<u64>(),
    ) {
        let edges: Vec<_> = raw_edges.into_iter().map(|(s, d)| (s % n, d % n)).collect();
        let g = graph(n, edges.clone(), 2);
        let kg = kg_of(&raw_kg);
        let cfg = MergeConfig::new(n_c, MergeMode::Dynamic, seed, 2);
        let aug = merge_kgs(&g, &[kg], &cfg, &mut epoch_rng(seed, 0)).unwrap();

        let concepts: BTreeSet<String> = raw_kg
            .iter()
            .flat_map(|&(h, _, t)| [format!("c{h}"), format!("c{t}")])
            .collect();
        let pairs: BTreeSet<(u8, u8)> = raw_kg.iter().map(|&(h, _, t)| (h, t)).collect();
        let c = concepts.len();
        prop_assert_eq!(aug.graph.num_nodes(), n + c);
        prop_assert_eq!(aug.kg_edges.len(), pairs.len());
        prop_assert_eq!(aug.conn_edges.len(), c * n_c.min(n));
        prop_assert_eq!(aug.graph.edges().len(), edges.len() + pairs.len() + c * n_c.min(n));
        prop_assert_eq!(aug.original_subgraph(), g.clone());
        for &(ci, z) in &aug.conn_edges {
            prop_assert!(ci >= n && z < n);
        }
        for ci in n..n + c {
            let anchors: Vec<_> = aug.conn_edges.iter().filter(|e| e.0 == ci).map(|e| e.1).collect();
            let distinct: BTreeSet<_> = anchors.iter().collect();
            prop_assert_eq!(distinct.len(), anchors.len());
        }
    }

    #[test]
    fn edge_count_monotone_in_n_c(n in 1usize..30, seed in any::<u64>(), a in 0usize..40, b in 0usize..40) {
        let (lo, hi) = (a.min(b), a.max(b));
        let g = graph(n, vec![], 1);
        let kg = kg_of(&[(0, 0, 1), (1, 0, 2)]);
        let count = |n_c| {
            let cfg = MergeConfig::new(n_c, MergeMode::Dynamic, seed, 1);
            merge_kgs(&g, std::slice::from_ref(&kg), &cfg, &mut epoch_rng(seed, 0))
                .unwrap()
                .graph
                .edges()
                .len()
        };
        prop_assert!(count(lo) <= count(hi));
    }

    #[test]
    fn same_seed_same_view(seed in any::<u64>(), epoch in 0u64..100) {
        let g = graph(30, vec![(0, 1)], 1);
        let kg = kg_of(&[(0, 0, 1), (2, 1, 3)]);
        let mut cfg = MergeConfig::new(4, MergeMode::Dynamic, seed, 1);
        cfg.anchor_sampling = AnchorSampling::PerConcept;
        let a = merge_kgs(&g, std::slice::from_ref(&kg), &cfg, &mut epoch_rng(seed, epoch)).unwrap();
        let b = merge_kgs(&g, std::slice::from_ref(&kg), &cfg, &mut epoch_rng(seed, epoch)).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn anchor_sampling_is_uniform() {
    let n = 1000;
    let draws = 10_000;
    let n_c = 3;
    let g = graph(n, vec![], 0);
    let mut counts = vec![0u32; n];
    let mut rng = epoch_rng(42, 0);
    for _ in 0..draws {
        for z in sample_anchor_nodes(&g, n_c, &mut rng) {
            counts[z] += 1;
        }
    }
    let p = n_c as f64 / n as f64;
    let mean = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    let within3 = counts
        .iter()
        .filter(|&&c| (c as f64 - mean).abs() <= 3.0 * sigma)
        .count();
    // about 99.7% of nodes expected inside the band
    assert!(
        within3 as f64 >= 0.99 * n as f64,
        "{within3}/{n} within 3 sigma"
    );
    assert!(counts
        .iter()
        .all(|&c| (c as f64 - mean).abs() <= 5.0 * sigma));
    // chi-square with n-1 dof: mean 999, sd ~44.7
    let chi2: f64 = counts
        .iter()
        .map(|&c| (c as f64 - mean).powi(2) / mean)
        .sum();
    assert!(
        (chi2 - 999.0).abs() < 4.0 * (2.0f64 * 999.0).sqrt(),
        "chi2 = {chi2}"
    );
}

#[test]
fn concept_features_have_variance_one_over_dim() {
    let dim = 64;
    let m = init_concept_features(10_000, dim, &mut epoch_rng(7, 0));
    let data = m.data();
    let mean = data.iter().sum::<f64>() / data.len() as f64;
    let var = data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / data.len() as f64;
    assert!(mean.abs() < 0.002, "mean {mean}");
    assert!((var * dim as f64 - 1.0).abs() < 0.01, "var {var}");
    let mean_sq_norm: f64 = (0..m.rows())
        .map(|i| m.row(i).iter().map(|x| x * x).sum::<f64>())
        .sum::<f64>()
        / m.rows() as f64;
    assert!((mean_sq_norm - 1.0).abs() < 0.01);
}
