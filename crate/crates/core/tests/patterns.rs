mod common;

use common::*;
use netcube::generator::GeneratorConfig;
use netcube::pattern::{
    mni_support, rank_patterns, score_pattern, LabeledGraph, MinerConfig, PatternGraph, PatternWeights, ScoredPattern,
};
use rand::Rng;

fn cfg() -> MinerConfig {
    MinerConfig {
        min_support: 2,
        max_edges: 3,
        ..MinerConfig::default()
    }
}

fn random_cell(seed: u64, n: usize) -> LabeledGraph {
    let mut r = rng(seed);
    let labels = (0..n).map(|_| ["author", "paper"][r.gen_range(0..2)].to_string()).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen_bool(0.15) {
                edges.push((u, v, ["writes", "cites"][r.gen_range(0..2)].to_string()));
            }
        }
    }
    LabeledGraph::from_parts(labels, edges)
}

fn codes(list: &[ScoredPattern]) -> Vec<String> {
    list.iter().map(|s| s.code.clone()).collect()
}

fn w(p: f64, i: f64, d: f64) -> PatternWeights {
    PatternWeights {
        popularity: p,
        integrity: i,
        distinctiveness: d,
    }
}

#[test]
fn integrity_is_in_unit_interval_and_combined_follows_the_product() {
    for seed in 0..5 {
        let cell = random_cell(seed, 14);
        let other = random_cell(seed + 100, 14);
        let ranked = rank_patterns(&cell, &[&cell, &other], &cfg(), &PatternWeights::default()).unwrap();
        assert!(!ranked.is_empty());
        for s in &ranked {
            assert!(s.integrity > 0.0 && s.integrity <= 1.0, "{}", s.integrity);
            assert!((0.0..=1.0).contains(&s.popularity));
            let d = s.distinctiveness.expect("pattern occurs in its own cell");
            assert_eq!(s.combined, s.popularity * s.integrity * d);
        }
    }
}

#[test]
fn identical_siblings_give_unit_distinctiveness() {
    for seed in 0..5 {
        let cell = random_cell(seed, 14);
        let twin = random_cell(seed, 14);
        let ranked = rank_patterns(&cell, &[&cell, &twin, &twin], &cfg(), &PatternWeights::default()).unwrap();
        for s in &ranked {
            assert_eq!(s.distinctiveness, Some(1.0));
        }
        let plain = rank_patterns(&cell, &[&cell], &cfg(), &w(1.0, 1.0, 0.0)).unwrap();
        assert_eq!(codes(&ranked), codes(&plain));
    }
}

#[test]
fn zero_distinctiveness_weight_ignores_siblings() {
    for seed in 0..5 {
        let cell = random_cell(seed, 14);
        let a = random_cell(seed + 10, 14);
        let b = random_cell(seed + 20, 9);
        let weights = w(1.0, 0.5, 0.0);
        let alone = rank_patterns(&cell, &[&cell], &cfg(), &weights).unwrap();
        let with = rank_patterns(&cell, &[&cell, &a, &b], &cfg(), &weights).unwrap();
        assert_eq!(codes(&alone), codes(&with));
        let scores = |l: &[ScoredPattern]| l.iter().map(|s| s.combined).collect::<Vec<_>>();
        assert_eq!(scores(&alone), scores(&with));
    }
}

#[test]
fn uniform_weight_scaling_preserves_order() {
    for seed in 0..5 {
        let cell = random_cell(seed, 14);
        let other = random_cell(seed + 50, 14);
        let sibs = [&cell, &other];
        let base = rank_patterns(&cell, &sibs, &cfg(), &w(1.0, 0.7, 0.4)).unwrap();
        for k in [0.5, 2.0, 3.0] {
            let scaled = rank_patterns(&cell, &sibs, &cfg(), &w(k, 0.7 * k, 0.4 * k)).unwrap();
            assert_eq!(codes(&base), codes(&scaled), "scale {k}");
        }
    }
}

#[test]
fn clique_pattern_has_full_popularity() {
    let n = 5;
    let labels = vec!["author".to_string(); n];
    let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v, "co".to_string()))).collect();
    let cell = LabeledGraph::from_parts(labels, edges);
    let ranked = rank_patterns(&cell, &[&cell], &cfg(), &PatternWeights::default()).unwrap();
    for s in &ranked {
        assert_eq!(s.popularity, 1.0);
        assert_eq!(s.integrity, 1.0);
        assert_eq!(s.distinctiveness, Some(1.0));
    }
}

#[test]
fn planted_motif_is_four_times_as_distinctive() {
    let (ds, engine) = generated(&GeneratorConfig::default());
    let spec = &ds.config.motifs[0];
    let c = engine.parse("topic=topic-1.1,year=year-1").unwrap();
    let sibs = engine.sibling_coordinates(&c, None).unwrap();
    assert_eq!(sibs.len(), 4);
    let cell = LabeledGraph::from_network(&engine.cell(&c).subnetwork);
    let graphs: Vec<LabeledGraph> = sibs.iter().map(|s| LabeledGraph::from_network(&engine.cell(s).subnetwork)).collect();
    let refs: Vec<&LabeledGraph> = graphs.iter().collect();
    let triangle = PatternGraph::canonical(
        spec.node_types.clone(),
        spec.edges.iter().map(|&(a, b)| (a, b, spec.edge_type.clone())).collect(),
    )
    .unwrap();
    let support = mni_support(&triangle, &cell, 1_000_000).unwrap();
    assert!(support >= 2);
    let scored = score_pattern(&triangle, support, &cell, &refs, &PatternWeights::default(), 1_000_000).unwrap();

    // direct evaluation: rate in each sibling, mean, ratio
    let rates: Vec<f64> = graphs
        .iter()
        .map(|g| mni_support(&triangle, g, 1_000_000).unwrap() as f64 / g.node_count() as f64)
        .collect();
    let own = support as f64 / cell.node_count() as f64;
    assert_eq!(rates.iter().filter(|&&r| r == 0.0).count(), 3);
    let expected = own / (rates.iter().sum::<f64>() / rates.len() as f64);
    assert!((scored.distinctiveness.unwrap() - expected).abs() < 1e-12);
    assert!((scored.distinctiveness.unwrap() - 4.0).abs() < 1e-12);
}
