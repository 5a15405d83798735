mod common;

use std::collections::HashSet;

use common::*;
use netcube::engine::CubeEngine;
use netcube::localize::{candidate_cells, localize_over, Candidate, LocalizeParams};

fn query_set(engine: &CubeEngine, q: &[String]) -> HashSet<usize> {
    q.iter().filter_map(|id| engine.network().node_index(id)).collect()
}

fn exact() -> LocalizeParams {
    LocalizeParams {
        rho: 1.0,
        level: 2,
        ..LocalizeParams::default()
    }
}

#[test]
fn greedy_matches_exhaustive_optimum() {
    let (ds, engine) = generated(&localizer_cube(21));
    let cands = candidate_cells(engine.lattice(), engine.allocation(), 2);
    assert!(cands.len() <= 10, "{} candidates", cands.len());
    let base_len = engine.network().node_count();
    let mut r = rng(2);
    for i in 0..20 {
        let q = spanning_query(&ds, &mut r);
        let res = localize_over(engine.network(), &cands, &q, &exact()).unwrap();
        let qs = query_set(&engine, &q);
        let chosen: Vec<&Candidate> = res.chosen.iter().map(|k| cands.iter().find(|c| &c.key == k).unwrap()).collect();
        let f = subset_objective(&qs, &chosen, base_len, exact().lambda);
        assert!((res.objective - f).abs() < 1e-12);
        let best = best_subset_objective(&qs, &cands, base_len, exact().lambda);
        assert_eq!(f, best, "query {i}: chose {:?}", res.chosen);
        for c in &cands {
            assert!(f >= subset_objective(&qs, &[c], base_len, exact().lambda));
        }
    }
}

#[test]
fn query_inside_one_leaf_cell_picks_that_cell() {
    let (_, engine) = generated(&localizer_cube(21));
    let cands = candidate_cells(engine.lattice(), engine.allocation(), 2);
    let c = engine.parse("topic=topic-2.1").unwrap();
    let members = &engine.cell(&c).members;
    let q: Vec<String> = members.iter().take(8).map(|&u| engine.network().node(u).id.clone()).collect();
    let res = localize_over(engine.network(), &cands, &q, &LocalizeParams { level: 2, ..Default::default() }).unwrap();
    assert_eq!(res.chosen, vec!["topic=topic-2.1".to_string()]);
    assert_eq!(res.coverage, 1.0);
}

#[test]
fn whole_network_with_no_penalty_is_fully_covered() {
    let (_, engine) = generated(&localizer_cube(21));
    let q: Vec<String> = engine.network().nodes().iter().map(|n| n.id.clone()).collect();
    let res = engine.localize(&q, &LocalizeParams { lambda: 0.0, rho: 1.0, level: 1 }).unwrap();
    assert_eq!(res.coverage, 1.0);
    assert_eq!(res.union_nodes.len(), engine.network().node_count());
}

#[test]
fn merged_network_is_edge_complete_and_steps_are_monotone() {
    let (ds, engine) = generated(&localizer_cube(8));
    let mut r = rng(4);
    for _ in 0..5 {
        let q = spanning_query(&ds, &mut r);
        let res = engine.localize(&q, &LocalizeParams { level: 2, ..Default::default() }).unwrap();
        let net = engine.network();
        let union: HashSet<usize> = res.union_nodes.iter().copied().collect();
        let want = net.edges().iter().filter(|e| union.contains(&e.src) && union.contains(&e.dst)).count();
        assert_eq!(res.merged.edge_count(), want);
        assert_eq!(res.merged.node_count(), union.len());
        for e in res.merged.edges() {
            let (a, b) = (&res.merged.node(e.src).id, &res.merged.node(e.dst).id);
            assert!(union.contains(&net.node_index(a).unwrap()) && union.contains(&net.node_index(b).unwrap()));
        }
        assert!(res.steps.windows(2).all(|w| w[1].coverage >= w[0].coverage && w[1].objective >= w[0].objective));
        assert!(res.steps.iter().all(|s| s.gain > 0.0));
        let again = engine.localize(&q, &LocalizeParams { level: 2, ..Default::default() }).unwrap();
        assert_eq!(res.chosen, again.chosen);
        assert_eq!(res.union_nodes, again.union_nodes);
    }
}

#[test]
fn unknown_ids_are_reported_and_ignored() {
    let (_, engine) = generated(&localizer_cube(21));
    let first = engine.network().node(0).id.clone();
    let res = engine.localize(&[first, "ghost".into()], &LocalizeParams::default()).unwrap();
    assert_eq!(res.unknown, vec!["ghost".to_string()]);
    assert_eq!(res.coverage, 1.0);
    assert!(engine.localize(&["ghost".into()], &LocalizeParams::default()).is_err());
}
