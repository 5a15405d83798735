//! Weakly-supervised allocation of nodes to taxonomy values.
//!
//! Seeds come from surface-name (or attribute) matches against taxonomy value
//! names and aliases. Each node then carries a score vector over the leaves of
//! the taxonomy, updated synchronously as
//!
//! ```text
//! s(t+1) = (1 - alpha) * seed_indicator + alpha * weighted_mean(neighbors' s(t))
//! ```
//!
//! with seeds clamped to their indicator. After the last round a node takes
//! its best leaf when that leaf holds at least `tau` of the node's total leaf
//! mass, else the deepest value whose subtree holds at least `tau` of it,
//! else the root.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{CubeLattice, Taxonomy};
use crate::graph::{HeterogeneousNetwork, UndirectedGraph};

#[derive(Debug, Error, PartialEq)]
pub enum AllocError {
    #[error("damping alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("iteration count must be positive")]
    ZeroIterations,
    #[error("threshold tau must lie in [0, 1], got {0}")]
    InvalidTau(f64),
    #[error("seed refers to node {0} outside the network")]
    InvalidSeed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub alpha: f64,
    pub iters: usize,
    pub tau: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            iters: 50,
            tau: 0.4,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), AllocError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AllocError::InvalidAlpha(self.alpha));
        }
        if self.iters == 0 {
            return Err(AllocError::ZeroIterations);
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(AllocError::InvalidTau(self.tau));
        }
        Ok(())
    }
}

/// Lower-cases and folds every run of non-alphanumeric characters to one space.
pub fn normalize_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            out.extend(ch.to_lowercase());
        } else {
            pending_space = true;
        }
    }
    out
}

/// Seeds found for one dimension.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeedMap {
    /// node index → taxonomy value index
    pub seeds: BTreeMap<usize, usize>,
    /// nodes whose matches fell on different branches
    pub ambiguous: Vec<usize>,
}

/// Seeds nodes whose normalized surface name or attribute for this dimension
/// equals a value's normalized name, id or alias. Matches on one ancestor chain
/// resolve to the deepest value; matches on different branches are dropped.
pub fn seed_by_surface_match(net: &HeterogeneousNetwork, tax: &Taxonomy) -> SeedMap {
    let mut lookup: HashMap<String, BTreeSet<usize>> = HashMap::new();
    for (v, val) in tax.values().iter().enumerate().skip(1) {
        let keys = std::iter::once(&val.name)
            .chain(std::iter::once(&val.id))
            .chain(val.aliases.iter());
        for key in keys {
            let k = normalize_surface(key);
            if !k.is_empty() {
                lookup.entry(k).or_default().insert(v);
            }
        }
    }

    let mut out = SeedMap::default();
    for (i, node) in net.nodes().iter().enumerate() {
        let mut matched = BTreeSet::new();
        let candidates = std::iter::once(node.surface_name.as_str())
            .chain(node.attrs.get(tax.dimension()).map(String::as_str));
        for text in candidates {
            let k = normalize_surface(text);
            if let Some(vals) = lookup.get(&k) {
                matched.extend(vals.iter().copied());
            }
        }
        if matched.is_empty() {
            continue;
        }
        // deepest value that lies below every other match
        let deepest = *matched
            .iter()
            .max_by_key(|&&v| (tax.value(v).depth, std::cmp::Reverse(v)))
            .unwrap();
        if matched.iter().all(|&v| tax.is_descendant_or_equal(deepest, v)) {
            out.seeds.insert(i, deepest);
        } else {
            log::debug!(
                "node `{}` matches values on different branches of `{}`; left unseeded",
                node.id,
                tax.dimension()
            );
            out.ambiguous.push(i);
        }
    }
    out
}

/// Allocation of every node in one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionAllocation {
    pub values: Vec<usize>,
    pub confidence: Vec<f64>,
    pub seeded: Vec<bool>,
}

impl DimensionAllocation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Row-major `n × leaves` score matrix after `params.iters` updates, and the
/// clamped (seeded) flags.
fn leaf_scores(graph: &UndirectedGraph, seeds: &SeedMap, tax: &Taxonomy, params: &PropagationParams) -> (Vec<f64>, Vec<bool>) {
    let n = graph.node_count();
    let leaves = tax.leaves();
    let width = leaves.len();
    let mut leaf_slot = vec![usize::MAX; tax.len()];
    for (slot, &leaf) in leaves.iter().enumerate() {
        leaf_slot[leaf] = slot;
    }

    let mut indicator = vec![0.0; n * width];
    let mut clamped = vec![false; n];
    for (&node, &value) in &seeds.seeds {
        let under = tax.leaves_under(value);
        let share = 1.0 / under.len() as f64;
        for leaf in under {
            indicator[node * width + leaf_slot[leaf]] = share;
        }
        clamped[node] = true;
    }

    let inv_degree: Vec<f64> = (0..n)
        .map(|u| {
            let d = graph.weighted_degree(u);
            if d > 0.0 { 1.0 / d } else { 0.0 }
        })
        .collect();

    let mut current = indicator.clone();
    let mut next = vec![0.0; n * width];
    if width > 0 {
        for _ in 0..params.iters {
            next.par_chunks_mut(width).enumerate().for_each(|(u, row)| {
                let seed_row = &indicator[u * width..(u + 1) * width];
                if clamped[u] {
                    row.copy_from_slice(seed_row);
                    return;
                }
                row.iter_mut().for_each(|x| *x = 0.0);
                for (&v, &w) in graph.neighbors(u).iter().zip(graph.neighbor_weights(u)) {
                    let nb = &current[v * width..(v + 1) * width];
                    for (r, &s) in row.iter_mut().zip(nb) {
                        *r += w * s;
                    }
                }
                let scale = params.alpha * inv_degree[u];
                for (r, &s) in row.iter_mut().zip(seed_row) {
                    *r = (1.0 - params.alpha) * s + scale * *r;
                }
            });
            std::mem::swap(&mut current, &mut next);
        }
    }
    (current, clamped)
}

/// Runs clamped label propagation over the undirected projection `graph`.
pub fn propagate_labels(
    graph: &UndirectedGraph,
    seeds: &SeedMap,
    tax: &Taxonomy,
    params: &PropagationParams,
) -> Result<DimensionAllocation, AllocError> {
    params.validate()?;
    let n = graph.node_count();
    if let Some((&bad, _)) = seeds.seeds.iter().find(|(&i, _)| i >= n) {
        return Err(AllocError::InvalidSeed(bad));
    }
    let leaves = tax.leaves();
    let (current, clamped) = leaf_scores(graph, seeds, tax, params);
    let width = leaves.len();

    let mut out = DimensionAllocation {
        values: vec![0; n],
        confidence: vec![0.0; n],
        seeded: clamped.clone(),
    };
    for u in 0..n {
        if let Some(&v) = seeds.seeds.get(&u) {
            out.values[u] = v;
            out.confidence[u] = 1.0;
            continue;
        }
        let row = &current[u * width..(u + 1) * width];
        let (value, conf) = resolve_scores(tax, &leaves, row, params.tau);
        out.values[u] = value;
        out.confidence[u] = conf;
    }
    Ok(out)
}

/// Chooses a value for a score vector over `leaves` (in taxonomy order).
/// Thresholds apply to shares of the node's total leaf mass; a node that
/// received no mass stays at the root with confidence 0.
fn resolve_scores(tax: &Taxonomy, leaves: &[usize], row: &[f64], tau: f64) -> (usize, f64) {
    let total: f64 = row.iter().sum();
    if total <= 0.0 {
        return (0, 0.0);
    }
    let mut best: Option<(usize, f64)> = None;
    for (&leaf, &s) in leaves.iter().zip(row) {
        best = match best {
            Some((b, bs)) if bs > s || (bs == s && tax.value(b).id <= tax.value(leaf).id) => {
                Some((b, bs))
            }
            _ => Some((leaf, s)),
        };
    }
    if let Some((leaf, s)) = best {
        let share = s / total;
        if share >= tau {
            return (leaf, share.min(1.0));
        }
    }

    // subtree mass per value, accumulated bottom-up (indices are preorder)
    let mut mass = vec![0.0; tax.len()];
    for (&leaf, &s) in leaves.iter().zip(row) {
        mass[leaf] = s;
    }
    for v in (1..tax.len()).rev() {
        let p = tax.value(v).parent.unwrap();
        mass[p] += mass[v];
    }
    let mut pick: Option<usize> = None;
    for v in 1..tax.len() {
        if tax.is_leaf(v) || mass[v] / total < tau {
            continue;
        }
        pick = match pick {
            None => Some(v),
            Some(p) => {
                let (dv, dp) = (tax.value(v).depth, tax.value(p).depth);
                let better = dv > dp
                    || (dv == dp
                        && (mass[v] > mass[p]
                            || (mass[v] == mass[p] && tax.value(v).id < tax.value(p).id)));
                Some(if better { v } else { p })
            }
        };
    }
    match pick {
        Some(v) => (v, (mass[v] / total).min(1.0)),
        None => (0, 0.0),
    }
}

/// Allocation of every node in every dimension of a lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub dims: Vec<DimensionAllocation>,
}

impl Allocation {
    pub fn node_count(&self) -> usize {
        self.dims.first().map_or(0, |d| d.len())
    }

    /// Allocated value index per dimension for `node`.
    pub fn profile(&self, node: usize) -> Vec<usize> {
        self.dims.iter().map(|d| d.values[node]).collect()
    }

    /// Writes `{"node","dim","value","confidence","seeded"}` lines.
    pub fn write_jsonl<W: Write>(
        &self,
        net: &HeterogeneousNetwork,
        lattice: &CubeLattice,
        mut out: W,
    ) -> std::io::Result<()> {
        #[derive(Serialize)]
        struct Line<'a> {
            node: &'a str,
            dim: &'a str,
            value: &'a str,
            confidence: f64,
            seeded: bool,
        }
        for (u, node) in net.nodes().iter().enumerate() {
            for (d, alloc) in self.dims.iter().enumerate() {
                let tax = lattice.dimension(d);
                let line = Line {
                    node: &node.id,
                    dim: tax.dimension(),
                    value: &tax.value(alloc.values[u]).id,
                    confidence: alloc.confidence[u],
                    seeded: alloc.seeded[u],
                };
                serde_json::to_writer(&mut out, &line)?;
                out.write_all(b"\n")?;
            }
        }
        Ok(())
    }
}

/// Seeds and propagates each dimension independently.
pub fn allocate(
    net: &HeterogeneousNetwork,
    lattice: &CubeLattice,
    params: &PropagationParams,
) -> Result<Allocation, AllocError> {
    params.validate()?;
    let graph = net.undirected_projection();
    let dims = lattice
        .dimensions()
        .iter()
        .map(|tax| {
            let seeds = seed_by_surface_match(net, tax);
            propagate_labels(&graph, &seeds, tax, params)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Allocation { dims })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{TypedEdge, TypedNode};

    fn tax() -> Taxonomy {
        Taxonomy::from_json(
            "topic",
            r#"{"id":"*","children":[
                {"id":"ML","name":"machine learning","children":[
                    {"id":"NN","aliases":["Neural Networks"]},
                    {"id":"SVM","name":"support vector machines"}]},
                {"id":"DB","name":"databases"}]}"#,
        )
        .unwrap()
    }

    fn node(id: &str, name: &str) -> TypedNode {
        TypedNode {
            id: id.into(),
            node_type: "t".into(),
            surface_name: name.into(),
            attrs: BTreeMap::new(),
        }
    }

    fn edge(s: &str, d: &str) -> TypedEdge {
        TypedEdge {
            src: s.into(),
            dst: d.into(),
            edge_type: "e".into(),
            weight: 1.0,
        }
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_surface("  Neural--Networks! "), "neural networks");
        assert_eq!(normalize_surface("..."), "");
    }

    #[test]
    fn seeding_examples() {
        let t = tax();
        let mut anon = node("c", "");
        anon.attrs.clear();
        let net = HeterogeneousNetwork::from_parts(
            vec![
                node("a", "neural networks"),
                node("b", "Machine-Learning"),
                anon,
                // matches NN via its name and DB via the attr: ambiguous
                {
                    let mut n = node("d", "NN");
                    n.attrs.insert("topic".into(), "databases".into());
                    n
                },
                // matches ML and NN: same chain, deepest wins
                {
                    let mut n = node("e", "NN");
                    n.attrs.insert("topic".into(), "ML".into());
                    n
                },
            ],
            vec![],
        )
        .unwrap();
        let s = seed_by_surface_match(&net, &t);
        assert_eq!(s.seeds.get(&0), Some(&t.find("NN").unwrap()));
        assert_eq!(s.seeds.get(&1), Some(&t.find("ML").unwrap()));
        assert_eq!(s.seeds.get(&2), None);
        assert_eq!(s.seeds.get(&3), None);
        assert_eq!(s.ambiguous, vec![3]);
        assert_eq!(s.seeds.get(&4), Some(&t.find("NN").unwrap()));
    }

    #[test]
    fn all_seeded_keeps_seeds() {
        let t = tax();
        let net = HeterogeneousNetwork::from_parts(
            vec![node("a", "neural networks"), node("b", "databases"), node("c", "ml")],
            vec![edge("a", "b"), edge("b", "c")],
        )
        .unwrap();
        let s = seed_by_surface_match(&net, &t);
        let a = propagate_labels(&net.undirected_projection(), &s, &t, &Default::default()).unwrap();
        for (u, &v) in &s.seeds {
            assert_eq!(a.values[*u], v);
            assert_eq!(a.confidence[*u], 1.0);
            assert!(a.seeded[*u]);
        }
    }

    #[test]
    fn symmetric_path_falls_back_to_common_ancestor() {
        let t = tax();
        let net = HeterogeneousNetwork::from_parts(
            vec![node("a", "neural networks"), node("b", "x"), node("c", "support vector machines")],
            vec![edge("a", "b"), edge("b", "c")],
        )
        .unwrap();
        let s = seed_by_surface_match(&net, &t);
        let params = PropagationParams {
            tau: 0.6,
            ..Default::default()
        };
        let a = propagate_labels(&net.undirected_projection(), &s, &t, &params).unwrap();
        assert_eq!(a.values[1], t.find("ML").unwrap());
        assert_eq!(a.confidence[1], 1.0);

        // with the default tau the exact tie resolves to the smaller id
        let a = propagate_labels(&net.undirected_projection(), &s, &t, &Default::default()).unwrap();
        assert_eq!(a.values[1], t.find("NN").unwrap());
    }

    #[test]
    fn unreachable_node_gets_root() {
        let t = tax();
        let net = HeterogeneousNetwork::from_parts(vec![node("a", "databases"), node("z", "x")], vec![])
            .unwrap();
        let s = seed_by_surface_match(&net, &t);
        let a = propagate_labels(&net.undirected_projection(), &s, &t, &Default::default()).unwrap();
        assert_eq!((a.values[1], a.confidence[1]), (0, 0.0));
    }

    #[test]
    fn parameter_errors() {
        let t = tax();
        let g = UndirectedGraph::from_pairs(0, std::iter::empty());
        let s = SeedMap::default();
        for alpha in [0.0, 1.0, -0.5] {
            let p = PropagationParams { alpha, ..Default::default() };
            assert_eq!(propagate_labels(&g, &s, &t, &p), Err(AllocError::InvalidAlpha(alpha)));
        }
        let p = PropagationParams { iters: 0, ..Default::default() };
        assert_eq!(propagate_labels(&g, &s, &t, &p), Err(AllocError::ZeroIterations));
    }

    #[test]
    fn empty_network_allocation() {
        let l = CubeLattice::new(vec![tax()]).unwrap();
        let a = allocate(&HeterogeneousNetwork::default(), &l, &Default::default()).unwrap();
        assert_eq!(a.node_count(), 0);
    }

    #[test]
    fn attrs_fully_specify() {
        let t = tax();
        let year = Taxonomy::from_json("year", r#"[{"id":"2017"},{"id":"2018"}]"#).unwrap();
        let l = CubeLattice::new(vec![t.clone(), year.clone()]).unwrap();
        let mut nodes = Vec::new();
        for (i, (topic, y)) in [("NN", "2017"), ("DB", "2018"), ("SVM", "2018")].iter().enumerate() {
            let mut n = node(&format!("n{i}"), "");
            n.attrs.insert("topic".into(), topic.to_string());
            n.attrs.insert("year".into(), y.to_string());
            nodes.push(n);
        }
        let net = HeterogeneousNetwork::from_parts(nodes, vec![edge("n0", "n1")]).unwrap();
        let a = allocate(&net, &l, &Default::default()).unwrap();
        for u in 0..3 {
            let n = net.node(u);
            assert_eq!(t.value(a.dims[0].values[u]).id, n.attrs["topic"]);
            assert_eq!(year.value(a.dims[1].values[u]).id, n.attrs["year"]);
            assert_eq!(a.dims[0].confidence[u], 1.0);
        }
    }

    mod mass {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scores_stay_nonnegative_with_mass_at_most_one(
                n in 2usize..30,
                pairs in proptest::collection::vec((0usize..30, 0usize..30, 0.1f64..3.0), 0..80),
                seeds in proptest::collection::btree_map(0usize..30, 1usize..7, 0..6),
                alpha in 0.05f64..0.99,
                iters in 0usize..25,
            ) {
                let tax = tax();
                let g = UndirectedGraph::from_pairs(
                    n,
                    pairs.into_iter().filter(|(u, v, _)| u < &n && v < &n && u != v),
                );
                let seeds = SeedMap {
                    seeds: seeds.into_iter().filter(|(u, _)| *u < n).map(|(u, v)| (u, v % tax.len())).collect(),
                    ambiguous: vec![],
                };
                let width = tax.leaves().len();
                for t in 0..=iters {
                    let params = PropagationParams { alpha, iters: t, tau: 0.4 };
                    let (scores, _) = leaf_scores(&g, &seeds, &tax, &params);
                    for row in scores.chunks(width) {
                        prop_assert!(row.iter().all(|&x| x >= 0.0));
                        prop_assert!(row.iter().sum::<f64>() <= 1.0 + 1e-12);
                    }
                }
            }
        }
    }
}
