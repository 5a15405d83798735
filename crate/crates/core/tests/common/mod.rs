//! Independent reference implementations used by the integration tests.
//! Everything here is deliberately naive: dense matrices, full enumeration,
//! string-keyed maps.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;
use std::process::Command;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use netcube::allocator::PropagationParams;
use netcube::backtrack::{CellHit, NetworkQuery};
use netcube::cube::TaxonRecord;
use netcube::engine::{CubeEngine, EngineParams};
use netcube::generator::{generate, DimensionSpec, GeneratedDataset, GeneratorConfig};
use netcube::graph::{HeterogeneousNetwork, TypedEdge, TypedNode};
use netcube::localize::Candidate;
use netcube::Taxonomy;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn engine_for(ds: &GeneratedDataset, params: EngineParams) -> CubeEngine {
    let tax = ds
        .taxonomies
        .iter()
        .map(|(n, r)| Taxonomy::from_record(n, r).unwrap())
        .collect();
    CubeEngine::build(ds.network.clone(), tax, params).unwrap()
}

pub fn generated(cfg: &GeneratorConfig) -> (GeneratedDataset, CubeEngine) {
    let ds = generate(cfg).unwrap();
    let engine = engine_for(&ds, EngineParams::default());
    (ds, engine)
}

// ---------------------------------------------------------------- graphs

/// Erdős–Rényi pairs `u < v`.
pub fn random_pairs(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                out.push((u, v));
            }
        }
    }
    out
}

pub fn node_id(i: usize) -> String {
    format!("v{i:04}")
}

/// Untyped network over ids `v0000..`, so that index order equals id order.
pub fn plain_network(n: usize, pairs: &[(usize, usize)]) -> HeterogeneousNetwork {
    let nodes = (0..n)
        .map(|i| TypedNode {
            id: node_id(i),
            node_type: "x".into(),
            surface_name: String::new(),
            attrs: Default::default(),
        })
        .collect();
    let edges = pairs
        .iter()
        .map(|&(a, b)| TypedEdge {
            src: node_id(a),
            dst: node_id(b),
            edge_type: "e".into(),
            weight: 1.0,
        })
        .collect();
    HeterogeneousNetwork::from_parts(nodes, edges).unwrap()
}

fn adjacency_matrix(n: usize, pairs: &[(usize, usize)]) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in pairs {
        if u != v {
            a[u][v] = true;
            a[v][u] = true;
        }
    }
    a
}

pub fn triangles_by_triples(n: usize, pairs: &[(usize, usize)]) -> u64 {
    let a = adjacency_matrix(n, pairs);
    let mut t = 0;
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                if a[i][j] && a[j][k] && a[i][k] {
                    t += 1;
                }
            }
        }
    }
    t
}

/// Mean pairwise distance over the largest component (ties: the component
/// holding the smallest index), by Floyd–Warshall.
pub fn floyd_warshall_cpl(n: usize, pairs: &[(usize, usize)]) -> Option<f64> {
    const INF: u64 = u64::MAX / 4;
    let a = adjacency_matrix(n, pairs);
    let mut d = vec![vec![INF; n]; n];
    for i in 0..n {
        d[i][i] = 0;
        for j in 0..n {
            if a[i][j] {
                d[i][j] = 1;
            }
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if d[i][k] + d[k][j] < d[i][j] {
                    d[i][j] = d[i][k] + d[k][j];
                }
            }
        }
    }
    let mut best: Vec<usize> = Vec::new();
    for i in 0..n {
        let comp: Vec<usize> = (0..n).filter(|&j| d[i][j] < INF).collect();
        if comp.len() > best.len() {
            best = comp;
        }
    }
    if best.len() < 2 {
        return None;
    }
    let (mut sum, mut count) = (0u64, 0u64);
    for (x, &i) in best.iter().enumerate() {
        for &j in &best[x + 1..] {
            sum += d[i][j];
            count += 1;
        }
    }
    Some(sum as f64 / count as f64)
}

// ---------------------------------------------------------------- backtrack

/// Scores every non-empty coordinate by direct set intersection and sorts.
pub fn exhaustive_topk(engine: &CubeEngine, q: &NetworkQuery, k: usize, gamma: f64) -> Vec<CellHit> {
    let lattice = engine.lattice();
    let alloc = engine.allocation();
    let net = engine.network();
    let mut linked: HashSet<(String, String)> = HashSet::new();
    for e in net.edges() {
        let t = net.typed_edge(e);
        linked.insert((t.src.clone(), t.dst.clone()));
        linked.insert((t.dst, t.src));
    }
    let size = (q.nodes.len() + q.edges.len()) as f64;
    let mut hits = Vec::new();
    for c in lattice.all_coordinates() {
        let members: HashSet<&str> = (0..net.node_count())
            .filter(|&u| {
                c.0.iter().enumerate().all(|(d, &v)| {
                    let tax = lattice.dimension(d);
                    let mut x = alloc.dims[d].values[u];
                    loop {
                        if x == v {
                            return true;
                        }
                        match tax.value(x).parent {
                            Some(p) => x = p,
                            None => return false,
                        }
                    }
                })
            })
            .map(|u| net.node(u).id.as_str())
            .collect();
        if members.is_empty() {
            continue;
        }
        let nodes_in = q.nodes.iter().filter(|n| members.contains(n.as_str())).count();
        let edges_in = q
            .edges
            .iter()
            .filter(|(a, b)| {
                members.contains(a.as_str()) && members.contains(b.as_str()) && linked.contains(&(a.clone(), b.clone()))
            })
            .count();
        let coverage = (nodes_in + edges_in) as f64 / size;
        let precision = nodes_in as f64 / members.len() as f64;
        hits.push(CellHit {
            coordinate: lattice.canonical_string(&c),
            score: coverage * precision.powf(gamma),
            coverage,
            precision,
            member_count: members.len(),
        });
    }
    hits.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then_with(|| a.coordinate.cmp(&b.coordinate)));
    hits.truncate(k);
    hits
}

// ---------------------------------------------------------------- miner

/// A small labeled pattern: node labels and `(u, v, label)` edges.
#[derive(Debug, Clone)]
pub struct Pat {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize, String)>,
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Lexicographically smallest relabeled listing over all node permutations.
pub fn brute_canon(labels: &[String], edges: &[(usize, usize, String)]) -> String {
    let mut best: Option<String> = None;
    for perm in permutations(labels.len()) {
        let mut lab = vec![String::new(); labels.len()];
        for (i, &p) in perm.iter().enumerate() {
            lab[p] = labels[i].clone();
        }
        let mut es: Vec<(usize, usize, String)> = edges
            .iter()
            .map(|(a, b, l)| {
                let (x, y) = (perm[*a], perm[*b]);
                (x.min(y), x.max(y), l.clone())
            })
            .collect();
        es.sort();
        let s = format!("{lab:?}{es:?}");
        if best.as_ref().is_none_or(|b| s < *b) {
            best = Some(s);
        }
    }
    best.unwrap()
}

pub struct BruteGraph {
    pub labels: Vec<String>,
    pub edges: Vec<(usize, usize, String)>,
    label_of: HashMap<(usize, usize), String>,
}

impl BruteGraph {
    pub fn new(labels: Vec<String>, edges: Vec<(usize, usize, String)>) -> Self {
        let mut label_of = HashMap::new();
        for (a, b, l) in &edges {
            label_of.insert((*a, *b), l.clone());
            label_of.insert((*b, *a), l.clone());
        }
        Self { labels, edges, label_of }
    }

    /// Minimum node image over every injective, label-preserving embedding.
    pub fn mni(&self, p: &Pat) -> usize {
        let k = p.labels.len();
        let mut images: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
        let mut map = vec![usize::MAX; k];
        self.extend(p, 0, &mut map, &mut images);
        images.iter().map(|s| s.len()).min().unwrap_or(0)
    }

    fn extend(&self, p: &Pat, i: usize, map: &mut Vec<usize>, images: &mut [BTreeSet<usize>]) {
        if i == p.labels.len() {
            for (j, &g) in map.iter().enumerate() {
                images[j].insert(g);
            }
            return;
        }
        for g in 0..self.labels.len() {
            if self.labels[g] != p.labels[i] || map[..i].contains(&g) {
                continue;
            }
            let ok = p.edges.iter().all(|(a, b, l)| {
                let (a, b) = (*a, *b);
                let other = if a == i { b } else if b == i { a } else { return true };
                if other > i {
                    return true;
                }
                self.label_of.get(&(g, map[other])) == Some(l)
            });
            if ok {
                map[i] = g;
                self.extend(p, i + 1, map, images);
                map[i] = usize::MAX;
            }
        }
    }

    fn pattern_of(&self, edge_ids: &[usize]) -> Pat {
        let mut nodes: Vec<usize> = edge_ids
            .iter()
            .flat_map(|&e| [self.edges[e].0, self.edges[e].1])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        let pos = |u: usize| nodes.iter().position(|&x| x == u).unwrap();
        Pat {
            labels: nodes.iter().map(|&u| self.labels[u].clone()).collect(),
            edges: edge_ids
                .iter()
                .map(|&e| (pos(self.edges[e].0), pos(self.edges[e].1), self.edges[e].2.clone()))
                .collect(),
        }
    }

    /// Every connected pattern with at most `max_edges` edges that occurs in
    /// the graph, keyed by its brute-force canonical form, plus every
    /// single-node pattern.
    pub fn all_patterns(&self, max_edges: usize) -> BTreeMap<String, Pat> {
        let mut out = BTreeMap::new();
        for l in self.labels.iter().collect::<BTreeSet<_>>() {
            let p = Pat { labels: vec![l.clone()], edges: vec![] };
            out.insert(brute_canon(&p.labels, &p.edges), p);
        }
        let mut layer: BTreeSet<Vec<usize>> = (0..self.edges.len()).map(|e| vec![e]).collect();
        for _ in 0..max_edges {
            for set in &layer {
                let p = self.pattern_of(set);
                out.entry(brute_canon(&p.labels, &p.edges)).or_insert(p);
            }
            let mut next = BTreeSet::new();
            for set in &layer {
                let touched: BTreeSet<usize> = set.iter().flat_map(|&e| [self.edges[e].0, self.edges[e].1]).collect();
                for e in 0..self.edges.len() {
                    let (a, b, _) = &self.edges[e];
                    if !set.contains(&e) && (touched.contains(a) || touched.contains(b)) {
                        let mut s = set.clone();
                        s.push(e);
                        s.sort_unstable();
                        next.insert(s);
                    }
                }
            }
            layer = next;
        }
        out
    }
}

/// Connected patterns obtained by deleting one edge (and a node it leaves
/// isolated).
pub fn brute_removals(p: &Pat) -> Vec<Pat> {
    if p.edges.len() == 1 {
        let (a, b, _) = &p.edges[0];
        return [*a, *b]
            .iter()
            .map(|&u| Pat { labels: vec![p.labels[u].clone()], edges: vec![] })
            .collect();
    }
    let mut out = Vec::new();
    for skip in 0..p.edges.len() {
        let rest: Vec<(usize, usize, String)> =
            p.edges.iter().enumerate().filter(|(i, _)| *i != skip).map(|(_, e)| e.clone()).collect();
        let used: BTreeSet<usize> = rest.iter().flat_map(|(a, b, _)| [*a, *b]).collect();
        let keep: Vec<usize> = (0..p.labels.len()).filter(|u| used.contains(u)).collect();
        if keep.len() + 1 < p.labels.len() {
            continue;
        }
        let pos = |u: usize| keep.iter().position(|&x| x == u).unwrap();
        let q = Pat {
            labels: keep.iter().map(|&u| p.labels[u].clone()).collect(),
            edges: rest.iter().map(|(a, b, l)| (pos(*a), pos(*b), l.clone())).collect(),
        };
        if connected(&q) {
            out.push(q);
        }
    }
    out
}

fn connected(p: &Pat) -> bool {
    let n = p.labels.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for (a, b, _) in &p.edges {
            for (x, y) in [(*a, *b), (*b, *a)] {
                if x == u && !seen[y] {
                    seen[y] = true;
                    stack.push(y);
                }
            }
        }
    }
    seen.iter().all(|&s| s)
}

/// Closed frequent patterns with at most `max_edges` edges, canonical form to
/// support. Closedness looks at extensions one edge beyond `max_edges`.
pub fn brute_closed(g: &BruteGraph, min_support: usize, max_edges: usize) -> BTreeMap<String, usize> {
    let all = g.all_patterns(max_edges + 1);
    let support: BTreeMap<&String, usize> = all.iter().map(|(k, p)| (k, g.mni(p))).collect();
    let mut closed: BTreeMap<String, usize> = BTreeMap::new();
    for (k, p) in &all {
        if p.edges.len() <= max_edges && support[k] >= min_support {
            closed.insert(k.clone(), support[k]);
        }
    }
    for (k, p) in &all {
        for q in brute_removals(p) {
            let qk = brute_canon(&q.labels, &q.edges);
            if closed.get(&qk) == Some(&support[k]) {
                closed.remove(&qk);
            }
        }
    }
    closed
}

// ---------------------------------------------------------------- localizer

pub fn subset_objective(q: &HashSet<usize>, chosen: &[&Candidate], base_len: usize, lambda: f64) -> f64 {
    let union: HashSet<usize> = chosen.iter().flat_map(|c| c.members.iter().copied()).collect();
    let hits = union.iter().filter(|u| q.contains(u)).count();
    hits as f64 / q.len() as f64 - lambda * union.len() as f64 / base_len as f64
}

/// Maximum of the objective over every subset of the candidates.
pub fn best_subset_objective(q: &HashSet<usize>, candidates: &[Candidate], base_len: usize, lambda: f64) -> f64 {
    assert!(candidates.len() <= 16);
    (0u32..1 << candidates.len())
        .map(|mask| {
            let chosen: Vec<&Candidate> =
                candidates.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, c)| c).collect();
            subset_objective(q, &chosen, base_len, lambda)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

// ---------------------------------------------------------------- allocation

struct Tree {
    ids: Vec<String>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
}

impl Tree {
    fn new(root: &TaxonRecord) -> Self {
        let mut t = Tree { ids: vec![], parent: vec![], children: vec![] };
        t.add(root, None);
        t
    }

    fn add(&mut self, r: &TaxonRecord, parent: Option<usize>) -> usize {
        let i = self.ids.len();
        self.ids.push(r.id.clone());
        self.parent.push(parent);
        self.children.push(vec![]);
        for c in &r.children {
            let j = self.add(c, Some(i));
            self.children[i].push(j);
        }
        i
    }

    fn depth(&self, mut v: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.parent[v] {
            v = p;
            d += 1;
        }
        d
    }

    fn leaf_ids(&self, v: usize) -> Vec<String> {
        if self.children[v].is_empty() {
            return vec![self.ids[v].clone()];
        }
        self.children[v].iter().flat_map(|&c| self.leaf_ids(c)).collect()
    }
}

/// Seeded clamped propagation written from the update rule alone: seeds come
/// from the generator's ground truth, scores live in id-keyed maps.
/// Returns, per dimension, node id to assigned value id.
pub fn scripted_allocation(ds: &GeneratedDataset, params: &PropagationParams) -> Vec<BTreeMap<String, String>> {
    let net = &ds.network;
    let ids: Vec<String> = net.nodes().iter().map(|n| n.id.clone()).collect();
    let mut weight: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for e in net.edges() {
        let t = net.typed_edge(e);
        if t.src == t.dst {
            continue;
        }
        *weight.entry(t.src.clone()).or_default().entry(t.dst.clone()).or_insert(0.0) += t.weight;
        *weight.entry(t.dst.clone()).or_default().entry(t.src.clone()).or_insert(0.0) += t.weight;
    }
    let truth: HashMap<&str, _> = ds.truth.nodes.iter().map(|n| (n.id.as_str(), n)).collect();

    let mut out = Vec::new();
    for (d, (dim, root)) in ds.taxonomies.iter().enumerate() {
        let tree = Tree::new(root);
        let leaves = tree.leaf_ids(0);
        let mut seed: HashMap<&str, BTreeMap<String, f64>> = HashMap::new();
        for id in &ids {
            let t = truth[id.as_str()];
            if t.seeded.contains(dim) {
                seed.insert(id, BTreeMap::from([(t.cell[d].clone(), 1.0)]));
            }
        }
        let zero: BTreeMap<String, f64> = leaves.iter().map(|l| (l.clone(), 0.0)).collect();
        let mut s: HashMap<&str, BTreeMap<String, f64>> = ids
            .iter()
            .map(|id| {
                let mut row = zero.clone();
                if let Some(sd) = seed.get(id.as_str()) {
                    row.extend(sd.clone());
                }
                (id.as_str(), row)
            })
            .collect();
        for _ in 0..params.iters {
            let mut next = HashMap::new();
            for id in &ids {
                if let Some(sd) = seed.get(id.as_str()) {
                    let mut row = zero.clone();
                    row.extend(sd.clone());
                    next.insert(id.as_str(), row);
                    continue;
                }
                let mut row = zero.clone();
                let nbrs = weight.get(id);
                let total: f64 = nbrs.map(|m| m.values().sum()).unwrap_or(0.0);
                if total > 0.0 {
                    let mut acc = zero.clone();
                    for (v, w) in nbrs.unwrap() {
                        for (l, x) in &s[v.as_str()] {
                            *acc.get_mut(l).unwrap() += w * x;
                        }
                    }
                    for (l, x) in acc {
                        row.insert(l, params.alpha * (1.0 / total) * x);
                    }
                }
                next.insert(id.as_str(), row);
            }
            s = next;
        }

        let mut assigned = BTreeMap::new();
        for id in &ids {
            let value = if let Some(sd) = seed.get(id.as_str()) {
                sd.keys().next().unwrap().clone()
            } else {
                resolve(&tree, &s[id.as_str()], params.tau)
            };
            assigned.insert(id.clone(), value);
        }
        out.push(assigned);
    }
    out
}

fn resolve(tree: &Tree, row: &BTreeMap<String, f64>, tau: f64) -> String {
    let total: f64 = row.values().sum();
    if total <= 0.0 {
        return tree.ids[0].clone();
    }
    let (best_leaf, best) = row
        .iter()
        .fold(None::<(&String, f64)>, |acc, (l, &x)| match acc {
            Some((bl, bx)) if bx > x || (bx == x && bl <= l) => Some((bl, bx)),
            _ => Some((l, x)),
        })
        .unwrap();
    if best / total >= tau {
        return best_leaf.clone();
    }
    let mut pick: Option<(usize, usize, f64)> = None;
    for v in 1..tree.ids.len() {
        if tree.children[v].is_empty() {
            continue;
        }
        let mass: f64 = tree.leaf_ids(v).iter().map(|l| row[l]).sum();
        if mass / total < tau {
            continue;
        }
        let depth = tree.depth(v);
        let better = match pick {
            None => true,
            Some((p, pd, pm)) => depth > pd || (depth == pd && (mass > pm || (mass == pm && tree.ids[v] < tree.ids[p]))),
        };
        if better {
            pick = Some((v, depth, mass));
        }
    }
    pick.map_or(tree.ids[0].clone(), |(v, _, _)| tree.ids[v].clone())
}

// ---------------------------------------------------------------- fixtures

/// Three dimensions, 13 × 7 × 3 = 273 coordinates.
pub fn three_dim_cube() -> GeneratorConfig {
    let dim = |name: &str, branching: Vec<usize>, ordered| DimensionSpec {
        name: name.into(),
        branching,
        ordered,
        drift: None,
    };
    GeneratorConfig {
        seed: 3,
        dimensions: vec![dim("topic", vec![3, 3], false), dim("year", vec![6], true), dim("venue", vec![2], false)],
        nodes_per_leaf_cell: 10,
        p_intra: 0.3,
        p_inter: 0.003,
        seeds_per_leaf: 5,
        motifs: vec![],
        ..GeneratorConfig::default()
    }
}

pub fn random_query(engine: &CubeEngine, r: &mut ChaCha8Rng) -> NetworkQuery {
    let net = engine.network();
    let start = r.gen_range(0..net.node_count());
    let mut nodes = vec![start];
    let want = r.gen_range(1..=6);
    while nodes.len() < want {
        let from = *nodes.choose(r).unwrap();
        let next = if r.gen_bool(0.7) && !net.neighbors(from).is_empty() {
            *net.neighbors(from).choose(r).unwrap()
        } else {
            r.gen_range(0..net.node_count())
        };
        if !nodes.contains(&next) {
            nodes.push(next);
        }
    }
    let mut edges = Vec::new();
    for (i, &a) in nodes.iter().enumerate() {
        for &b in &nodes[i + 1..] {
            // some real edges, some pairs that are not edges at all
            if r.gen_bool(0.5) {
                edges.push((net.node(a).id.clone(), net.node(b).id.clone()));
            }
        }
    }
    let ids = nodes.iter().map(|&u| net.node(u).id.clone()).collect();
    NetworkQuery::new(ids, edges).unwrap()
}

pub const NODE_LABELS: [&str; 3] = ["A", "B", "C"];
pub const EDGE_LABELS: [&str; 2] = ["x", "y"];

pub fn random_labeled(r: &mut ChaCha8Rng) -> (Vec<String>, Vec<(usize, usize, String)>) {
    let n = r.gen_range(8..=12);
    let p = r.gen_range(0.2..0.4);
    let labels = (0..n).map(|_| NODE_LABELS[r.gen_range(0..3)].to_string()).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if r.gen_bool(p) {
                edges.push((u, v, EDGE_LABELS[r.gen_range(0..2)].to_string()));
            }
        }
    }
    (labels, edges)
}

pub fn twelve_node_graph(seed: u64) -> (Vec<String>, Vec<(usize, usize, String)>) {
    let mut r = rng(seed);
    let labels: Vec<String> = (0..12).map(|_| NODE_LABELS[r.gen_range(0..3)].to_string()).collect();
    let mut edges = Vec::new();
    for u in 0..12 {
        for v in u + 1..12 {
            if r.gen_bool(0.3) {
                edges.push((u, v, EDGE_LABELS[r.gen_range(0..2)].to_string()));
            }
        }
    }
    (labels, edges)
}

/// One dimension, three branches of two leaves: at most ten candidates at level 2.
pub fn localizer_cube(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        dimensions: vec![DimensionSpec {
            name: "topic".into(),
            branching: vec![3, 2],
            ordered: false,
            drift: None,
        }],
        nodes_per_leaf_cell: 30,
        seeds_per_leaf: 5,
        motifs: vec![],
        ..GeneratorConfig::default()
    }
}

/// 20 nodes drawn from three distinct planted leaf cells.
pub fn spanning_query(ds: &GeneratedDataset, r: &mut rand_chacha::ChaCha8Rng) -> Vec<String> {
    let cells: BTreeSet<&Vec<String>> = ds.truth.nodes.iter().map(|n| &n.cell).collect();
    let mut cells: Vec<_> = cells.into_iter().collect();
    cells.shuffle(r);
    let picked = &cells[..3];
    let mut pool: Vec<&str> = ds.truth.nodes.iter().filter(|n| picked.contains(&&n.cell)).map(|n| n.id.as_str()).collect();
    pool.shuffle(r);
    // every picked cell contributes at least one node
    let mut q: Vec<String> = picked
        .iter()
        .map(|c| ds.truth.nodes.iter().find(|n| &&n.cell == c).unwrap().id.clone())
        .collect();
    for id in pool {
        if q.len() == 20 {
            break;
        }
        if !q.iter().any(|x| x == id) {
            q.push(id.to_string());
        }
    }
    q
}

// ---------------------------------------------------------------- service

/// The same logical request for the CLI and for HTTP, covering every
/// endpoint: (CLI args, method, uri, JSON body).
pub fn requests(engine: &CubeEngine) -> Vec<(Vec<String>, &'static str, String, Option<Value>)> {
    let net = engine.network();
    let a = net.node(0).id.clone();
    let b = net.node(1).id.clone();
    let nbr = net.node(net.neighbors(0)[0]).id.clone();
    let s = |x: &str| x.to_string();
    vec![
        (vec![s("dimensions")], "GET", s("/dimensions"), None),
        (vec![s("summarize"), s("--cell"), s("*")], "GET", s("/cells/*/summary"), None),
        (
            vec![s("summarize"), s("--cell"), s("topic=topic-1.1,year=year-1")],
            "GET",
            s("/cells/topic=topic-1.1,year=year-1/summary"),
            None,
        ),
        (
            vec![s("contrast"), s("--fixed"), s("topic=topic-1"), s("--dim"), s("year"), s("--level"), s("1")],
            "GET",
            s("/contrast?fixed=topic%3Dtopic-1&dim=year&level=1"),
            None,
        ),
        (
            vec![s("rollup"), s("--dim"), s("topic"), s("--level"), s("1")],
            "GET",
            s("/rollup?dim=topic&level=1"),
            None,
        ),
        (
            vec![s("rollup"), s("--cell"), s("year=year-2"), s("--dim"), s("topic"), s("--level"), s("2")],
            "GET",
            s("/rollup?cell=year%3Dyear-2&dim=topic&level=2"),
            None,
        ),
        (
            vec![s("drilldown"), s("--dim"), s("topic"), s("--level"), s("1"), s("--super-node"), s("topic-2")],
            "GET",
            s("/drilldown?dim=topic&level=1&superNode=topic-2"),
            None,
        ),
        (
            vec![s("backtrack"), s("--nodes"), format!("{a},{nbr}"), s("--edges"), format!("{a}:{nbr}"), s("--k"), s("4")],
            "POST",
            s("/backtrack"),
            Some(json!({"nodes": [a, nbr], "edges": [[a, nbr]], "k": 4})),
        ),
        (
            vec![s("mine"), s("--cell"), s("topic=topic-1.1,year=year-1"), s("--min-support"), s("3"), s("--max-edges"), s("2"), s("--weights"), s("1,1,0.5")],
            "GET",
            s("/cells/topic=topic-1.1,year=year-1/patterns?minSupport=3&maxEdges=2&weights=1%2C1%2C0.5"),
            None,
        ),
        (
            vec![s("localize"), s("--nodes"), format!("{a},{b}"), s("--lambda"), s("0.3")],
            "POST",
            s("/localize"),
            Some(json!({"nodes": [a, b], "lambda": 0.3})),
        ),
        (vec![s("embed"), s("--cell"), s("topic=topic-1")], "GET", s("/cells/topic=topic-1/embedding"), None),
        (
            vec![s("embed"), s("--cell"), s("topic=topic-1.2"), s("--vectors")],
            "GET",
            s("/cells/topic=topic-1.2/embedding?vectors=true"),
            None,
        ),
        (
            vec![s("prox"), s("--node"), a.clone(), s("--topk"), s("5")],
            "GET",
            format!("/cells/*/prox?node={a}&k=5"),
            None,
        ),
        (
            vec![s("prox"), s("--node"), a.clone(), s("--other"), nbr.clone()],
            "GET",
            format!("/cells/*/prox?node={a}&other={nbr}"),
            None,
        ),
        // errors travel the same way
        (vec![s("summarize"), s("--cell"), s("topic=nope")], "GET", s("/cells/topic=nope/summary"), None),
        (
            vec![s("prox"), s("--node"), s("ghost"), s("--topk"), s("5")],
            "GET",
            s("/cells/*/prox?node=ghost&k=5"),
            None,
        ),
    ]
}

pub async fn http(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

pub fn cli(snapshot: &Path, args: &[String]) -> (bool, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_netcube"))
        .arg("--json")
        .arg("--snapshot")
        .arg(snapshot)
        .args(args)
        .output()
        .unwrap();
    let text = if out.status.success() { out.stdout } else { out.stderr };
    (out.status.success(), serde_json::from_slice(&text).unwrap_or(Value::Null))
}
