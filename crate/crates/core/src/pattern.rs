//! Closed frequent subgraph mining inside a single cell network.
//!
//! Patterns are connected, node-labeled (by node type) and edge-labeled (by
//! edge type) undirected graphs, identified by their minimum DFS code. Support
//! is the minimum-node-image (MNI) count, which is anti-monotone and allows
//! gSpan-style pruning. A frequent pattern is kept when no one-edge extension
//! has equal support.
//!
//! Each mined pattern is then scored against its cell and the sibling cells:
//!
//! - popularity: `supp / |V_cell|`
//! - integrity: `supp / max supp(q)` over connected one-edge-removed sub-patterns `q`
//! - distinctiveness: `rate(cell) / mean rate(siblings)`, with `rate = supp / |V|`
//!
//! combined as `popularity^w_p * integrity^w_i * distinctiveness^w_d`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::HeterogeneousNetwork;

pub const DEFAULT_MAX_EDGES: usize = 6;
pub const DEFAULT_MAX_EMBEDDINGS: usize = 2_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum MinerError {
    #[error("cell network is empty")]
    EmptyCell,
    #[error("min_support must be at least 1")]
    ZeroSupport,
    #[error("embedding enumeration exceeded {0} embeddings; lower max_edges or raise the limit")]
    EmbeddingOverflow(usize),
    #[error("pattern is not connected")]
    Disconnected,
    #[error("pattern edge references vertex {0} outside the pattern")]
    BadVertex(usize),
    #[error("weights must be finite and non-negative")]
    InvalidWeights,
}

/// Node- and edge-labeled simple undirected graph used as mining host.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    node_label_names: Vec<String>,
    edge_label_names: Vec<String>,
    labels: Vec<u32>,
    adj: Vec<Vec<(usize, u32)>>,
}

fn intern(names: impl IntoIterator<Item = String>) -> (Vec<String>, HashMap<String, u32>) {
    let sorted: Vec<String> = names.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    let index = sorted
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i as u32))
        .collect();
    (sorted, index)
}

impl LabeledGraph {
    /// Builds from labels and `(u, v, label)` edges. Self-loops are dropped;
    /// several labels on one node pair are joined as `a|b`.
    pub fn from_parts(labels: Vec<String>, edges: Vec<(usize, usize, String)>) -> Self {
        let mut pair_labels: BTreeMap<(usize, usize), BTreeSet<String>> = BTreeMap::new();
        for (u, v, l) in edges {
            if u == v {
                continue;
            }
            let key = if u < v { (u, v) } else { (v, u) };
            pair_labels.entry(key).or_default().insert(l);
        }
        let joined: Vec<((usize, usize), String)> = pair_labels
            .into_iter()
            .map(|(k, set)| (k, set.into_iter().collect::<Vec<_>>().join("|")))
            .collect();
        let (node_label_names, node_index) = intern(labels.iter().cloned());
        let (edge_label_names, edge_index) = intern(joined.iter().map(|(_, l)| l.clone()));
        let mut adj = vec![Vec::new(); labels.len()];
        for ((u, v), l) in &joined {
            let id = edge_index[l];
            adj[*u].push((*v, id));
            adj[*v].push((*u, id));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Self {
            labels: labels.iter().map(|l| node_index[l]).collect(),
            node_label_names,
            edge_label_names,
            adj,
        }
    }

    pub fn from_network(net: &HeterogeneousNetwork) -> Self {
        let labels = net.nodes().iter().map(|n| n.node_type.clone()).collect();
        let edges = net
            .edges()
            .iter()
            .map(|e| (e.src, e.dst, net.edge_type_name(e).to_string()))
            .collect();
        Self::from_parts(labels, edges)
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn node_label(&self, u: usize) -> &str {
        &self.node_label_names[self.labels[u] as usize]
    }

    pub fn edge_label_name(&self, id: u32) -> &str {
        &self.edge_label_names[id as usize]
    }

    /// `(neighbor, edge label)` sorted by neighbor.
    pub fn neighbors(&self, u: usize) -> &[(usize, u32)] {
        &self.adj[u]
    }

    pub fn edge_label(&self, u: usize, v: usize) -> Option<u32> {
        self.adj[u]
            .binary_search_by(|&(x, _)| x.cmp(&v))
            .ok()
            .map(|i| self.adj[u][i].1)
    }

    fn node_label_id(&self, name: &str) -> Option<u32> {
        self.node_label_names
            .binary_search_by(|x| x.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    fn edge_label_id(&self, name: &str) -> Option<u32> {
        self.edge_label_names
            .binary_search_by(|x| x.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }
}

/// One edge of a DFS code. `from < to` marks a forward edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DfsEdge<L> {
    pub from: usize,
    pub to: usize,
    pub from_label: L,
    pub edge_label: L,
    pub to_label: L,
}

impl<L> DfsEdge<L> {
    fn is_forward(&self) -> bool {
        self.from < self.to
    }
}

/// DFS-code order between two rightmost extensions of the same code prefix:
/// backward before forward; backward by target then label; forward from the
/// deepest rightmost-path vertex first, then by edge and target label.
fn extension_cmp<L: Ord>(a: &DfsEdge<L>, b: &DfsEdge<L>) -> Ordering {
    match (a.is_forward(), b.is_forward()) {
        (false, false) => a.to.cmp(&b.to).then_with(|| a.edge_label.cmp(&b.edge_label)),
        (false, true) => Ordering::Less,
        (true, false) => Ordering::Greater,
        (true, true) => b
            .from
            .cmp(&a.from)
            .then_with(|| a.edge_label.cmp(&b.edge_label))
            .then_with(|| a.to_label.cmp(&b.to_label)),
    }
}

fn code_vertex_count<L>(code: &[DfsEdge<L>]) -> usize {
    code.iter().map(|e| e.from.max(e.to) + 1).max().unwrap_or(0)
}

/// Rightmost path, from the rightmost vertex back to the root.
fn rightmost_path<L>(code: &[DfsEdge<L>]) -> Vec<usize> {
    let rm = code_vertex_count(code).saturating_sub(1);
    let mut path = vec![rm];
    let mut cur = rm;
    for e in code.iter().rev() {
        if e.is_forward() && e.to == cur {
            cur = e.from;
            path.push(cur);
        }
    }
    path
}

fn code_has_edge<L>(code: &[DfsEdge<L>], a: usize, b: usize) -> bool {
    code.iter()
        .any(|e| (e.from == a && e.to == b) || (e.from == b && e.to == a))
}

/// Minimum DFS code of a small connected labeled graph, built greedily: among
/// all partial traversals sharing the current minimal prefix, take the
/// smallest next edge.
fn min_dfs_code<L: Ord + Clone>(labels: &[L], adj: &[Vec<(usize, L)>]) -> Vec<DfsEdge<L>> {
    let total: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
    if total == 0 {
        return Vec::new();
    }
    let mut first: Option<(L, L, L)> = None;
    let mut projs: Vec<Vec<usize>> = Vec::new();
    for (u, list) in adj.iter().enumerate() {
        for (v, el) in list {
            let key = (labels[u].clone(), el.clone(), labels[*v].clone());
            match first.as_ref().map(|f| key.cmp(f)) {
                None | Some(Ordering::Less) => {
                    first = Some(key);
                    projs = vec![vec![u, *v]];
                }
                Some(Ordering::Equal) => projs.push(vec![u, *v]),
                Some(Ordering::Greater) => {}
            }
        }
    }
    let (fl, el, tl) = first.unwrap();
    let mut code = vec![DfsEdge {
        from: 0,
        to: 1,
        from_label: fl,
        edge_label: el,
        to_label: tl,
    }];
    while code.len() < total {
        let path = rightmost_path(&code);
        let rm = path[0];
        let next_vertex = code_vertex_count(&code);
        let mut best: Option<DfsEdge<L>> = None;
        let mut best_projs: Vec<Vec<usize>> = Vec::new();
        let mut offer = |cand: DfsEdge<L>, proj: Vec<usize>, best: &mut Option<DfsEdge<L>>| {
            match best.as_ref().map(|b| extension_cmp(&cand, b)) {
                None | Some(Ordering::Less) => {
                    *best = Some(cand);
                    best_projs = vec![proj];
                }
                Some(Ordering::Equal) => best_projs.push(proj),
                Some(Ordering::Greater) => {}
            }
        };
        for proj in &projs {
            for &v in path.iter().skip(1).rev() {
                if code_has_edge(&code, rm, v) {
                    continue;
                }
                if let Some((_, l)) = adj[proj[rm]].iter().find(|(x, _)| *x == proj[v]) {
                    let cand = DfsEdge {
                        from: rm,
                        to: v,
                        from_label: labels[proj[rm]].clone(),
                        edge_label: l.clone(),
                        to_label: labels[proj[v]].clone(),
                    };
                    offer(cand, proj.clone(), &mut best);
                }
            }
            for &v in &path {
                for (h, l) in &adj[proj[v]] {
                    if proj.contains(h) {
                        continue;
                    }
                    let cand = DfsEdge {
                        from: v,
                        to: next_vertex,
                        from_label: labels[proj[v]].clone(),
                        edge_label: l.clone(),
                        to_label: labels[*h].clone(),
                    };
                    let mut p = proj.clone();
                    p.push(*h);
                    offer(cand, p, &mut best);
                }
            }
        }
        code.push(best.expect("connected graph always extends"));
        projs = best_projs;
    }
    code
}

/// Vertex labels and adjacency of the graph described by a DFS code.
fn code_graph<L: Clone>(code: &[DfsEdge<L>]) -> (Vec<L>, Vec<Vec<(usize, L)>>) {
    let n = code_vertex_count(code);
    let mut labels: Vec<Option<L>> = vec![None; n];
    let mut adj = vec![Vec::new(); n];
    for e in code {
        labels[e.from] = Some(e.from_label.clone());
        labels[e.to] = Some(e.to_label.clone());
        adj[e.from].push((e.to, e.edge_label.clone()));
        adj[e.to].push((e.from, e.edge_label.clone()));
    }
    (labels.into_iter().map(Option::unwrap).collect(), adj)
}

fn is_min_code<L: Ord + Clone>(code: &[DfsEdge<L>]) -> bool {
    let (labels, adj) = code_graph(code);
    min_dfs_code(&labels, &adj) == code
}

/// A connected pattern with vertices numbered in minimum-DFS-code order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternGraph {
    pub node_labels: Vec<String>,
    /// `(from, to, label)` in minimum DFS code order.
    pub edges: Vec<(usize, usize, String)>,
}

impl PatternGraph {
    pub fn single(label: impl Into<String>) -> Self {
        Self {
            node_labels: vec![label.into()],
            edges: Vec::new(),
        }
    }

    fn from_code(code: &[DfsEdge<String>]) -> Self {
        let (labels, _) = code_graph(code);
        Self {
            node_labels: labels,
            edges: code
                .iter()
                .map(|e| (e.from, e.to, e.edge_label.clone()))
                .collect(),
        }
    }

    /// Canonicalizes an arbitrary connected labeled graph.
    pub fn canonical(labels: Vec<String>, edges: Vec<(usize, usize, String)>) -> Result<Self, MinerError> {
        let n = labels.len();
        if n == 0 {
            return Err(MinerError::Disconnected);
        }
        let mut adj = vec![Vec::new(); n];
        for (a, b, l) in &edges {
            if *a >= n || *b >= n {
                return Err(MinerError::BadVertex((*a).max(*b)));
            }
            if a == b {
                continue;
            }
            adj[*a].push((*b, l.clone()));
            adj[*b].push((*a, l.clone()));
        }
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for (v, _) in &adj[u] {
                if !seen[*v] {
                    seen[*v] = true;
                    stack.push(*v);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(MinerError::Disconnected);
        }
        if n == 1 {
            return Ok(Self::single(labels[0].clone()));
        }
        Ok(Self::from_code(&min_dfs_code(&labels, &adj)))
    }

    pub fn node_count(&self) -> usize {
        self.node_labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn code(&self) -> Vec<DfsEdge<String>> {
        self.edges
            .iter()
            .map(|(a, b, l)| DfsEdge {
                from: *a,
                to: *b,
                from_label: self.node_labels[*a].clone(),
                edge_label: l.clone(),
                to_label: self.node_labels[*b].clone(),
            })
            .collect()
    }

    /// Canonical code text, e.g. `(0,1,author,writes,paper)(1,2,paper,cites,paper)`;
    /// a single node renders as `(author)`.
    pub fn canonical_code(&self) -> String {
        if self.edges.is_empty() {
            return format!("({})", self.node_labels[0]);
        }
        self.code()
            .iter()
            .map(|e| format!("({},{},{},{},{})", e.from, e.to, e.from_label, e.edge_label, e.to_label))
            .collect()
    }

    /// Connected sub-patterns with one edge removed (a vertex left isolated
    /// by the removal is dropped with it).
    pub fn one_edge_removed(&self) -> Vec<PatternGraph> {
        let mut out: BTreeMap<String, PatternGraph> = BTreeMap::new();
        for skip in 0..self.edges.len() {
            let rest: Vec<&(usize, usize, String)> = self
                .edges
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != skip)
                .map(|(_, e)| e)
                .collect();
            let mut degree = vec![0usize; self.node_count()];
            for (a, b, _) in &rest {
                degree[*a] += 1;
                degree[*b] += 1;
            }
            let (a, b, _) = &self.edges[skip];
            let mut candidates = Vec::new();
            if rest.is_empty() {
                candidates.push(vec![*a]);
                candidates.push(vec![*b]);
            } else {
                let keep: Vec<usize> = (0..self.node_count()).filter(|&v| degree[v] > 0).collect();
                candidates.push(keep);
            }
            for keep in candidates {
                let mut remap = vec![usize::MAX; self.node_count()];
                for (i, &v) in keep.iter().enumerate() {
                    remap[v] = i;
                }
                let labels = keep.iter().map(|&v| self.node_labels[v].clone()).collect();
                let edges = rest
                    .iter()
                    .map(|(x, y, l)| (remap[*x], remap[*y], l.clone()))
                    .collect();
                if let Ok(p) = PatternGraph::canonical(labels, edges) {
                    out.insert(p.canonical_code(), p);
                }
            }
        }
        out.into_values().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinerConfig {
    pub min_support: usize,
    pub max_edges: usize,
    pub max_embeddings: usize,
}

impl Default for MinerConfig {
    fn default() -> Self {
        Self {
            min_support: 2,
            max_edges: DEFAULT_MAX_EDGES,
            max_embeddings: DEFAULT_MAX_EMBEDDINGS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinedPattern {
    pub pattern: PatternGraph,
    pub support: usize,
}

/// MNI support from embeddings (vertex i of every embedding maps to `emb[i]`).
fn mni_of(projs: &[Vec<usize>], vertices: usize) -> usize {
    if projs.is_empty() {
        return 0;
    }
    (0..vertices)
        .map(|i| projs.iter().map(|p| p[i]).collect::<HashSet<_>>().len())
        .min()
        .unwrap_or(0)
}

struct Miner<'g> {
    g: &'g LabeledGraph,
    cfg: MinerConfig,
    out: Vec<MinedPattern>,
}

type Code = Vec<DfsEdge<u32>>;

#[derive(Hash, PartialEq, Eq)]
enum Extension {
    Forward { from: usize, edge: u32, label: u32 },
    Backward { from: usize, to: usize, edge: u32 },
}

impl<'g> Miner<'g> {
    fn to_pattern(&self, code: &Code) -> PatternGraph {
        let named: Vec<DfsEdge<String>> = code
            .iter()
            .map(|e| DfsEdge {
                from: e.from,
                to: e.to,
                from_label: self.g.node_label_names[e.from_label as usize].clone(),
                edge_label: self.g.edge_label_names[e.edge_label as usize].clone(),
                to_label: self.g.node_label_names[e.to_label as usize].clone(),
            })
            .collect();
        PatternGraph::from_code(&named)
    }

    /// True when no one-edge extension (anywhere in the pattern) keeps `support`.
    fn is_closed(&self, code: &Code, vertices: usize, projs: &[Vec<usize>], support: usize) -> Result<bool, MinerError> {
        let mut groups: HashMap<Extension, Vec<(usize, usize)>> = HashMap::new();
        let mut total = 0usize;
        for (pi, proj) in projs.iter().enumerate() {
            for v in 0..vertices {
                for &(h, el) in self.g.neighbors(proj[v]) {
                    match proj.iter().position(|&x| x == h) {
                        None => {
                            groups
                                .entry(Extension::Forward {
                                    from: v,
                                    edge: el,
                                    label: self.g.labels[h],
                                })
                                .or_default()
                                .push((pi, h));
                        }
                        Some(w) if w > v && !code_has_edge(code, v, w) => {
                            groups
                                .entry(Extension::Backward { from: v, to: w, edge: el })
                                .or_default()
                                .push((pi, h));
                        }
                        Some(_) => continue,
                    }
                    total += 1;
                    if total > self.cfg.max_embeddings {
                        return Err(MinerError::EmbeddingOverflow(self.cfg.max_embeddings));
                    }
                }
            }
        }
        for (ext, members) in &groups {
            let mut s = (0..vertices)
                .map(|i| members.iter().map(|&(pi, _)| projs[pi][i]).collect::<HashSet<_>>().len())
                .min()
                .unwrap_or(0);
            if let Extension::Forward { .. } = ext {
                s = s.min(members.iter().map(|&(_, h)| h).collect::<HashSet<_>>().len());
            }
            if s == support {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn grow(&mut self, code: &Code, projs: Vec<Vec<usize>>) -> Result<(), MinerError> {
        if !is_min_code(code) {
            return Ok(());
        }
        let vertices = code_vertex_count(code);
        let support = mni_of(&projs, vertices);
        if self.is_closed(code, vertices, &projs, support)? {
            self.out.push(MinedPattern {
                pattern: self.to_pattern(code),
                support,
            });
        }
        if code.len() >= self.cfg.max_edges {
            return Ok(());
        }
        let path = rightmost_path(code);
        let rm = path[0];
        let mut exts: BTreeMap<DfsEdge<u32>, Vec<Vec<usize>>> = BTreeMap::new();
        let mut total = 0usize;
        for proj in &projs {
            for &v in path.iter().skip(1) {
                if code_has_edge(code, rm, v) {
                    continue;
                }
                if let Some(el) = self.g.edge_label(proj[rm], proj[v]) {
                    let e = DfsEdge {
                        from: rm,
                        to: v,
                        from_label: self.g.labels[proj[rm]],
                        edge_label: el,
                        to_label: self.g.labels[proj[v]],
                    };
                    exts.entry(e).or_default().push(proj.clone());
                    total += 1;
                }
            }
            for &v in &path {
                for &(h, el) in self.g.neighbors(proj[v]) {
                    if proj.contains(&h) {
                        continue;
                    }
                    let e = DfsEdge {
                        from: v,
                        to: vertices,
                        from_label: self.g.labels[proj[v]],
                        edge_label: el,
                        to_label: self.g.labels[h],
                    };
                    let mut p = proj.clone();
                    p.push(h);
                    exts.entry(e).or_default().push(p);
                    total += 1;
                }
            }
            if total > self.cfg.max_embeddings {
                return Err(MinerError::EmbeddingOverflow(self.cfg.max_embeddings));
            }
        }
        for (e, next) in exts {
            let n = if e.is_forward() { vertices + 1 } else { vertices };
            if mni_of(&next, n) >= self.cfg.min_support {
                let mut c = code.clone();
                c.push(e);
                self.grow(&c, next)?;
            }
        }
        Ok(())
    }
}

/// Mines closed connected patterns with MNI support `>= min_support` and at
/// most `max_edges` edges. Closedness considers every one-edge extension,
/// including extensions beyond `max_edges`. Output is sorted by canonical code.
pub fn mine_closed_patterns(g: &LabeledGraph, cfg: &MinerConfig) -> Result<Vec<MinedPattern>, MinerError> {
    if cfg.min_support == 0 {
        return Err(MinerError::ZeroSupport);
    }
    if g.node_count() == 0 {
        return Err(MinerError::EmptyCell);
    }
    let mut miner = Miner {
        g,
        cfg: *cfg,
        out: Vec::new(),
    };
    let mut by_label: BTreeMap<u32, Vec<Vec<usize>>> = BTreeMap::new();
    for u in 0..g.node_count() {
        by_label.entry(g.labels[u]).or_default().push(vec![u]);
    }
    for (label, projs) in &by_label {
        if projs.len() >= cfg.min_support && miner.is_closed(&Vec::new(), 1, projs, projs.len())? {
            miner.out.push(MinedPattern {
                pattern: PatternGraph::single(g.node_label_names[*label as usize].clone()),
                support: projs.len(),
            });
        }
    }
    if cfg.max_edges > 0 {
        let mut roots: BTreeMap<DfsEdge<u32>, Vec<Vec<usize>>> = BTreeMap::new();
        for u in 0..g.node_count() {
            for &(v, el) in g.neighbors(u) {
                if g.labels[u] <= g.labels[v] {
                    let e = DfsEdge {
                        from: 0,
                        to: 1,
                        from_label: g.labels[u],
                        edge_label: el,
                        to_label: g.labels[v],
                    };
                    roots.entry(e).or_default().push(vec![u, v]);
                }
            }
        }
        for (e, projs) in roots {
            if mni_of(&projs, 2) >= cfg.min_support {
                miner.grow(&vec![e], projs)?;
            }
        }
    }
    let mut out = miner.out;
    out.sort_by_cached_key(|m| m.pattern.canonical_code());
    Ok(out)
}

/// MNI support of `p` in `g` by exhaustive embedding enumeration.
pub fn mni_support(p: &PatternGraph, g: &LabeledGraph, max_embeddings: usize) -> Result<usize, MinerError> {
    let Some(labels) = p
        .node_labels
        .iter()
        .map(|l| g.node_label_id(l))
        .collect::<Option<Vec<u32>>>()
    else {
        return Ok(0);
    };
    if p.edges.is_empty() {
        return Ok(g.labels.iter().filter(|&&l| l == labels[0]).count());
    }
    let Some(edge_labels) = p
        .edges
        .iter()
        .map(|(_, _, l)| g.edge_label_id(l))
        .collect::<Option<Vec<u32>>>()
    else {
        return Ok(0);
    };
    let code: Vec<DfsEdge<u32>> = p
        .edges
        .iter()
        .zip(&edge_labels)
        .map(|(&(a, b, _), &el)| DfsEdge {
            from: a,
            to: b,
            from_label: labels[a],
            edge_label: el,
            to_label: labels[b],
        })
        .collect();

    struct Search<'a> {
        g: &'a LabeledGraph,
        code: &'a [DfsEdge<u32>],
        map: Vec<usize>,
        images: Vec<HashSet<usize>>,
        count: usize,
        limit: usize,
    }
    impl Search<'_> {
        fn run(&mut self, step: usize) -> Result<(), MinerError> {
            if step == self.code.len() {
                self.count += 1;
                if self.count > self.limit {
                    return Err(MinerError::EmbeddingOverflow(self.limit));
                }
                for (i, &x) in self.map.iter().enumerate() {
                    self.images[i].insert(x);
                }
                return Ok(());
            }
            let e = &self.code[step];
            if e.is_forward() {
                let src = self.map[e.from];
                for &(h, el) in self.g.neighbors(src) {
                    if el == e.edge_label && self.g.labels[h] == e.to_label && !self.map.contains(&h) {
                        self.map.push(h);
                        self.run(step + 1)?;
                        self.map.pop();
                    }
                }
                Ok(())
            } else {
                if self.g.edge_label(self.map[e.from], self.map[e.to]) == Some(e.edge_label) {
                    self.run(step + 1)?;
                }
                Ok(())
            }
        }
    }

    let mut search = Search {
        g,
        code: &code,
        map: Vec::with_capacity(p.node_count()),
        images: vec![HashSet::new(); p.node_count()],
        count: 0,
        limit: max_embeddings,
    };
    for u in 0..g.node_count() {
        if g.labels[u] == labels[0] {
            search.map.push(u);
            search.run(0)?;
            search.map.pop();
        }
    }
    Ok(search.images.iter().map(HashSet::len).min().unwrap_or(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternWeights {
    pub popularity: f64,
    pub integrity: f64,
    pub distinctiveness: f64,
}

impl Default for PatternWeights {
    fn default() -> Self {
        Self {
            popularity: 1.0,
            integrity: 1.0,
            distinctiveness: 1.0,
        }
    }
}

impl PatternWeights {
    pub fn validate(&self) -> Result<(), MinerError> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if ok(self.popularity) && ok(self.integrity) && ok(self.distinctiveness) {
            Ok(())
        } else {
            Err(MinerError::InvalidWeights)
        }
    }
}

impl std::str::FromStr for PatternWeights {
    type Err = String;

    /// Parses `p,i,d`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|x| x.trim().parse::<f64>().map_err(|e| format!("bad weight `{x}`: {e}")))
            .collect::<Result<_, _>>()?;
        match parts.as_slice() {
            &[p, i, d] => {
                let w = Self {
                    popularity: p,
                    integrity: i,
                    distinctiveness: d,
                };
                w.validate().map_err(|e| e.to_string())?;
                Ok(w)
            }
            _ => Err(format!("expected three comma-separated weights, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPattern {
    pub code: String,
    pub pattern: PatternGraph,
    pub support: usize,
    pub popularity: f64,
    pub integrity: f64,
    /// `None` when the pattern is absent from every sibling (infinite).
    pub distinctiveness: Option<f64>,
    pub distinctiveness_infinite: bool,
    pub combined: f64,
    pub weights: PatternWeights,
}

/// Scores `p` (with MNI `support` in `cell`) against `siblings`, which must
/// include the cell itself.
pub fn score_pattern(
    p: &PatternGraph,
    support: usize,
    cell: &LabeledGraph,
    siblings: &[&LabeledGraph],
    weights: &PatternWeights,
    max_embeddings: usize,
) -> Result<ScoredPattern, MinerError> {
    weights.validate()?;
    if cell.node_count() == 0 {
        return Err(MinerError::EmptyCell);
    }
    let popularity = support as f64 / cell.node_count() as f64;
    let integrity = if p.edges.is_empty() {
        1.0
    } else {
        let mut best = 0usize;
        for q in p.one_edge_removed() {
            best = best.max(mni_support(&q, cell, max_embeddings)?);
        }
        if best == 0 { 0.0 } else { support as f64 / best as f64 }
    };
    let own_rate = popularity;
    let mut rates = Vec::with_capacity(siblings.len());
    for s in siblings {
        rates.push(if s.node_count() == 0 {
            0.0
        } else {
            mni_support(p, s, max_embeddings)? as f64 / s.node_count() as f64
        });
    }
    let mean = if rates.is_empty() {
        own_rate
    } else {
        rates.iter().sum::<f64>() / rates.len() as f64
    };
    let distinctiveness = if mean > 0.0 { Some(own_rate / mean) } else { None };
    let mut combined = popularity.powf(weights.popularity) * integrity.powf(weights.integrity);
    if let Some(d) = distinctiveness {
        combined *= d.powf(weights.distinctiveness);
    }
    Ok(ScoredPattern {
        code: p.canonical_code(),
        pattern: p.clone(),
        support,
        popularity,
        integrity,
        distinctiveness,
        distinctiveness_infinite: distinctiveness.is_none(),
        combined,
        weights: *weights,
    })
}

/// Descending combined score, ties by canonical code.
pub fn rank_order(a: &ScoredPattern, b: &ScoredPattern) -> Ordering {
    b.combined
        .partial_cmp(&a.combined)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.code.cmp(&b.code))
}

/// Mines, scores and ranks the closed patterns of `cell`.
pub fn rank_patterns(
    cell: &LabeledGraph,
    siblings: &[&LabeledGraph],
    cfg: &MinerConfig,
    weights: &PatternWeights,
) -> Result<Vec<ScoredPattern>, MinerError> {
    weights.validate()?;
    let mined = mine_closed_patterns(cell, cfg)?;
    let mut scored = mined
        .iter()
        .map(|m| score_pattern(&m.pattern, m.support, cell, siblings, weights, cfg.max_embeddings))
        .collect::<Result<Vec<_>, _>>()?;
    scored.sort_by(rank_order);
    Ok(scored)
}
