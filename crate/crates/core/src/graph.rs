//! Typed heterogeneous network store.
//!
//! Nodes are kept in canonical order (byte-wise by id) so that every derived
//! structure is independent of load order. Edges are directed and typed;
//! parallel edges with the same `(src, dst, edge_type)` are merged by summing
//! their weights.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("{source_name} line {line}: malformed record: {message}")]
    Malformed {
        source_name: &'static str,
        line: usize,
        message: String,
    },
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("node `{0}` has an empty type")]
    EmptyNodeType(String),
    #[error("edge references unknown node id `{0}`")]
    UnknownEdgeEndpoint(String),
    #[error("edge {src} -> {dst} has invalid weight {weight}")]
    InvalidWeight { src: String, dst: String, weight: f64 },
    #[error("unknown node id `{0}`")]
    UnknownNode(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TypedNode {
    pub id: String,
    #[serde(rename = "type")]
    pub node_type: String,
    #[serde(rename = "name", default)]
    pub surface_name: String,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedEdge {
    pub src: String,
    pub dst: String,
    #[serde(rename = "type")]
    pub edge_type: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

fn default_weight() -> f64 {
    1.0
}

/// Edge stored by node index. `edge_type` indexes [`HeterogeneousNetwork::edge_types`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub edge_type: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeterogeneousNetwork {
    nodes: Vec<TypedNode>,
    index: HashMap<String, usize>,
    edges: Vec<Edge>,
    node_types: Vec<String>,
    edge_types: Vec<String>,
    adjacency: Vec<Vec<usize>>,
}

impl Default for HeterogeneousNetwork {
    fn default() -> Self {
        Self::from_parts(Vec::new(), Vec::new()).expect("empty network is valid")
    }
}

impl HeterogeneousNetwork {
    /// Validates and canonicalizes nodes and edges into a network.
    pub fn from_parts(
        mut nodes: Vec<TypedNode>,
        edges: Vec<TypedEdge>,
    ) -> Result<Self, GraphError> {
        nodes.sort_by(|a, b| a.id.as_bytes().cmp(b.id.as_bytes()));
        for pair in nodes.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(GraphError::DuplicateNode(pair[0].id.clone()));
            }
        }
        if let Some(n) = nodes.iter().find(|n| n.node_type.is_empty()) {
            return Err(GraphError::EmptyNodeType(n.id.clone()));
        }
        let index: HashMap<String, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let node_types: Vec<String> = nodes
            .iter()
            .map(|n| n.node_type.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let edge_types: Vec<String> = edges
            .iter()
            .map(|e| e.edge_type.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let type_index: HashMap<&str, usize> = edge_types
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();

        let mut raw = Vec::with_capacity(edges.len());
        for e in &edges {
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                return Err(GraphError::InvalidWeight {
                    src: e.src.clone(),
                    dst: e.dst.clone(),
                    weight: e.weight,
                });
            }
            let src = *index
                .get(&e.src)
                .ok_or_else(|| GraphError::UnknownEdgeEndpoint(e.src.clone()))?;
            let dst = *index
                .get(&e.dst)
                .ok_or_else(|| GraphError::UnknownEdgeEndpoint(e.dst.clone()))?;
            raw.push(Edge {
                src,
                dst,
                edge_type: type_index[e.edge_type.as_str()],
                weight: e.weight,
            });
        }
        Ok(Self::assemble(nodes, index, raw, node_types, edge_types))
    }

    fn assemble(
        nodes: Vec<TypedNode>,
        index: HashMap<String, usize>,
        mut raw: Vec<Edge>,
        node_types: Vec<String>,
        edge_types: Vec<String>,
    ) -> Self {
        raw.sort_by_key(|e| (e.src, e.dst, e.edge_type));
        let mut merged: Vec<Edge> = Vec::with_capacity(raw.len());
        for e in raw {
            match merged.last_mut() {
                Some(last)
                    if last.src == e.src && last.dst == e.dst && last.edge_type == e.edge_type =>
                {
                    last.weight += e.weight
                }
                _ => merged.push(e),
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for e in &merged {
            adjacency[e.src].push(e.dst);
            if e.src != e.dst {
                adjacency[e.dst].push(e.src);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Self {
            nodes,
            index,
            edges: merged,
            node_types,
            edge_types,
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[TypedNode] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, idx: usize) -> &TypedNode {
        &self.nodes[idx]
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn node_types(&self) -> &[String] {
        &self.node_types
    }

    pub fn edge_types(&self) -> &[String] {
        &self.edge_types
    }

    pub fn edge_type_name(&self, edge: &Edge) -> &str {
        &self.edge_types[edge.edge_type]
    }

    /// Sorted distinct neighbors through edges of any type and direction.
    pub fn neighbors(&self, idx: usize) -> &[usize] {
        &self.adjacency[idx]
    }

    pub fn total_edge_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).sum()
    }

    /// Edge in string form.
    pub fn typed_edge(&self, edge: &Edge) -> TypedEdge {
        TypedEdge {
            src: self.nodes[edge.src].id.clone(),
            dst: self.nodes[edge.dst].id.clone(),
            edge_type: self.edge_types[edge.edge_type].clone(),
            weight: edge.weight,
        }
    }

    /// Subnetwork induced by `keep`; every id must exist.
    pub fn induced_subnetwork<'a, I>(&self, keep: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut idx = Vec::new();
        for id in keep {
            idx.push(
                self.node_index(id)
                    .ok_or_else(|| GraphError::UnknownNode(id.to_string()))?,
            );
        }
        idx.sort_unstable();
        idx.dedup();
        Ok(self.induced_by_indices(&idx))
    }

    /// Subnetwork induced by sorted, deduplicated node indices. The i-th node of
    /// the result is `self.node(keep[i])`. Type schema is inherited.
    pub fn induced_by_indices(&self, keep: &[usize]) -> Self {
        debug_assert!(keep.windows(2).all(|w| w[0] < w[1]));
        let mut remap = vec![usize::MAX; self.nodes.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let nodes: Vec<TypedNode> = keep.iter().map(|&i| self.nodes[i].clone()).collect();
        let index = nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (n.id.clone(), i))
            .collect();
        let mut edges = Vec::new();
        for &old in keep {
            for e in self.out_edges(old) {
                let dst = remap[e.dst];
                if dst != usize::MAX {
                    edges.push(Edge {
                        src: remap[old],
                        dst,
                        ..*e
                    });
                }
            }
        }
        Self::assemble(
            nodes,
            index,
            edges,
            self.node_types.clone(),
            self.edge_types.clone(),
        )
    }

    /// Outgoing edges of `idx` (edges are sorted by source).
    pub fn out_edges(&self, idx: usize) -> &[Edge] {
        let lo = self.edges.partition_point(|e| e.src < idx);
        let hi = self.edges.partition_point(|e| e.src <= idx);
        &self.edges[lo..hi]
    }

    /// Collapses types and direction; drops self-loops; sums weights.
    pub fn undirected_projection(&self) -> UndirectedGraph {
        let pairs = self.edges.iter().filter(|e| e.src != e.dst).map(|e| {
            let (a, b) = if e.src < e.dst { (e.src, e.dst) } else { (e.dst, e.src) };
            (a, b, e.weight)
        });
        UndirectedGraph::from_pairs(self.nodes.len(), pairs)
    }

    pub fn write_nodes_jsonl<W: Write>(&self, mut out: W) -> Result<(), GraphError> {
        for n in &self.nodes {
            serde_json::to_writer(&mut out, n).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn write_edges_jsonl<W: Write>(&self, mut out: W) -> Result<(), GraphError> {
        for e in &self.edges {
            serde_json::to_writer(&mut out, &self.typed_edge(e)).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Parses the JSON-lines node and edge sources into a network.
pub fn ingest_network<N: BufRead, E: BufRead>(
    nodes_source: N,
    edges_source: E,
) -> Result<HeterogeneousNetwork, GraphError> {
    let nodes = read_jsonl::<TypedNode, _>(nodes_source, "nodes")?;
    let edges = read_jsonl::<TypedEdge, _>(edges_source, "edges")?;
    HeterogeneousNetwork::from_parts(nodes, edges)
}

fn read_jsonl<T: serde::de::DeserializeOwned, R: BufRead>(
    source: R,
    source_name: &'static str,
) -> Result<Vec<T>, GraphError> {
    let mut out = Vec::new();
    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| GraphError::Malformed {
            source_name,
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

/// Simple undirected weighted graph in CSR form with sorted neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct UndirectedGraph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
    weights: Vec<f64>,
}

impl UndirectedGraph {
    /// Builds from `(u, v, w)` with `u != v`; duplicate pairs are summed.
    pub fn from_pairs<I>(n: usize, pairs: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut list: Vec<(usize, usize, f64)> = pairs
            .into_iter()
            .map(|(a, b, w)| if a < b { (a, b, w) } else { (b, a, w) })
            .filter(|&(a, b, _)| a != b)
            .collect();
        list.sort_by_key(|&(a, b, _)| (a, b));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(list.len());
        for (a, b, w) in list {
            match merged.last_mut() {
                Some(last) if last.0 == a && last.1 == b => last.2 += w,
                _ => merged.push((a, b, w)),
            }
        }
        let mut degree = vec![0usize; n];
        for &(a, b, _) in &merged {
            degree[a] += 1;
            degree[b] += 1;
        }
        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets[..n].to_vec();
        let mut targets = vec![0usize; offsets[n]];
        let mut weights = vec![0.0; offsets[n]];
        // merged is sorted by (a, b): lower neighbors first, then higher ones,
        // keeps every list sorted.
        for &(a, b, w) in &merged {
            targets[fill[b]] = a;
            weights[fill[b]] = w;
            fill[b] += 1;
        }
        for &(a, b, w) in &merged {
            targets[fill[a]] = b;
            weights[fill[a]] = w;
            fill[a] += 1;
        }
        Self {
            offsets,
            targets,
            weights,
        }
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len() / 2
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.targets[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn neighbor_weights(&self, u: usize) -> &[f64] {
        &self.weights[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn weighted_degree(&self, u: usize) -> f64 {
        self.neighbor_weights(u).iter().sum()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Each undirected edge once as `(u, v, w)` with `u < v`.
    pub fn edge_iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.node_count()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .zip(self.neighbor_weights(u))
                .filter(move |(&v, _)| v > u)
                .map(move |(&v, &w)| (u, v, w))
        })
    }

    /// Component label per node; labels are numbered by smallest member.
    pub fn connected_components(&self) -> (Vec<usize>, usize) {
        let n = self.node_count();
        let mut label = vec![usize::MAX; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &v in self.neighbors(u) {
                    if label[v] == usize::MAX {
                        label[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Sorted members of the largest component (ties: smallest member index).
    pub fn largest_component(&self) -> Vec<usize> {
        let (label, count) = self.connected_components();
        if count == 0 {
            return Vec::new();
        }
        let mut sizes = vec![0usize; count];
        for &l in &label {
            sizes[l] += 1;
        }
        let best = (0..count)
            .max_by(|&a, &b| sizes[a].cmp(&sizes[b]).then(b.cmp(&a)))
            .unwrap();
        (0..label.len()).filter(|&i| label[i] == best).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn node(id: &str) -> TypedNode {
        TypedNode {
            id: id.into(),
            node_type: "t".into(),
            surface_name: id.into(),
            attrs: BTreeMap::new(),
        }
    }

    pub(crate) fn edge(s: &str, d: &str, w: f64) -> TypedEdge {
        TypedEdge {
            src: s.into(),
            dst: d.into(),
            edge_type: "e".into(),
            weight: w,
        }
    }

    #[test]
    fn empty_network() {
        let net = ingest_network(&b""[..], &b""[..]).unwrap();
        assert_eq!(net.node_count(), 0);
        assert_eq!(net.edge_count(), 0);
    }

    #[test]
    fn parallel_edges_merge() {
        let net = HeterogeneousNetwork::from_parts(
            vec![node("a"), node("b")],
            vec![edge("a", "b", 1.0), edge("a", "b", 2.0)],
        )
        .unwrap();
        assert_eq!(net.edge_count(), 1);
        assert_eq!(net.edges()[0].weight, 3.0);
    }

    #[test]
    fn ingest_errors() {
        let nodes = b"{\"id\":\"a\",\"type\":\"t\"}\nnot json\n";
        match ingest_network(&nodes[..], &b""[..]) {
            Err(GraphError::Malformed { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let nodes = b"{\"id\":\"a\",\"type\":\"t\"}\n";
        let edges = b"{\"src\":\"a\",\"dst\":\"zz\",\"type\":\"e\"}\n";
        assert!(matches!(
            ingest_network(&nodes[..], &edges[..]),
            Err(GraphError::UnknownEdgeEndpoint(id)) if id == "zz"
        ));
        let edges = b"{\"src\":\"a\",\"dst\":\"a\",\"type\":\"e\",\"weight\":-1}\n";
        assert!(matches!(
            ingest_network(&nodes[..], &edges[..]),
            Err(GraphError::InvalidWeight { .. })
        ));
    }

    #[test]
    fn default_weight_is_one() {
        let nodes = b"{\"id\":\"a\",\"type\":\"t\"}\n{\"id\":\"b\",\"type\":\"t\"}\n";
        let edges = b"{\"src\":\"a\",\"dst\":\"b\",\"type\":\"e\"}\n";
        let net = ingest_network(&nodes[..], &edges[..]).unwrap();
        assert_eq!(net.edges()[0].weight, 1.0);
    }

    #[test]
    fn induced_cases() {
        let net = HeterogeneousNetwork::from_parts(
            vec![node("a"), node("b"), node("c")],
            vec![edge("a", "b", 1.0), edge("b", "c", 1.0), edge("c", "a", 1.0)],
        )
        .unwrap();
        let all: Vec<&str> = net.nodes().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(net.induced_subnetwork(all).unwrap(), net);
        let empty = net.induced_subnetwork(std::iter::empty()).unwrap();
        assert_eq!(empty.node_count(), 0);
        let ab = net.induced_subnetwork(["a", "b"]).unwrap();
        assert_eq!((ab.node_count(), ab.edge_count()), (2, 1));
        assert!(matches!(
            net.induced_subnetwork(["q"]),
            Err(GraphError::UnknownNode(_))
        ));
    }

    #[test]
    fn projection_cases() {
        let net = HeterogeneousNetwork::from_parts(
            vec![node("a"), node("b")],
            vec![edge("a", "b", 1.0)],
        )
        .unwrap();
        assert_eq!(net.undirected_projection().edge_count(), 1);

        let net = HeterogeneousNetwork::from_parts(
            vec![node("a"), node("b")],
            vec![edge("a", "b", 1.0), edge("b", "a", 2.0)],
        )
        .unwrap();
        let p = net.undirected_projection();
        assert_eq!(p.edge_count(), 1);
        assert_eq!(p.neighbor_weights(0), &[3.0]);

        let net =
            HeterogeneousNetwork::from_parts(vec![node("a")], vec![edge("a", "a", 1.0)]).unwrap();
        let p = net.undirected_projection();
        assert_eq!((p.node_count(), p.edge_count()), (1, 0));
        assert_eq!(net.edge_count(), 1);
    }
}
