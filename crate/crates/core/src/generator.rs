//! Seeded synthetic planted-partition networks whose communities follow the
//! leaves of generated taxonomies, with a ground-truth file.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{TaxonRecord, ROOT_ID};
use crate::graph::{GraphError, HeterogeneousNetwork, TypedEdge, TypedNode};

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("infeasible generator config: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("io error at {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimensionSpec {
    pub name: String,
    /// Children per node at each depth, e.g. `[3, 2]` gives 3 parents of 2 leaves.
    pub branching: Vec<usize>,
    #[serde(default)]
    pub ordered: bool,
    /// Added to `p_intra` per leaf step along an ordered dimension.
    #[serde(default)]
    pub drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotifSpec {
    /// One leaf value id per dimension.
    pub cell: Vec<String>,
    pub node_types: Vec<String>,
    pub edges: Vec<(usize, usize)>,
    #[serde(default = "default_motif_edge_type")]
    pub edge_type: String,
    pub copies: usize,
}

fn default_motif_edge_type() -> String {
    "motif".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub dimensions: Vec<DimensionSpec>,
    pub nodes_per_leaf_cell: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    #[serde(default = "default_node_types")]
    pub node_types: Vec<(String, f64)>,
    /// Seeded nodes per leaf value, per dimension.
    #[serde(default = "default_seeds_per_leaf")]
    pub seeds_per_leaf: usize,
    #[serde(default)]
    pub motifs: Vec<MotifSpec>,
}

fn default_seed() -> u64 {
    42
}

fn default_node_types() -> Vec<(String, f64)> {
    vec![("entity".into(), 1.0)]
}

fn default_seeds_per_leaf() -> usize {
    5
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            dimensions: vec![
                DimensionSpec {
                    name: "topic".into(),
                    branching: vec![3, 2],
                    ordered: false,
                    drift: None,
                },
                DimensionSpec {
                    name: "year".into(),
                    branching: vec![4],
                    ordered: true,
                    drift: Some(0.05),
                },
            ],
            nodes_per_leaf_cell: 40,
            p_intra: 0.25,
            p_inter: 0.002,
            node_types: vec![("author".into(), 0.6), ("paper".into(), 0.4)],
            seeds_per_leaf: 5,
            motifs: vec![MotifSpec {
                cell: vec!["topic-1.1".into(), "year-1".into()],
                node_types: vec!["author".into(), "paper".into(), "paper".into()],
                edges: vec![(0, 1), (0, 2), (1, 2)],
                edge_type: "motif".into(),
                copies: 4,
            }],
        }
    }
}

impl GeneratorConfig {
    /// One dimension with two leaf blocks.
    pub fn two_block(seed: u64, seeds_per_block: usize) -> Self {
        Self {
            seed,
            dimensions: vec![DimensionSpec {
                name: "block".into(),
                branching: vec![2],
                ordered: false,
                drift: None,
            }],
            nodes_per_leaf_cell: 100,
            p_intra: 0.15,
            p_inter: 0.01,
            node_types: default_node_types(),
            seeds_per_leaf: seeds_per_block,
            motifs: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let bad = |m: String| Err(GeneratorError::Infeasible(m));
        if self.dimensions.is_empty() {
            return bad("at least one dimension is required".into());
        }
        for (name, p) in [("p_intra", self.p_intra), ("p_inter", self.p_inter)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for d in &self.dimensions {
            if !names.insert(d.name.as_str()) {
                return bad(format!("dimension `{}` declared twice", d.name));
            }
            if d.branching.is_empty() || d.branching.contains(&0) {
                return bad(format!("dimension `{}` needs non-zero branching factors", d.name));
            }
            if d.drift.is_some() && !d.ordered {
                return bad(format!("drift on `{}` requires an ordered dimension", d.name));
            }
        }
        let (mut lo, mut hi) = (self.p_intra, self.p_intra);
        for d in &self.dimensions {
            let span = d.drift.unwrap_or(0.0) * (d.branching.iter().product::<usize>() - 1) as f64;
            lo += span.min(0.0);
            hi += span.max(0.0);
        }
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) {
            return bad(format!("drift moves p_intra outside [0, 1] (range {lo}..{hi})"));
        }
        if self.nodes_per_leaf_cell == 0 {
            return bad("nodes_per_leaf_cell must be positive".into());
        }
        if self.node_types.is_empty() || self.node_types.iter().any(|(_, w)| !(w.is_finite() && *w >= 0.0)) {
            return bad("node_types needs non-negative weights".into());
        }
        if self.node_types.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return bad("node_types weights sum to zero".into());
        }
        let cells: usize = self
            .dimensions
            .iter()
            .map(|d| d.branching.iter().product::<usize>())
            .product();
        let per_value_min = self.nodes_per_leaf_cell
            * cells
            / self.dimensions.iter().map(|d| d.branching.iter().product::<usize>()).max().unwrap();
        if self.seeds_per_leaf > per_value_min {
            return bad(format!(
                "seeds_per_leaf {} exceeds the {} nodes of a leaf value",
                self.seeds_per_leaf, per_value_min
            ));
        }
        for m in &self.motifs {
            if m.cell.len() != self.dimensions.len() {
                return bad("motif cell must name one leaf per dimension".into());
            }
            if m.node_types.is_empty() {
                return bad("motif has no nodes".into());
            }
            if m.node_types.len() > self.nodes_per_leaf_cell {
                return bad(format!(
                    "motif with {} nodes is larger than a {}-node cell",
                    m.node_types.len(),
                    self.nodes_per_leaf_cell
                ));
            }
            if m.edges.iter().any(|&(a, b)| a == b || a >= m.node_types.len() || b >= m.node_types.len()) {
                return bad("motif edge references a missing node or is a self-loop".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTruth {
    pub id: String,
    /// True leaf value id per dimension.
    pub cell: Vec<String>,
    /// Dimensions (by name) in which the node carries a seed attribute.
    pub seeded: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motif: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTruth {
    pub cell: Vec<String>,
    pub nodes: usize,
    pub p_intra: f64,
    pub intra_edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotifTruth {
    pub cell: Vec<String>,
    pub edge_type: String,
    /// Node ids of each planted copy, in motif node order.
    pub copies: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub dimensions: Vec<String>,
    pub nodes: Vec<NodeTruth>,
    pub cells: Vec<CellTruth>,
    pub inter_edges: usize,
    pub motifs: Vec<MotifTruth>,
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub config: GeneratorConfig,
    pub network: HeterogeneousNetwork,
    pub taxonomies: Vec<(String, TaxonRecord)>,
    pub truth: GroundTruth,
}

fn build_taxonomy(spec: &DimensionSpec) -> (TaxonRecord, Vec<(String, String)>) {
    fn grow(spec: &DimensionSpec, depth: usize, path: &str, leaves: &mut Vec<(String, String)>) -> Vec<TaxonRecord> {
        (1..=spec.branching[depth])
            .map(|i| {
                let p = if path.is_empty() { i.to_string() } else { format!("{path}.{i}") };
                let id = format!("{}-{p}", spec.name);
                let name = format!("{} {p}", spec.name);
                let children = if depth + 1 < spec.branching.len() {
                    grow(spec, depth + 1, &p, leaves)
                } else {
                    leaves.push((id.clone(), name.clone()));
                    Vec::new()
                };
                TaxonRecord {
                    id,
                    name,
                    aliases: Vec::new(),
                    children,
                    ordered: false,
                }
            })
            .collect()
    }
    let mut leaves = Vec::new();
    let children = grow(spec, 0, "", &mut leaves);
    let root = TaxonRecord {
        id: ROOT_ID.into(),
        name: ROOT_ID.into(),
        aliases: Vec::new(),
        children,
        ordered: spec.ordered,
    };
    (root, leaves)
}

/// Emits pairs `(i, j)` with `j < i < n` independently with probability `p`
/// using geometric skips.
fn sample_pairs(rng: &mut ChaCha8Rng, n: usize, p: f64, mut emit: impl FnMut(usize, usize)) {
    if n < 2 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for i in 1..n {
            for j in 0..i {
                emit(i, j);
            }
        }
        return;
    }
    let log_q = (1.0 - p).ln();
    let (mut v, mut w): (usize, i64) = (1, -1);
    while v < n {
        let r: f64 = rng.gen::<f64>();
        w += 1 + ((1.0 - r).ln() / log_q).floor() as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            emit(v, w as usize);
        }
    }
}

fn edge_type_for(a: &str, b: &str) -> String {
    if a <= b { format!("{a}-{b}") } else { format!("{b}-{a}") }
}

pub fn generate(cfg: &GeneratorConfig) -> Result<GeneratedDataset, GeneratorError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut taxonomies = Vec::new();
    let mut leaves_per_dim = Vec::new();
    for d in &cfg.dimensions {
        let (root, leaves) = build_taxonomy(d);
        taxonomies.push((d.name.clone(), root));
        leaves_per_dim.push(leaves);
    }
    // leaf cells in row-major order over dimensions
    let mut cells: Vec<Vec<usize>> = vec![Vec::new()];
    for leaves in &leaves_per_dim {
        cells = cells
            .into_iter()
            .flat_map(|prefix| {
                (0..leaves.len()).map(move |i| {
                    let mut c = prefix.clone();
                    c.push(i);
                    c
                })
            })
            .collect();
    }
    let motif_cells: Vec<usize> = cfg
        .motifs
        .iter()
        .map(|m| {
            cells
                .iter()
                .position(|c| c.iter().enumerate().all(|(d, &i)| leaves_per_dim[d][i].0 == m.cell[d]))
                .ok_or_else(|| GeneratorError::Infeasible(format!("motif cell {:?} is not a leaf cell", m.cell)))
        })
        .collect::<Result<_, _>>()?;

    let total_weight: f64 = cfg.node_types.iter().map(|(_, w)| w).sum();
    let pick_type = |rng: &mut ChaCha8Rng| -> String {
        let mut r = rng.gen::<f64>() * total_weight;
        for (t, w) in &cfg.node_types {
            if r < *w {
                return t.clone();
            }
            r -= w;
        }
        cfg.node_types.last().unwrap().0.clone()
    };

    let mut node_types: Vec<String> = Vec::new();
    let mut node_cell: Vec<usize> = Vec::new();
    let mut node_motif: Vec<Option<usize>> = Vec::new();
    let mut node_copy: Vec<Option<usize>> = Vec::new();
    let mut cell_ranges = Vec::with_capacity(cells.len());
    let mut motif_copies: Vec<Vec<Vec<usize>>> = vec![Vec::new(); cfg.motifs.len()];
    let mut copies_so_far = 0usize;
    for (ci, _) in cells.iter().enumerate() {
        let start = node_types.len();
        for _ in 0..cfg.nodes_per_leaf_cell {
            node_types.push(pick_type(&mut rng));
            node_cell.push(ci);
            node_motif.push(None);
            node_copy.push(None);
        }
        for (mi, m) in cfg.motifs.iter().enumerate() {
            if motif_cells[mi] != ci {
                continue;
            }
            for _ in 0..m.copies {
                let mut copy = Vec::new();
                for t in &m.node_types {
                    copy.push(node_types.len());
                    node_types.push(t.clone());
                    node_cell.push(ci);
                    node_motif.push(Some(mi));
                    node_copy.push(Some(copies_so_far));
                }
                copies_so_far += 1;
                motif_copies[mi].push(copy);
            }
        }
        cell_ranges.push(start..node_types.len());
    }
    let n = node_types.len();
    let ids: Vec<String> = (0..n).map(|i| format!("n{i:06}")).collect();

    let mut edges: Vec<(usize, usize, String)> = Vec::new();
    let mut cell_truth = Vec::with_capacity(cells.len());
    for (ci, cell) in cells.iter().enumerate() {
        let mut p = cfg.p_intra;
        for (d, spec) in cfg.dimensions.iter().enumerate() {
            if let Some(drift) = spec.drift {
                p += drift * cell[d] as f64;
            }
        }
        let range = cell_ranges[ci].clone();
        let before = edges.len();
        sample_pairs(&mut rng, range.len(), p, |i, j| {
            let (a, b) = (range.start + j, range.start + i);
            // pairs inside one motif copy carry only the motif edge type
            if node_copy[a].is_some() && node_copy[a] == node_copy[b] {
                return;
            }
            edges.push((a, b, edge_type_for(&node_types[a], &node_types[b])));
        });
        cell_truth.push(CellTruth {
            cell: cell.iter().enumerate().map(|(d, &i)| leaves_per_dim[d][i].0.clone()).collect(),
            nodes: range.len(),
            p_intra: p,
            intra_edges: edges.len() - before,
        });
    }
    let before_inter = edges.len();
    sample_pairs(&mut rng, n, cfg.p_inter, |i, j| {
        if node_cell[i] != node_cell[j] {
            edges.push((j, i, edge_type_for(&node_types[j], &node_types[i])));
        }
    });
    let inter_edges = edges.len() - before_inter;
    for (mi, m) in cfg.motifs.iter().enumerate() {
        for copy in &motif_copies[mi] {
            for &(a, b) in &m.edges {
                let (x, y) = (copy[a].min(copy[b]), copy[a].max(copy[b]));
                edges.push((x, y, m.edge_type.clone()));
            }
        }
    }

    // seeds: per dimension and leaf value, a random sample of its non-motif
    // nodes; motif nodes are always seeded
    let mut attrs: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); n];
    for (d, spec) in cfg.dimensions.iter().enumerate() {
        for (li, (_, name)) in leaves_per_dim[d].iter().enumerate() {
            let members: Vec<usize> = (0..n)
                .filter(|&u| cells[node_cell[u]][d] == li && node_motif[u].is_none())
                .collect();
            let chosen = sample(&mut rng, members.len(), cfg.seeds_per_leaf.min(members.len()));
            let mut chosen: Vec<usize> = chosen.into_iter().map(|i| members[i]).collect();
            chosen.sort_unstable();
            for u in chosen {
                attrs[u].insert(spec.name.clone(), name.clone());
            }
        }
    }
    for u in 0..n {
        if node_motif[u].is_some() {
            for (d, spec) in cfg.dimensions.iter().enumerate() {
                attrs[u].insert(spec.name.clone(), leaves_per_dim[d][cells[node_cell[u]][d]].1.clone());
            }
        }
    }

    let truth_nodes = (0..n)
        .map(|u| NodeTruth {
            id: ids[u].clone(),
            cell: cells[node_cell[u]]
                .iter()
                .enumerate()
                .map(|(d, &i)| leaves_per_dim[d][i].0.clone())
                .collect(),
            seeded: cfg
                .dimensions
                .iter()
                .filter(|s| attrs[u].contains_key(&s.name))
                .map(|s| s.name.clone())
                .collect(),
            motif: node_motif[u],
        })
        .collect();
    let nodes: Vec<TypedNode> = (0..n)
        .map(|u| TypedNode {
            id: ids[u].clone(),
            node_type: node_types[u].clone(),
            surface_name: format!("{} {}", node_types[u], ids[u]),
            attrs: std::mem::take(&mut attrs[u]),
        })
        .collect();
    let typed_edges: Vec<TypedEdge> = edges
        .into_iter()
        .map(|(a, b, t)| TypedEdge {
            src: ids[a].clone(),
            dst: ids[b].clone(),
            edge_type: t,
            weight: 1.0,
        })
        .collect();
    let network = HeterogeneousNetwork::from_parts(nodes, typed_edges)?;
    let motifs = cfg
        .motifs
        .iter()
        .enumerate()
        .map(|(mi, m)| MotifTruth {
            cell: m.cell.clone(),
            edge_type: m.edge_type.clone(),
            copies: motif_copies[mi]
                .iter()
                .map(|c| c.iter().map(|&u| ids[u].clone()).collect())
                .collect(),
        })
        .collect();
    Ok(GeneratedDataset {
        config: cfg.clone(),
        network,
        taxonomies,
        truth: GroundTruth {
            seed: cfg.seed,
            dimensions: cfg.dimensions.iter().map(|d| d.name.clone()).collect(),
            nodes: truth_nodes,
            cells: cell_truth,
            inter_edges,
            motifs,
        },
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GeneratorError + '_ {
    move |source| GeneratorError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `nodes.jsonl`, `edges.jsonl`, `taxonomy_<dim>.json`,
/// `ground_truth.json` and a `cube.conf` that builds the dataset.
pub fn write_dataset(ds: &GeneratedDataset, dir: &Path) -> Result<(), GeneratorError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let open = |name: &str| -> Result<BufWriter<fs::File>, GeneratorError> {
        let p = dir.join(name);
        Ok(BufWriter::new(fs::File::create(&p).map_err(io_err(&p))?))
    };
    let mut f = open("nodes.jsonl")?;
    ds.network.write_nodes_jsonl(&mut f)?;
    f.flush().map_err(io_err(dir))?;
    let mut f = open("edges.jsonl")?;
    ds.network.write_edges_jsonl(&mut f)?;
    f.flush().map_err(io_err(dir))?;
    let mut conf = String::from("# generated dataset\nnodes = nodes.jsonl\nedges = edges.jsonl\n");
    for (name, root) in &ds.taxonomies {
        let file = format!("taxonomy_{name}.json");
        let mut f = open(&file)?;
        serde_json::to_writer_pretty(&mut f, root)?;
        f.write_all(b"\n").map_err(io_err(dir))?;
        conf.push_str(&format!("dimension.{name} = {file}\n"));
    }
    conf.push_str(&format!("path_seed = {}\neigen_seed = {}\n", ds.config.seed, ds.config.seed));
    let mut f = open("ground_truth.json")?;
    serde_json::to_writer_pretty(&mut f, &ds.truth)?;
    f.write_all(b"\n").map_err(io_err(dir))?;
    let p = dir.join("cube.conf");
    fs::write(&p, conf).map_err(io_err(&p))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cell(p_intra: f64) -> GeneratorConfig {
        GeneratorConfig {
            seed: 1,
            dimensions: vec![DimensionSpec {
                name: "d".into(),
                branching: vec![1],
                ordered: false,
                drift: None,
            }],
            nodes_per_leaf_cell: 12,
            p_intra,
            p_inter: 0.0,
            node_types: default_node_types(),
            seeds_per_leaf: 2,
            motifs: Vec::new(),
        }
    }

    #[test]
    fn full_intra_probability_gives_complete_graph() {
        let ds = generate(&one_cell(1.0)).unwrap();
        assert_eq!(ds.network.edge_count(), 12 * 11 / 2);
    }

    #[test]
    fn no_inter_edges_keeps_cells_apart() {
        let mut cfg = GeneratorConfig::default();
        cfg.p_inter = 0.0;
        let ds = generate(&cfg).unwrap();
        let (_, count) = ds.network.undirected_projection().connected_components();
        assert!(count >= ds.truth.cells.len());
        assert_eq!(ds.truth.inter_edges, 0);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let a = generate(&GeneratorConfig::default()).unwrap();
        let b = generate(&GeneratorConfig::default()).unwrap();
        assert_eq!(a.network, b.network);
        assert_eq!(a.truth, b.truth);
    }

    #[test]
    fn pair_sampling_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut count = 0usize;
        sample_pairs(&mut rng, 1000, 0.01, |i, j| {
            assert!(j < i);
            count += 1;
        });
        let expected = 0.01 * 1000.0 * 999.0 / 2.0;
        assert!((count as f64 - expected).abs() < 5.0 * expected.sqrt());
    }

    #[test]
    fn infeasible_configs() {
        let mut c = one_cell(0.5);
        c.p_inter = 1.5;
        assert!(matches!(generate(&c), Err(GeneratorError::Infeasible(_))));
        let mut c = one_cell(0.5);
        c.motifs.push(MotifSpec {
            cell: vec!["d-1".into()],
            node_types: vec!["entity".into(); 13],
            edges: vec![(0, 1)],
            edge_type: "m".into(),
            copies: 1,
        });
        assert!(matches!(generate(&c), Err(GeneratorError::Infeasible(_))));
        let mut c = one_cell(0.5);
        c.dimensions[0].drift = Some(0.1);
        assert!(matches!(generate(&c), Err(GeneratorError::Infeasible(_))));
    }

    #[test]
    fn taxonomy_ids_and_truth() {
        let ds = generate(&GeneratorConfig::default()).unwrap();
        let (name, root) = &ds.taxonomies[0];
        assert_eq!(name, "topic");
        assert_eq!(root.children.len(), 3);
        assert_eq!(root.children[0].children[1].id, "topic-1.2");
        assert!(ds.taxonomies[1].1.ordered);
        assert_eq!(ds.truth.cells.len(), 24);
        assert_eq!(ds.truth.motifs[0].copies.len(), 4);
    }
}
