//! Cell materialization, roll-up/drill-down and structural summaries.

use std::collections::{BTreeMap, VecDeque};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::Allocation;
use crate::cube::{CellCoordinate, CubeError, CubeLattice};
use crate::graph::{HeterogeneousNetwork, UndirectedGraph};

/// Largest component size for which path length is computed exactly.
pub const EXACT_PATH_LIMIT: usize = 5000;
/// BFS sources sampled above [`EXACT_PATH_LIMIT`].
pub const PATH_SAMPLE_SOURCES: usize = 1000;

#[derive(Debug, Error, PartialEq)]
pub enum OlapError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("unknown super-node `{0}`")]
    UnknownSuperNode(String),
    #[error("dimension `{0}` is fixed to a leaf; nothing to contrast")]
    FixedLeaf(String),
    #[error("no values of `{dimension}` at level {level} below the fixed value")]
    NoSiblings { dimension: String, level: usize },
    #[error("every sibling cell along `{0}` is empty")]
    AllSiblingsEmpty(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub coordinate: CellCoordinate,
    /// Sorted base node indices; the i-th node of `subnetwork` is `members[i]`.
    pub members: Vec<usize>,
    pub subnetwork: HeterogeneousNetwork,
}

impl Cell {
    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Whether `node`'s allocation lies at or below `coord` in every dimension.
pub fn is_member(
    lattice: &CubeLattice,
    allocation: &Allocation,
    coord: &CellCoordinate,
    node: usize,
) -> bool {
    coord.0.iter().enumerate().all(|(d, &v)| {
        v == 0 || lattice.dimension(d).is_descendant_or_equal(allocation.dims[d].values[node], v)
    })
}

pub fn cell_members(
    lattice: &CubeLattice,
    allocation: &Allocation,
    coord: &CellCoordinate,
) -> Vec<usize> {
    (0..allocation.node_count())
        .filter(|&u| is_member(lattice, allocation, coord, u))
        .collect()
}

pub fn materialize_cell(
    coord: &CellCoordinate,
    lattice: &CubeLattice,
    allocation: &Allocation,
    base: &HeterogeneousNetwork,
) -> Cell {
    let members = if coord.0.iter().all(|&v| v == 0) {
        (0..base.node_count()).collect()
    } else {
        cell_members(lattice, allocation, coord)
    };
    let subnetwork = if members.len() == base.node_count() {
        base.clone()
    } else {
        base.induced_by_indices(&members)
    };
    Cell {
        coordinate: coord.clone(),
        members,
        subnetwork,
    }
}

/// Histogram of distinct allocation profiles; counts cell members without
/// scanning the node set.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileIndex {
    profiles: Vec<(Vec<usize>, usize)>,
}

impl ProfileIndex {
    pub fn new(allocation: &Allocation) -> Self {
        let mut counts: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for u in 0..allocation.node_count() {
            *counts.entry(allocation.profile(u)).or_insert(0) += 1;
        }
        Self {
            profiles: counts.into_iter().collect(),
        }
    }

    pub fn profiles(&self) -> &[(Vec<usize>, usize)] {
        &self.profiles
    }

    pub fn member_count(&self, lattice: &CubeLattice, coord: &CellCoordinate) -> usize {
        self.profiles
            .iter()
            .filter(|(p, _)| profile_within(lattice, p, coord))
            .map(|(_, c)| c)
            .sum()
    }
}

/// Whether an allocation profile lies at or below `coord`.
pub fn profile_within(lattice: &CubeLattice, profile: &[usize], coord: &CellCoordinate) -> bool {
    coord
        .0
        .iter()
        .zip(profile)
        .enumerate()
        .all(|(d, (&c, &p))| c == 0 || lattice.dimension(d).is_descendant_or_equal(p, c))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperNode {
    pub id: String,
    pub name: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperEdge {
    pub a: String,
    pub b: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedGraph {
    pub dimension: String,
    pub level: usize,
    pub super_nodes: Vec<SuperNode>,
    /// Undirected; `a == b` marks the intra-group self-loop.
    pub super_edges: Vec<SuperEdge>,
}

impl AggregatedGraph {
    pub fn total_weight(&self) -> f64 {
        self.super_edges.iter().map(|e| e.weight).sum()
    }
}

/// Groups the cell's nodes by their allocated value's ancestor at `level` and
/// sums edge weights between (and within) groups.
pub fn rollup(
    cell: &Cell,
    lattice: &CubeLattice,
    allocation: &Allocation,
    dimension: &str,
    level: usize,
) -> Result<AggregatedGraph, OlapError> {
    let d = lattice.dimension_index(dimension)?;
    let tax = lattice.dimension(d);
    if level > tax.depth() {
        return Err(CubeError::LevelTooDeep {
            dimension: dimension.into(),
            level,
            depth: tax.depth(),
        }
        .into());
    }
    let group: Vec<usize> = cell
        .members
        .iter()
        .map(|&u| tax.ancestor_at(allocation.dims[d].values[u], level))
        .collect();
    let mut members: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, &g) in group.iter().enumerate() {
        members
            .entry(g)
            .or_default()
            .push(cell.subnetwork.node(i).id.clone());
    }
    let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in cell.subnetwork.edges() {
        let (ga, gb) = (group[e.src], group[e.dst]);
        let key = if ga <= gb { (ga, gb) } else { (gb, ga) };
        *weights.entry(key).or_insert(0.0) += e.weight;
    }
    Ok(AggregatedGraph {
        dimension: dimension.into(),
        level,
        super_nodes: members
            .into_iter()
            .map(|(g, m)| SuperNode {
                id: tax.value(g).id.clone(),
                name: tax.value(g).name.clone(),
                members: m,
            })
            .collect(),
        super_edges: weights
            .into_iter()
            .map(|((a, b), w)| SuperEdge {
                a: tax.value(a).id.clone(),
                b: tax.value(b).id.clone(),
                weight: w,
            })
            .collect(),
    })
}

/// Base subnetwork induced by a super-node's provenance set.
pub fn drilldown(
    agg: &AggregatedGraph,
    base: &HeterogeneousNetwork,
    super_node: &str,
) -> Result<HeterogeneousNetwork, OlapError> {
    let sn = agg
        .super_nodes
        .iter()
        .find(|s| s.id == super_node)
        .ok_or_else(|| OlapError::UnknownSuperNode(super_node.into()))?;
    base.induced_subnetwork(sn.members.iter().map(String::as_str))
        .map_err(|_| OlapError::UnknownSuperNode(super_node.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeStats {
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSampling {
    pub seed: u64,
    pub sources: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub triangle_count: u64,
    pub global_clustering: f64,
    pub avg_local_clustering: f64,
    /// Absent when the largest component has fewer than two nodes.
    pub characteristic_path_length: Option<f64>,
    pub largest_component_size: usize,
    pub component_count: usize,
    pub degree: DegreeStats,
    /// Present when path length was estimated from sampled sources.
    pub path_sampling: Option<PathSampling>,
}

/// Triangles per node via sorted-neighbor intersection.
pub fn triangles_per_node(g: &UndirectedGraph) -> Vec<u64> {
    let n = g.node_count();
    let partial: Vec<Vec<(usize, u64)>> = (0..n)
        .into_par_iter()
        .map(|u| {
            let mut hits = Vec::new();
            let nu = g.neighbors(u);
            for &v in nu.iter().filter(|&&v| v > u) {
                let nv = g.neighbors(v);
                let (mut i, mut j) = (0, 0);
                while i < nu.len() && j < nv.len() {
                    match nu[i].cmp(&nv[j]) {
                        std::cmp::Ordering::Less => i += 1,
                        std::cmp::Ordering::Greater => j += 1,
                        std::cmp::Ordering::Equal => {
                            if nu[i] > v {
                                hits.push((nu[i], 1));
                                hits.push((v, 1));
                                hits.push((u, 1));
                            }
                            i += 1;
                            j += 1;
                        }
                    }
                }
            }
            hits
        })
        .collect();
    let mut t = vec![0u64; n];
    for hits in partial {
        for (x, c) in hits {
            t[x] += c;
        }
    }
    t
}

fn bfs_distance_sum(g: &UndirectedGraph, source: usize, dist: &mut [u32]) -> (u64, u64) {
    dist.iter_mut().for_each(|d| *d = u32::MAX);
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    let (mut sum, mut reached) = (0u64, 0u64);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbors(u) {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                sum += dist[v] as u64;
                reached += 1;
                queue.push_back(v);
            }
        }
    }
    (sum, reached)
}

/// Mean shortest-path length over ordered pairs of the largest component.
fn path_length(g: &UndirectedGraph, component: &[usize], seed: u64) -> (Option<f64>, Option<PathSampling>) {
    if component.len() < 2 {
        return (None, None);
    }
    let (sources, sampling): (Vec<usize>, _) = if component.len() <= EXACT_PATH_LIMIT {
        (component.to_vec(), None)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked: Vec<usize> = sample(&mut rng, component.len(), PATH_SAMPLE_SOURCES)
            .into_iter()
            .map(|i| component[i])
            .collect();
        picked.sort_unstable();
        (
            picked,
            Some(PathSampling {
                seed,
                sources: PATH_SAMPLE_SOURCES,
            }),
        )
    };
    let n = g.node_count();
    let (sum, pairs) = sources
        .par_iter()
        .map_init(
            || vec![u32::MAX; n],
            |dist, &s| bfs_distance_sum(g, s, dist),
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    (Some(sum as f64 / pairs as f64), sampling)
}

pub fn summarize(net: &HeterogeneousNetwork, path_seed: u64) -> NetworkSummary {
    summarize_graph(&net.undirected_projection(), path_seed)
}

pub fn summarize_graph(g: &UndirectedGraph, path_seed: u64) -> NetworkSummary {
    let n = g.node_count();
    let tri = triangles_per_node(g);
    let triangle_count = tri.iter().sum::<u64>() / 3;
    let mut wedges = 0u64;
    let mut local_sum = 0.0;
    for u in 0..n {
        let d = g.degree(u) as u64;
        let w = d * d.saturating_sub(1) / 2;
        wedges += w;
        if w > 0 {
            local_sum += tri[u] as f64 / w as f64;
        }
    }
    let (_, component_count) = g.connected_components();
    let component = g.largest_component();
    let (cpl, sampling) = path_length(g, &component, path_seed);

    let mut degrees: Vec<usize> = (0..n).map(|u| g.degree(u)).collect();
    degrees.sort_unstable();
    let degree = if n == 0 {
        DegreeStats {
            min: 0.0,
            median: 0.0,
            mean: 0.0,
            max: 0.0,
        }
    } else {
        let median = if n % 2 == 1 {
            degrees[n / 2] as f64
        } else {
            (degrees[n / 2 - 1] + degrees[n / 2]) as f64 / 2.0
        };
        DegreeStats {
            min: degrees[0] as f64,
            median,
            mean: degrees.iter().sum::<usize>() as f64 / n as f64,
            max: degrees[n - 1] as f64,
        }
    };
    NetworkSummary {
        node_count: n,
        edge_count: g.edge_count(),
        triangle_count,
        global_clustering: if wedges > 0 {
            3.0 * triangle_count as f64 / wedges as f64
        } else {
            0.0
        },
        avg_local_clustering: if n > 0 { local_sum / n as f64 } else { 0.0 },
        characteristic_path_length: cpl,
        largest_component_size: component.len(),
        component_count,
        degree,
        path_sampling: sampling,
    }
}

/// Names of the statistics reported in a contrast table, in row order.
pub const CONTRAST_STATISTICS: [&str; 8] = [
    "node_count",
    "edge_count",
    "triangle_count",
    "global_clustering",
    "avg_local_clustering",
    "characteristic_path_length",
    "component_count",
    "mean_degree",
];

fn statistic(s: &NetworkSummary, name: &str) -> Option<f64> {
    Some(match name {
        "node_count" => s.node_count as f64,
        "edge_count" => s.edge_count as f64,
        "triangle_count" => s.triangle_count as f64,
        "global_clustering" => s.global_clustering,
        "avg_local_clustering" => s.avg_local_clustering,
        "characteristic_path_length" => return s.characteristic_path_length,
        "component_count" => s.component_count as f64,
        "mean_degree" => s.degree.mean,
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatEntry {
    pub name: String,
    pub value: Option<f64>,
    /// Only for ordered dimensions; absent on the first row.
    pub delta_vs_previous: Option<f64>,
    pub ratio_vs_mean: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub coordinate: String,
    pub value_id: String,
    pub empty: bool,
    pub summary: NetworkSummary,
    pub stats: Vec<StatEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastTable {
    pub fixed: String,
    pub dimension: String,
    pub level: usize,
    pub ordered: bool,
    pub rows: Vec<ContrastRow>,
}

/// The coordinates contrasted by [`contrast_table`]: `fixed` with `dimension`
/// replaced by each of its descendants at depth `level`.
pub fn contrast_coordinates(
    lattice: &CubeLattice,
    fixed: &CellCoordinate,
    dimension: &str,
    level: usize,
) -> Result<Vec<CellCoordinate>, OlapError> {
    let d = lattice.dimension_index(dimension)?;
    let tax = lattice.dimension(d);
    if tax.is_leaf(fixed.0[d]) {
        return Err(OlapError::FixedLeaf(dimension.into()));
    }
    if level > tax.depth() {
        return Err(CubeError::LevelTooDeep {
            dimension: dimension.into(),
            level,
            depth: tax.depth(),
        }
        .into());
    }
    let values = tax.descendants_at_depth(fixed.0[d], level);
    if values.is_empty() || level <= tax.value(fixed.0[d]).depth {
        return Err(OlapError::NoSiblings {
            dimension: dimension.into(),
            level,
        });
    }
    Ok(values
        .into_iter()
        .map(|v| {
            let mut c = fixed.clone();
            c.0[d] = v;
            c
        })
        .collect())
}

/// Builds a contrast table from per-sibling summaries already computed for
/// the coordinates returned by [`contrast_coordinates`].
pub fn contrast_table(
    lattice: &CubeLattice,
    fixed: &CellCoordinate,
    dimension: &str,
    level: usize,
    siblings: &[(CellCoordinate, NetworkSummary)],
) -> Result<ContrastTable, OlapError> {
    let d = lattice.dimension_index(dimension)?;
    let tax = lattice.dimension(d);
    if siblings.iter().all(|(_, s)| s.node_count == 0) {
        return Err(OlapError::AllSiblingsEmpty(dimension.into()));
    }
    let ordered = tax.is_ordered();
    let mut means = Vec::new();
    for name in CONTRAST_STATISTICS {
        let vals: Vec<f64> = siblings
            .iter()
            .filter(|(_, s)| s.node_count > 0)
            .filter_map(|(_, s)| statistic(s, name))
            .collect();
        means.push(if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        });
    }
    let mut rows: Vec<ContrastRow> = Vec::new();
    for (i, (coord, summary)) in siblings.iter().enumerate() {
        let stats = CONTRAST_STATISTICS
            .iter()
            .zip(&means)
            .map(|(&name, mean)| {
                let value = statistic(summary, name);
                let delta_vs_previous = if ordered && i > 0 {
                    match (value, statistic(&siblings[i - 1].1, name)) {
                        (Some(a), Some(b)) => Some(a - b),
                        _ => None,
                    }
                } else {
                    None
                };
                let ratio_vs_mean = match (value, mean) {
                    (Some(v), Some(m)) if *m != 0.0 => Some(v / m),
                    (Some(v), Some(_)) if v == 0.0 => Some(1.0),
                    _ => None,
                };
                StatEntry {
                    name: name.to_string(),
                    value,
                    delta_vs_previous,
                    ratio_vs_mean,
                }
            })
            .collect();
        rows.push(ContrastRow {
            coordinate: lattice.canonical_string(coord),
            value_id: tax.value(coord.0[d]).id.clone(),
            empty: summary.node_count == 0,
            summary: summary.clone(),
            stats,
        });
    }
    Ok(ContrastTable {
        fixed: lattice.canonical_string(fixed),
        dimension: dimension.into(),
        level,
        ordered,
        rows,
    })
}
