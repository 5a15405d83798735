//! Top-k retrieval of cells covering a network query.
//!
//! A cell `c` scores `coverage(c) * precision(c)^gamma` where coverage counts
//! the query nodes and query edges inside `c` and precision is the fraction of
//! `c`'s members that are query nodes. Coverage never grows under refinement
//! and `precision^gamma <= 1`, so `coverage(c)` bounds the score of `c` and of
//! every cell below it. The search expands the lattice best-first by that
//! bound and stops once the bound falls below the current k-th best score.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::Allocation;
use crate::cube::{CellCoordinate, CubeLattice};
use crate::graph::HeterogeneousNetwork;
use crate::olap::{profile_within, Cell, ProfileIndex};

pub const DEFAULT_GAMMA: f64 = 0.25;

#[derive(Debug, Error, PartialEq)]
pub enum BacktrackError {
    #[error("query has no nodes")]
    EmptyQuery,
    #[error("query edge ({0}, {1}) has an endpoint outside the query nodes")]
    DanglingEdge(String, String),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("gamma must be a non-negative number, got {0}")]
    InvalidGamma(f64),
}

/// Query file schema: `{"nodes":[...],"edges":[["u","v"],...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkQuery {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

impl NetworkQuery {
    pub fn new(nodes: Vec<String>, edges: Vec<(String, String)>) -> Result<Self, BacktrackError> {
        let mut q = Self { nodes, edges };
        q.normalize()?;
        Ok(q)
    }

    /// Deduplicates nodes, orients and deduplicates edges, drops self-pairs.
    pub fn normalize(&mut self) -> Result<(), BacktrackError> {
        self.nodes.sort();
        self.nodes.dedup();
        if self.nodes.is_empty() {
            return Err(BacktrackError::EmptyQuery);
        }
        let mut edges = Vec::new();
        for (u, v) in &self.edges {
            if self.nodes.binary_search(u).is_err() || self.nodes.binary_search(v).is_err() {
                return Err(BacktrackError::DanglingEdge(u.clone(), v.clone()));
            }
            if u == v {
                continue;
            }
            edges.push(if u < v { (u.clone(), v.clone()) } else { (v.clone(), u.clone()) });
        }
        edges.sort();
        edges.dedup();
        self.edges = edges;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellHit {
    pub coordinate: String,
    pub score: f64,
    pub coverage: f64,
    pub precision: f64,
    pub member_count: usize,
}

/// `coverage * precision^gamma` from raw counts.
pub fn hit_from_counts(
    coordinate: String,
    query_nodes_in: usize,
    query_edges_in: usize,
    query_size: usize,
    member_count: usize,
    gamma: f64,
) -> CellHit {
    let coverage = (query_nodes_in + query_edges_in) as f64 / query_size as f64;
    let precision = if member_count == 0 {
        0.0
    } else {
        query_nodes_in as f64 / member_count as f64
    };
    CellHit {
        coordinate,
        score: coverage * precision.powf(gamma),
        coverage,
        precision,
        member_count,
    }
}

fn check_gamma(gamma: f64) -> Result<(), BacktrackError> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(BacktrackError::InvalidGamma(gamma))
    }
}

/// Scores a materialized cell by direct set intersection. Query edges match
/// any edge between the two nodes regardless of type or direction.
pub fn score_cell(
    cell: &Cell,
    coordinate: String,
    q: &NetworkQuery,
    gamma: f64,
) -> Result<CellHit, BacktrackError> {
    if q.nodes.is_empty() {
        return Err(BacktrackError::EmptyQuery);
    }
    check_gamma(gamma)?;
    let net = &cell.subnetwork;
    let nodes_in = q.nodes.iter().filter(|id| net.node_index(id).is_some()).count();
    let edges_in = q
        .edges
        .iter()
        .filter(|(u, v)| match (net.node_index(u), net.node_index(v)) {
            (Some(a), Some(b)) => net.neighbors(a).binary_search(&b).is_ok(),
            _ => false,
        })
        .count();
    Ok(hit_from_counts(
        coordinate,
        nodes_in,
        edges_in,
        q.nodes.len() + q.edges.len(),
        net.node_count(),
        gamma,
    ))
}

/// Descending score, ties by canonical coordinate string.
pub fn hit_order(a: &CellHit, b: &CellHit) -> Ordering {
    b.score
        .partial_cmp(&a.score)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.coordinate.cmp(&b.coordinate))
}

struct Frontier {
    bound: f64,
    key: String,
    coord: CellCoordinate,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound
            .partial_cmp(&other.bound)
            .unwrap_or(Ordering::Equal)
            .then_with(|| other.key.cmp(&self.key))
    }
}

/// Search statistics, reported alongside results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub expanded: usize,
    pub scored: usize,
}

pub struct Backtracker<'a> {
    lattice: &'a CubeLattice,
    profiles: &'a ProfileIndex,
    /// Allocation profile of each query node present in the base.
    query_profiles: Vec<Vec<usize>>,
    /// Query edges present in the base, as pairs of query-profile slots.
    query_edges: Vec<(usize, usize)>,
    query_size: usize,
}

impl<'a> Backtracker<'a> {
    pub fn new(
        lattice: &'a CubeLattice,
        allocation: &Allocation,
        profiles: &'a ProfileIndex,
        base: &HeterogeneousNetwork,
        q: &NetworkQuery,
    ) -> Result<Self, BacktrackError> {
        if q.nodes.is_empty() {
            return Err(BacktrackError::EmptyQuery);
        }
        let mut slot = std::collections::HashMap::new();
        let mut query_profiles = Vec::new();
        for id in &q.nodes {
            if let Some(u) = base.node_index(id) {
                slot.insert(id.as_str(), (query_profiles.len(), u));
                query_profiles.push(allocation.profile(u));
            }
        }
        let query_edges = q
            .edges
            .iter()
            .filter_map(|(a, b)| {
                let (&(sa, ua), &(sb, ub)) = (slot.get(a.as_str())?, slot.get(b.as_str())?);
                base.neighbors(ua).binary_search(&ub).ok().map(|_| (sa, sb))
            })
            .collect();
        Ok(Self {
            lattice,
            profiles,
            query_profiles,
            query_edges,
            query_size: q.nodes.len() + q.edges.len(),
        })
    }

    /// Returns `(coverage numerator, member count)`.
    fn counts(&self, coord: &CellCoordinate) -> (usize, usize, usize) {
        let inside: Vec<bool> = self
            .query_profiles
            .iter()
            .map(|p| profile_within(self.lattice, p, coord))
            .collect();
        let nodes_in = inside.iter().filter(|&&b| b).count();
        let edges_in = self
            .query_edges
            .iter()
            .filter(|&&(a, b)| inside[a] && inside[b])
            .count();
        (nodes_in, edges_in, self.profiles.member_count(self.lattice, coord))
    }

    pub fn score(&self, coord: &CellCoordinate, gamma: f64) -> CellHit {
        let (n, e, m) = self.counts(coord);
        hit_from_counts(self.lattice.canonical_string(coord), n, e, self.query_size, m, gamma)
    }

    /// Best-first top-k over the non-empty cells of the lattice.
    pub fn topk(&self, k: usize, gamma: f64) -> Result<(Vec<CellHit>, SearchStats), BacktrackError> {
        if k == 0 {
            return Err(BacktrackError::ZeroK);
        }
        check_gamma(gamma)?;
        let mut stats = SearchStats::default();
        let mut best: Vec<CellHit> = Vec::with_capacity(k + 1);
        let mut seen: HashSet<CellCoordinate> = HashSet::new();
        let mut heap = BinaryHeap::new();
        let top = self.lattice.top();
        let (n, e, _) = self.counts(&top);
        heap.push(Frontier {
            bound: (n + e) as f64 / self.query_size as f64,
            key: self.lattice.canonical_string(&top),
            coord: top.clone(),
        });
        seen.insert(top);

        let threshold = |best: &Vec<CellHit>| {
            if best.len() == k {
                Some(best[k - 1].score)
            } else {
                None
            }
        };

        while let Some(item) = heap.pop() {
            if matches!(threshold(&best), Some(t) if item.bound < t) {
                break;
            }
            stats.expanded += 1;
            let (n, e, m) = self.counts(&item.coord);
            if m == 0 {
                // every refinement of an empty cell is empty
                continue;
            }
            stats.scored += 1;
            let hit = hit_from_counts(item.key, n, e, self.query_size, m, gamma);
            let pos = best
                .binary_search_by(|h| hit_order(h, &hit))
                .unwrap_or_else(|p| p);
            if pos < k {
                best.insert(pos, hit);
                best.truncate(k);
            }
            if matches!(threshold(&best), Some(t) if item.bound < t) {
                continue;
            }
            for child in self.lattice.children(&item.coord) {
                if seen.insert(child.clone()) {
                    let (cn, ce, _) = self.counts(&child);
                    heap.push(Frontier {
                        bound: (cn + ce) as f64 / self.query_size as f64,
                        key: self.lattice.canonical_string(&child),
                        coord: child,
                    });
                }
            }
        }
        Ok((best, stats))
    }
}
