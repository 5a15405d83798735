//! Query-specific network construction: a greedy union of cells covering a
//! node set, traded off against the union's size.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::Allocation;
use crate::cube::{CellCoordinate, CubeLattice};
use crate::graph::HeterogeneousNetwork;
use crate::olap::profile_within;

pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_RHO: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum LocalizeError {
    #[error("query node set is empty")]
    EmptyQuery,
    #[error("none of the query nodes exist in the network: {0:?}")]
    AllUnknown(Vec<String>),
    #[error("no candidate cell covers any query node")]
    NoCover,
    #[error("lambda must be finite and non-negative, got {0}")]
    InvalidLambda(f64),
    #[error("rho must lie in (0, 1], got {0}")]
    InvalidRho(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizeParams {
    pub lambda: f64,
    pub rho: f64,
    pub level: usize,
}

impl Default for LocalizeParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            rho: DEFAULT_RHO,
            level: 1,
        }
    }
}

/// A candidate cell with its sorted base members.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub coordinate: CellCoordinate,
    pub key: String,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub coordinate: String,
    pub gain: f64,
    pub coverage: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub chosen: Vec<String>,
    pub coverage: f64,
    pub union_nodes: Vec<usize>,
    pub objective: f64,
    pub unknown: Vec<String>,
    pub steps: Vec<GreedyStep>,
    pub merged: HeterogeneousNetwork,
}

/// Cells at `level` (every dimension truncated to that depth) that contain
/// at least one node, plus their lattice parents. Sorted by canonical string.
pub fn candidate_cells(lattice: &CubeLattice, allocation: &Allocation, level: usize) -> Vec<Candidate> {
    let mut coords: BTreeSet<CellCoordinate> = BTreeSet::new();
    for u in 0..allocation.node_count() {
        let truncated = CellCoordinate(
            allocation
                .profile(u)
                .iter()
                .enumerate()
                .map(|(d, &v)| lattice.dimension(d).ancestor_at(v, level))
                .collect(),
        );
        coords.insert(truncated);
    }
    let base: Vec<CellCoordinate> = coords.iter().cloned().collect();
    for c in &base {
        coords.extend(lattice.parents(c));
    }
    let profiles: Vec<Vec<usize>> = (0..allocation.node_count()).map(|u| allocation.profile(u)).collect();
    let mut out: Vec<Candidate> = coords
        .into_par_iter()
        .map(|c| {
            let members = profiles
                .iter()
                .enumerate()
                .filter(|(_, p)| profile_within(lattice, p, &c))
                .map(|(u, _)| u)
                .collect();
            Candidate {
                key: lattice.canonical_string(&c),
                coordinate: c,
                members,
            }
        })
        .collect();
    out.sort_by(|a, b| a.key.cmp(&b.key));
    out
}

/// f(S) = |Q ∩ U| / |Q| − λ |U| / |V|.
pub fn objective(query_hits: usize, query_len: usize, union_len: usize, base_len: usize, lambda: f64) -> f64 {
    query_hits as f64 / query_len as f64 - lambda * union_len as f64 / base_len as f64
}

pub fn localize(
    base: &HeterogeneousNetwork,
    lattice: &CubeLattice,
    allocation: &Allocation,
    query: &[String],
    params: &LocalizeParams,
) -> Result<LocalizationResult, LocalizeError> {
    let candidates = candidate_cells(lattice, allocation, params.level);
    localize_over(base, &candidates, query, params)
}

/// Greedy selection over a fixed candidate pool.
pub fn localize_over(
    base: &HeterogeneousNetwork,
    candidates: &[Candidate],
    query: &[String],
    params: &LocalizeParams,
) -> Result<LocalizationResult, LocalizeError> {
    if !(params.lambda.is_finite() && params.lambda >= 0.0) {
        return Err(LocalizeError::InvalidLambda(params.lambda));
    }
    if !(params.rho > 0.0 && params.rho <= 1.0) {
        return Err(LocalizeError::InvalidRho(params.rho));
    }
    if query.is_empty() {
        return Err(LocalizeError::EmptyQuery);
    }
    let mut unknown = BTreeSet::new();
    let mut is_query = vec![false; base.node_count()];
    for id in query {
        match base.node_index(id) {
            Some(i) => is_query[i] = true,
            None => {
                unknown.insert(id.clone());
            }
        }
    }
    let unknown: Vec<String> = unknown.into_iter().collect();
    let q_len = is_query.iter().filter(|&&b| b).count();
    if q_len == 0 {
        return Err(LocalizeError::AllUnknown(unknown));
    }
    if !candidates.iter().any(|c| c.members.iter().any(|&u| is_query[u])) {
        return Err(LocalizeError::NoCover);
    }
    let n = base.node_count();
    let mut in_union = vec![false; n];
    let mut union_len = 0usize;
    let mut hits = 0usize;
    let mut used = vec![false; candidates.len()];
    let mut chosen = Vec::new();
    let mut steps = Vec::new();
    let mut current = 0.0;
    while (hits as f64 / q_len as f64) < params.rho {
        let best = candidates
            .par_iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, c)| {
                let (mut dq, mut du) = (0usize, 0usize);
                for &u in &c.members {
                    if !in_union[u] {
                        du += 1;
                        if is_query[u] {
                            dq += 1;
                        }
                    }
                }
                (i, dq as f64 / q_len as f64 - params.lambda * du as f64 / n as f64)
            })
            .reduce_with(|a, b| {
                if b.1 > a.1 || (b.1 == a.1 && candidates[b.0].key < candidates[a.0].key) {
                    b
                } else {
                    a
                }
            });
        let Some((i, gain)) = best else { break };
        if gain <= 0.0 {
            break;
        }
        used[i] = true;
        for &u in &candidates[i].members {
            if !in_union[u] {
                in_union[u] = true;
                union_len += 1;
                if is_query[u] {
                    hits += 1;
                }
            }
        }
        current = objective(hits, q_len, union_len, n, params.lambda);
        chosen.push(candidates[i].key.clone());
        steps.push(GreedyStep {
            coordinate: candidates[i].key.clone(),
            gain,
            coverage: hits as f64 / q_len as f64,
            objective: current,
        });
    }
    let union_nodes: Vec<usize> = (0..n).filter(|&u| in_union[u]).collect();
    Ok(LocalizationResult {
        chosen,
        coverage: hits as f64 / q_len as f64,
        merged: base.induced_by_indices(&union_nodes),
        union_nodes,
        objective: current,
        unknown,
        steps,
    })
}
