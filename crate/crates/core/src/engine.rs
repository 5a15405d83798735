//! The assembled cube: base network, lattice and allocation, plus caches of
//! materialized cells, summaries, embeddings and alignments. All query
//! methods take `&self`; caches sit behind read-write locks.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use parking_lot::RwLock;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocator::{allocate, AllocError, Allocation, PropagationParams};
use crate::backtrack::{BacktrackError, Backtracker, CellHit, NetworkQuery, SearchStats, DEFAULT_GAMMA};
use crate::cube::{CellCoordinate, CubeError, CubeLattice, Taxonomy};
use crate::graph::{GraphError, HeterogeneousNetwork};
use crate::localize::{localize, LocalizationResult, LocalizeError, LocalizeParams, DEFAULT_LAMBDA, DEFAULT_RHO};
use crate::olap::{
    contrast_coordinates, contrast_table, drilldown, materialize_cell, rollup, summarize, AggregatedGraph, Cell,
    ContrastTable, NetworkSummary, OlapError, ProfileIndex,
};
use crate::pattern::{rank_patterns, LabeledGraph, MinerConfig, MinerError, PatternWeights, ScoredPattern};
use crate::proximity::{
    align_cells, cosine, embed_network, nearest, AlignmentTransform, CellEmbedding, Neighbor, ProximityError,
    DEFAULT_DIM,
};
use crate::spectral::DEFAULT_TOLERANCE;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Olap(#[from] OlapError),
    #[error(transparent)]
    Backtrack(#[from] BacktrackError),
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Localize(#[from] LocalizeError),
    #[error(transparent)]
    Proximity(#[from] ProximityError),
    #[error("{0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub propagation: PropagationParams,
    pub gamma: f64,
    pub lambda: f64,
    pub rho: f64,
    pub localize_level: usize,
    pub embed_dim: usize,
    pub eigen_seed: u64,
    pub eigen_tol: f64,
    pub path_seed: u64,
    pub weights: PatternWeights,
    pub min_support: usize,
    pub max_edges: usize,
    pub max_embeddings: usize,
    /// Precompute summaries of every populated allocation profile at build.
    pub summarize_leaf_cells: bool,
    /// Precompute embeddings of the same cells at build.
    pub embed_leaf_cells: bool,
}

impl Default for EngineParams {
    fn default() -> Self {
        let miner = MinerConfig::default();
        Self {
            propagation: PropagationParams::default(),
            gamma: DEFAULT_GAMMA,
            lambda: DEFAULT_LAMBDA,
            rho: DEFAULT_RHO,
            localize_level: 1,
            embed_dim: DEFAULT_DIM,
            eigen_seed: 42,
            eigen_tol: DEFAULT_TOLERANCE,
            path_seed: 42,
            weights: PatternWeights::default(),
            min_support: miner.min_support,
            max_edges: miner.max_edges,
            max_embeddings: miner.max_embeddings,
            summarize_leaf_cells: true,
            embed_leaf_cells: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityAnswer {
    pub cell: String,
    pub u: String,
    pub v: String,
    pub proximity: f64,
    /// Cells each vector was taken from, ending in `cell`.
    pub path_u: Vec<String>,
    pub path_v: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborAnswer {
    pub cell: String,
    pub node: String,
    pub path: Vec<String>,
    pub neighbors: Vec<Neighbor>,
}

#[derive(Debug, Default)]
struct Caches {
    cells: RwLock<HashMap<CellCoordinate, Arc<Cell>>>,
    summaries: RwLock<BTreeMap<CellCoordinate, Arc<NetworkSummary>>>,
    embeddings: RwLock<BTreeMap<CellCoordinate, Arc<CellEmbedding>>>,
    alignments: RwLock<HashMap<(CellCoordinate, CellCoordinate), Arc<AlignmentTransform>>>,
}

pub struct CubeEngine {
    network: HeterogeneousNetwork,
    lattice: CubeLattice,
    allocation: Allocation,
    params: EngineParams,
    profiles: ProfileIndex,
    caches: Caches,
}

impl CubeEngine {
    /// Allocates the network and precomputes the configured caches.
    pub fn build(network: HeterogeneousNetwork, taxonomies: Vec<Taxonomy>, params: EngineParams) -> Result<Self, EngineError> {
        let lattice = CubeLattice::new(taxonomies)?;
        let allocation = allocate(&network, &lattice, &params.propagation)?;
        let engine = Self::from_parts(network, lattice, allocation, params);
        engine.precompute()?;
        Ok(engine)
    }

    pub fn from_parts(network: HeterogeneousNetwork, lattice: CubeLattice, allocation: Allocation, params: EngineParams) -> Self {
        let profiles = ProfileIndex::new(&allocation);
        Self {
            network,
            lattice,
            allocation,
            params,
            profiles,
            caches: Caches::default(),
        }
    }

    /// Coordinates of every populated allocation profile.
    pub fn profile_coordinates(&self) -> Vec<CellCoordinate> {
        self.profiles
            .profiles()
            .iter()
            .map(|(p, _)| CellCoordinate(p.clone()))
            .collect()
    }

    fn precompute(&self) -> Result<(), EngineError> {
        let coords = self.profile_coordinates();
        if self.params.summarize_leaf_cells {
            let computed: Vec<(CellCoordinate, NetworkSummary)> = coords
                .par_iter()
                .map(|c| {
                    let cell = materialize_cell(c, &self.lattice, &self.allocation, &self.network);
                    (c.clone(), summarize(&cell.subnetwork, self.params.path_seed))
                })
                .collect();
            self.insert_summaries(computed);
        }
        if self.params.embed_leaf_cells {
            let computed: Vec<CellEmbedding> = coords
                .par_iter()
                .filter_map(|c| self.compute_embedding(c).ok())
                .collect();
            self.insert_embeddings(computed)?;
        }
        Ok(())
    }

    pub fn insert_summaries(&self, entries: impl IntoIterator<Item = (CellCoordinate, NetworkSummary)>) {
        let mut w = self.caches.summaries.write();
        for (c, s) in entries {
            w.insert(c, Arc::new(s));
        }
    }

    pub fn insert_embeddings(&self, entries: impl IntoIterator<Item = CellEmbedding>) -> Result<(), EngineError> {
        let mut w = self.caches.embeddings.write();
        for e in entries {
            let c = self.lattice.parse_coordinate(&e.coordinate)?;
            w.insert(c, Arc::new(e));
        }
        Ok(())
    }

    pub fn cached_summaries(&self) -> Vec<(CellCoordinate, Arc<NetworkSummary>)> {
        self.caches.summaries.read().iter().map(|(c, s)| (c.clone(), s.clone())).collect()
    }

    pub fn cached_embeddings(&self) -> Vec<Arc<CellEmbedding>> {
        self.caches.embeddings.read().values().cloned().collect()
    }

    pub fn network(&self) -> &HeterogeneousNetwork {
        &self.network
    }

    pub fn lattice(&self) -> &CubeLattice {
        &self.lattice
    }

    pub fn allocation(&self) -> &Allocation {
        &self.allocation
    }

    pub fn params(&self) -> &EngineParams {
        &self.params
    }

    pub fn profiles(&self) -> &ProfileIndex {
        &self.profiles
    }

    pub fn parse(&self, text: &str) -> Result<CellCoordinate, EngineError> {
        Ok(self.lattice.parse_coordinate(text)?)
    }

    pub fn key(&self, c: &CellCoordinate) -> String {
        self.lattice.canonical_string(c)
    }

    pub fn cell(&self, c: &CellCoordinate) -> Arc<Cell> {
        if let Some(cell) = self.caches.cells.read().get(c) {
            return cell.clone();
        }
        let cell = Arc::new(materialize_cell(c, &self.lattice, &self.allocation, &self.network));
        self.caches.cells.write().entry(c.clone()).or_insert(cell).clone()
    }

    pub fn summary(&self, c: &CellCoordinate) -> Arc<NetworkSummary> {
        if let Some(s) = self.caches.summaries.read().get(c) {
            return s.clone();
        }
        let s = Arc::new(summarize(&self.cell(c).subnetwork, self.params.path_seed));
        self.caches.summaries.write().entry(c.clone()).or_insert(s).clone()
    }

    pub fn contrast(&self, fixed: &CellCoordinate, dimension: &str, level: usize) -> Result<ContrastTable, EngineError> {
        let coords = contrast_coordinates(&self.lattice, fixed, dimension, level)?;
        let sums: Vec<(CellCoordinate, NetworkSummary)> = coords
            .par_iter()
            .map(|c| (c.clone(), (*self.summary(c)).clone()))
            .collect();
        Ok(contrast_table(&self.lattice, fixed, dimension, level, &sums)?)
    }

    pub fn rollup(&self, c: &CellCoordinate, dimension: &str, level: usize) -> Result<AggregatedGraph, EngineError> {
        Ok(rollup(&self.cell(c), &self.lattice, &self.allocation, dimension, level)?)
    }

    pub fn drilldown(&self, c: &CellCoordinate, dimension: &str, level: usize, super_node: &str) -> Result<HeterogeneousNetwork, EngineError> {
        let agg = self.rollup(c, dimension, level)?;
        Ok(drilldown(&agg, &self.network, super_node)?)
    }

    pub fn backtrack(&self, query: &NetworkQuery, k: usize, gamma: f64) -> Result<(Vec<CellHit>, SearchStats), EngineError> {
        let bt = Backtracker::new(&self.lattice, &self.allocation, &self.profiles, &self.network, query)?;
        Ok(bt.topk(k, gamma)?)
    }

    /// Cells sharing `c`'s parent along `dimension` (default: the last bound
    /// dimension), `c` included; `[c]` at the top of the lattice.
    pub fn sibling_coordinates(&self, c: &CellCoordinate, dimension: Option<&str>) -> Result<Vec<CellCoordinate>, EngineError> {
        let d = match dimension {
            Some(name) => Some(self.lattice.dimension_index(name)?),
            None => (0..c.0.len()).rev().find(|&d| c.0[d] != 0),
        };
        let Some(d) = d else { return Ok(vec![c.clone()]) };
        let tax = self.lattice.dimension(d);
        let Some(parent) = tax.value(c.0[d]).parent else {
            return Ok(vec![c.clone()]);
        };
        Ok(tax
            .value(parent)
            .children
            .iter()
            .map(|&v| {
                let mut s = c.clone();
                s.0[d] = v;
                s
            })
            .collect())
    }

    pub fn patterns(
        &self,
        c: &CellCoordinate,
        cfg: &MinerConfig,
        weights: &PatternWeights,
        sibling_dimension: Option<&str>,
    ) -> Result<Vec<ScoredPattern>, EngineError> {
        let cell = LabeledGraph::from_network(&self.cell(c).subnetwork);
        let sibling_graphs: Vec<LabeledGraph> = self
            .sibling_coordinates(c, sibling_dimension)?
            .iter()
            .map(|s| LabeledGraph::from_network(&self.cell(s).subnetwork))
            .collect();
        let refs: Vec<&LabeledGraph> = sibling_graphs.iter().collect();
        Ok(rank_patterns(&cell, &refs, cfg, weights)?)
    }

    pub fn miner_config(&self, min_support: Option<usize>, max_edges: Option<usize>) -> MinerConfig {
        MinerConfig {
            min_support: min_support.unwrap_or(self.params.min_support),
            max_edges: max_edges.unwrap_or(self.params.max_edges),
            max_embeddings: self.params.max_embeddings,
        }
    }

    pub fn localize(&self, nodes: &[String], params: &LocalizeParams) -> Result<LocalizationResult, EngineError> {
        Ok(localize(&self.network, &self.lattice, &self.allocation, nodes, params)?)
    }

    fn compute_embedding(&self, c: &CellCoordinate) -> Result<CellEmbedding, EngineError> {
        Ok(embed_network(
            &self.key(c),
            &self.cell(c).subnetwork,
            self.params.embed_dim,
            self.params.eigen_seed,
            self.params.eigen_tol,
        )?)
    }

    pub fn embedding(&self, c: &CellCoordinate) -> Result<Arc<CellEmbedding>, EngineError> {
        if let Some(e) = self.caches.embeddings.read().get(c) {
            return Ok(e.clone());
        }
        let e = Arc::new(self.compute_embedding(c)?);
        Ok(self.caches.embeddings.write().entry(c.clone()).or_insert(e).clone())
    }

    pub fn alignment(&self, src: &CellCoordinate, dst: &CellCoordinate) -> Result<Arc<AlignmentTransform>, EngineError> {
        let key = (src.clone(), dst.clone());
        if let Some(t) = self.caches.alignments.read().get(&key) {
            return Ok(t.clone());
        }
        let lca = self.key(&self.lattice.lca(src, dst));
        let t = Arc::new(align_cells(&*self.embedding(src)?, &*self.embedding(dst)?, &lca)?);
        Ok(self.caches.alignments.write().entry(key).or_insert(t).clone())
    }

    /// The node's vector in `target`: its own if it is a member, else
    /// transferred from its home cell (full allocation profile) by direct
    /// alignment, else from the lowest common ancestor of home and target.
    pub fn vector_in(&self, node: &str, target: &CellCoordinate) -> Result<(Vec<f64>, Vec<String>), EngineError> {
        let idx = self
            .network
            .node_index(node)
            .ok_or_else(|| ProximityError::UnknownNode(node.to_string()))?;
        let emb = self.embedding(target)?;
        if let Some(v) = emb.vector(node) {
            return Ok((v?.to_vec(), vec![self.key(target)]));
        }
        let home = CellCoordinate(self.allocation.profile(idx));
        let lca = self.lattice.lca(&home, target);
        for src in [home, lca] {
            if let Ok(v) = self.transfer(node, &src, target) {
                return Ok((v, vec![self.key(&src), self.key(target)]));
            }
        }
        Err(ProximityError::Unreachable {
            node: node.to_string(),
            cell: self.key(target),
        }
        .into())
    }

    fn transfer(&self, node: &str, src: &CellCoordinate, dst: &CellCoordinate) -> Result<Vec<f64>, EngineError> {
        let emb = self.embedding(src)?;
        let v = emb
            .vector(node)
            .ok_or_else(|| ProximityError::UnknownNode(node.to_string()))??
            .to_vec();
        Ok(self.alignment(src, dst)?.apply(&v))
    }

    pub fn proximity(&self, u: &str, v: &str, c: &CellCoordinate) -> Result<ProximityAnswer, EngineError> {
        let (xu, path_u) = self.vector_in(u, c)?;
        let (xv, path_v) = self.vector_in(v, c)?;
        let proximity = if u == v { 1.0 } else { cosine(&xu, &xv) };
        Ok(ProximityAnswer {
            cell: self.key(c),
            u: u.to_string(),
            v: v.to_string(),
            proximity,
            path_u,
            path_v,
        })
    }

    pub fn topk_neighbors(&self, u: &str, c: &CellCoordinate, k: usize) -> Result<NeighborAnswer, EngineError> {
        if k == 0 {
            return Err(EngineError::InvalidParameter("k must be at least 1".into()));
        }
        let (x, path) = self.vector_in(u, c)?;
        let emb = self.embedding(c)?;
        Ok(NeighborAnswer {
            cell: self.key(c),
            node: u.to_string(),
            path,
            neighbors: nearest(&emb, &x, u, k),
        })
    }
}
