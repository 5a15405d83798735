//! Per-cell spectral embeddings, orthogonal Procrustes alignment between
//! cells, and cosine proximity search.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{HeterogeneousNetwork, UndirectedGraph};
use crate::spectral::{top_eigenpairs, EigenConfig, NormalizedAdjacency, SpectralError, DEFAULT_TOLERANCE};

pub const DEFAULT_DIM: usize = 32;
pub const MIN_ANCHORS: usize = 10;
/// Bound asserted on every stored eigenpair.
pub const RESIDUAL_BOUND: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum ProximityError {
    #[error("cell `{0}` is empty")]
    EmptyCell(String),
    #[error("largest component of cell `{cell}` has {size} node(s); at least 2 are needed")]
    ComponentTooSmall { cell: String, size: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("eigenpair residual {worst} exceeds {bound}")]
    ResidualBound { worst: f64, bound: f64 },
    #[error("embedding columns are not orthonormal (deviation {0})")]
    NotOrthonormal(f64),
    #[error("cells `{source_cell}` and `{target}` share {have} anchors, need {need}; route through their lowest common ancestor `{lca}`")]
    InsufficientAnchors {
        source_cell: String,
        target: String,
        have: usize,
        need: usize,
        lca: String,
    },
    #[error("embedding dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("node `{node}` has a zero vector in cell `{cell}` (outside its largest component)")]
    ZeroVector { node: String, cell: String },
    #[error("node `{node}` cannot be reached from cell `{cell}` through any aligned cell")]
    Unreachable { node: String, cell: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEmbedding {
    pub coordinate: String,
    pub requested_dim: usize,
    pub dim: usize,
    /// Set when the largest component was too small for `requested_dim`.
    pub dim_lowered: bool,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub seed: u64,
    pub tolerance: f64,
    /// Cell members in base order.
    pub node_ids: Vec<String>,
    /// One length-`dim` row per member; all zeros outside the largest component.
    pub vectors: Vec<Vec<f64>>,
    pub in_component: Vec<bool>,
}

impl CellEmbedding {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.binary_search_by(|x| x.as_bytes().cmp(id.as_bytes())).ok()
    }

    /// The node's vector, `None` if not a member, `Err` if zero.
    pub fn vector(&self, id: &str) -> Option<Result<&[f64], ProximityError>> {
        self.index_of(id).map(|i| {
            if self.in_component[i] {
                Ok(self.vectors[i].as_slice())
            } else {
                Err(ProximityError::ZeroVector {
                    node: id.to_string(),
                    cell: self.coordinate.clone(),
                })
            }
        })
    }

    pub fn embedded_count(&self) -> usize {
        self.in_component.iter().filter(|&&b| b).count()
    }
}

/// Embeds the largest component of `net`'s undirected projection with the
/// top `d` eigenvectors of `D^{-1/2} A D^{-1/2}`.
pub fn embed_network(
    coordinate: &str,
    net: &HeterogeneousNetwork,
    d: usize,
    seed: u64,
    tol: f64,
) -> Result<CellEmbedding, ProximityError> {
    if net.node_count() == 0 {
        return Err(ProximityError::EmptyCell(coordinate.to_string()));
    }
    let g = net.undirected_projection();
    let comp = g.largest_component();
    if comp.len() < 2 {
        return Err(ProximityError::ComponentTooSmall {
            cell: coordinate.to_string(),
            size: comp.len(),
        });
    }
    let dim = d.min(comp.len() - 1);
    let sub = component_graph(&g, &comp);
    let op = NormalizedAdjacency::new(&sub);
    let result = top_eigenpairs(&op, &EigenConfig { tol, ..EigenConfig::new(dim, seed) })?;
    let worst = result.residuals.iter().copied().fold(0.0, f64::max);
    if worst > RESIDUAL_BOUND {
        return Err(ProximityError::ResidualBound {
            worst,
            bound: RESIDUAL_BOUND,
        });
    }
    let deviation = orthonormality_deviation(&result.vectors);
    if deviation > 1e-8 {
        return Err(ProximityError::NotOrthonormal(deviation));
    }
    let n = net.node_count();
    let mut vectors = vec![vec![0.0; dim]; n];
    let mut in_component = vec![false; n];
    for (row, &u) in comp.iter().enumerate() {
        in_component[u] = true;
        for (j, v) in result.vectors.iter().enumerate() {
            vectors[u][j] = v[row];
        }
    }
    Ok(CellEmbedding {
        coordinate: coordinate.to_string(),
        requested_dim: d,
        dim,
        dim_lowered: dim < d,
        eigenvalues: result.values,
        residuals: result.residuals,
        seed,
        tolerance: tol,
        node_ids: net.nodes().iter().map(|x| x.id.clone()).collect(),
        vectors,
        in_component,
    })
}

pub fn embed_network_default(coordinate: &str, net: &HeterogeneousNetwork, seed: u64) -> Result<CellEmbedding, ProximityError> {
    embed_network(coordinate, net, DEFAULT_DIM, seed, DEFAULT_TOLERANCE)
}

fn component_graph(g: &UndirectedGraph, comp: &[usize]) -> UndirectedGraph {
    let mut local = vec![usize::MAX; g.node_count()];
    for (i, &u) in comp.iter().enumerate() {
        local[u] = i;
    }
    UndirectedGraph::from_pairs(
        comp.len(),
        g.edge_iter()
            .filter(|&(u, v, _)| local[u] != usize::MAX && local[v] != usize::MAX)
            .map(|(u, v, w)| (local[u], local[v], w)),
    )
}

/// Largest `|<v_i, v_j> − δ_ij|`.
pub fn orthonormality_deviation(columns: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..columns.len() {
        for j in i..columns.len() {
            let d: f64 = columns[i].iter().zip(&columns[j]).map(|(a, b)| a * b).sum();
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((d - target).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTransform {
    pub source: String,
    pub target: String,
    pub dim: usize,
    /// Row-major `dim × dim`; maps row vectors by `x W`.
    pub matrix: Vec<Vec<f64>>,
    pub anchor_count: usize,
    /// `‖X_src W − X_dst‖_F` over the anchors.
    pub residual: f64,
    /// `‖X_src − X_dst‖_F` over the anchors.
    pub unaligned_residual: f64,
}

impl AlignmentTransform {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| x[i] * self.matrix[i][j]).sum())
            .collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.matrix[i][j])
    }
}

/// `W = U Vᵀ` minimizing `‖X_src W − X_dst‖_F` over orthogonal `W`, where
/// `U Σ Vᵀ = X_srcᵀ X_dst`.
pub fn procrustes(x_src: &DMatrix<f64>, x_dst: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x_src.transpose() * x_dst;
    let svd = m.svd(true, true);
    svd.u.unwrap() * svd.v_t.unwrap()
}

/// Aligns `src` onto `dst` using their shared embedded nodes as anchors.
/// `lca` names the routing cell reported when anchors are insufficient.
pub fn align_cells(src: &CellEmbedding, dst: &CellEmbedding, lca: &str) -> Result<AlignmentTransform, ProximityError> {
    if src.dim != dst.dim {
        return Err(ProximityError::DimensionMismatch(src.dim, dst.dim));
    }
    let d = src.dim;
    let anchors: Vec<(usize, usize)> = src
        .node_ids
        .iter()
        .enumerate()
        .filter(|(i, _)| src.in_component[*i])
        .filter_map(|(i, id)| dst.index_of(id).filter(|&j| dst.in_component[j]).map(|j| (i, j)))
        .collect();
    let need = d.max(MIN_ANCHORS);
    if anchors.len() < need {
        return Err(ProximityError::InsufficientAnchors {
            source_cell: src.coordinate.clone(),
            target: dst.coordinate.clone(),
            have: anchors.len(),
            need,
            lca: lca.to_string(),
        });
    }
    let xs = DMatrix::from_fn(anchors.len(), d, |r, c| src.vectors[anchors[r].0][c]);
    let xd = DMatrix::from_fn(anchors.len(), d, |r, c| dst.vectors[anchors[r].1][c]);
    let w = procrustes(&xs, &xd);
    Ok(AlignmentTransform {
        source: src.coordinate.clone(),
        target: dst.coordinate.clone(),
        dim: d,
        matrix: (0..d).map(|i| (0..d).map(|j| w[(i, j)]).collect()).collect(),
        anchor_count: anchors.len(),
        residual: (&xs * &w - &xd).norm(),
        unaligned_residual: (&xs - &xd).norm(),
    })
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub node: String,
    pub proximity: f64,
}

/// Exact scan of the embedded members of `emb`, excluding `exclude`;
/// descending proximity, ties by node id.
pub fn nearest(emb: &CellEmbedding, query: &[f64], exclude: &str, k: usize) -> Vec<Neighbor> {
    let mut all: Vec<Neighbor> = emb
        .node_ids
        .iter()
        .enumerate()
        .filter(|(i, id)| emb.in_component[*i] && id.as_str() != exclude)
        .map(|(i, id)| Neighbor {
            node: id.clone(),
            proximity: cosine(query, &emb.vectors[i]),
        })
        .collect();
    all.sort_by(|a, b| {
        b.proximity
            .partial_cmp(&a.proximity)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.node.cmp(&b.node))
    });
    all.truncate(k);
    all
}
