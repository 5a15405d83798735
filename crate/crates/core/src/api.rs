//! Request types and JSON responses shared by the CLI, the HTTP service and
//! the C ABI. Every endpoint is a function of an engine and a request.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::backtrack::{BacktrackError, NetworkQuery};
use crate::cube::CubeError;
use crate::engine::{CubeEngine, EngineError};
use crate::graph::HeterogeneousNetwork;
use crate::localize::{LocalizeError, LocalizeParams};
use crate::olap::OlapError;
use crate::pattern::PatternWeights;
use crate::proximity::ProximityError;

pub const DEFAULT_K: usize = 10;

#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: &'static str,
    #[serde(skip)]
    pub status: u16,
    pub message: String,
}

impl ApiError {
    pub fn bad_request(message: impl Into<String>) -> Self {
        Self {
            code: "invalid_request",
            status: 400,
            message: message.into(),
        }
    }

    pub fn body(&self) -> Value {
        json!({ "code": self.code, "message": self.message })
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let (code, status) = match &e {
            EngineError::Cube(CubeError::Syntax(_) | CubeError::UnknownDimension(_) | CubeError::UnknownValue { .. } | CubeError::DuplicateDimension(_)) => {
                ("bad_coordinate", 400)
            }
            EngineError::Proximity(ProximityError::UnknownNode(_)) => ("unknown_node", 404),
            EngineError::Olap(OlapError::UnknownSuperNode(_)) => ("unknown_super_node", 404),
            EngineError::Localize(LocalizeError::AllUnknown(_)) => ("unknown_node", 404),
            EngineError::Backtrack(BacktrackError::DanglingEdge(..)) => ("invalid_query", 400),
            EngineError::Proximity(_) => ("proximity_unavailable", 400),
            EngineError::Miner(_) => ("mining_failed", 400),
            _ => ("invalid_request", 400),
        };
        Self {
            code,
            status,
            message: e.to_string(),
        }
    }
}

pub type ApiResult = Result<Value, ApiError>;

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("response types serialize")
}

pub fn network_json(net: &HeterogeneousNetwork) -> Value {
    json!({
        "nodes": net.nodes(),
        "edges": net.edges().iter().map(|e| net.typed_edge(e)).collect::<Vec<_>>(),
    })
}

pub fn dimensions(engine: &CubeEngine) -> ApiResult {
    let dims: Vec<Value> = engine
        .lattice()
        .dimensions()
        .iter()
        .map(|t| {
            json!({
                "name": t.dimension(),
                "ordered": t.is_ordered(),
                "depth": t.depth(),
                "root": t.to_record(),
            })
        })
        .collect();
    Ok(json!({ "dimensions": dims }))
}

pub fn summary(engine: &CubeEngine, cell: &str) -> ApiResult {
    let c = engine.parse(cell)?;
    Ok(json!({ "cell": engine.key(&c), "summary": *engine.summary(&c) }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PatternsRequest {
    pub min_support: Option<usize>,
    pub max_edges: Option<usize>,
    /// `p,i,d`.
    pub weights: Option<String>,
    /// Dimension whose siblings are compared; defaults to the last bound one.
    pub sibling_dim: Option<String>,
}

pub fn patterns(engine: &CubeEngine, cell: &str, req: &PatternsRequest) -> ApiResult {
    let c = engine.parse(cell)?;
    let weights: PatternWeights = match &req.weights {
        Some(w) => w.parse().map_err(ApiError::bad_request)?,
        None => engine.params().weights,
    };
    let cfg = engine.miner_config(req.min_support, req.max_edges);
    let siblings: Vec<String> = engine
        .sibling_coordinates(&c, req.sibling_dim.as_deref())?
        .iter()
        .map(|s| engine.key(s))
        .collect();
    let list = engine.patterns(&c, &cfg, &weights, req.sibling_dim.as_deref())?;
    Ok(json!({
        "cell": engine.key(&c),
        "min_support": cfg.min_support,
        "max_edges": cfg.max_edges,
        "weights": weights,
        "siblings": siblings,
        "patterns": list,
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProxRequest {
    pub node: String,
    /// When set, the pairwise proximity of `node` and `other` is returned
    /// instead of a neighbor list.
    pub other: Option<String>,
    pub k: Option<usize>,
}

pub fn prox(engine: &CubeEngine, cell: &str, req: &ProxRequest) -> ApiResult {
    let c = engine.parse(cell)?;
    match &req.other {
        Some(v) => Ok(to_value(&engine.proximity(&req.node, v, &c)?)),
        None => Ok(to_value(&engine.topk_neighbors(&req.node, &c, req.k.unwrap_or(DEFAULT_K))?)),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbedRequest {
    #[serde(default)]
    pub vectors: bool,
}

pub fn embed(engine: &CubeEngine, cell: &str, req: &EmbedRequest) -> ApiResult {
    let c = engine.parse(cell)?;
    let e = engine.embedding(&c)?;
    let mut out = json!({
        "cell": e.coordinate,
        "requested_dim": e.requested_dim,
        "dim": e.dim,
        "dim_lowered": e.dim_lowered,
        "eigenvalues": e.eigenvalues,
        "residuals": e.residuals,
        "seed": e.seed,
        "tolerance": e.tolerance,
        "members": e.node_ids.len(),
        "embedded": e.embedded_count(),
    });
    if req.vectors {
        let rows: serde_json::Map<String, Value> = e
            .node_ids
            .iter()
            .zip(&e.vectors)
            .zip(&e.in_component)
            .filter(|(_, &inside)| inside)
            .map(|((id, v), _)| (id.clone(), to_value(v)))
            .collect();
        out["vectors"] = Value::Object(rows);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RollupRequest {
    pub cell: Option<String>,
    pub dim: String,
    pub level: usize,
}

pub fn rollup(engine: &CubeEngine, req: &RollupRequest) -> ApiResult {
    let c = engine.parse(req.cell.as_deref().unwrap_or("*"))?;
    let agg = engine.rollup(&c, &req.dim, req.level)?;
    let mut v = to_value(&agg);
    v["cell"] = Value::String(engine.key(&c));
    v["total_weight"] = json!(agg.total_weight());
    Ok(v)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DrilldownRequest {
    pub cell: Option<String>,
    pub dim: String,
    pub level: usize,
    pub super_node: String,
}

pub fn drilldown(engine: &CubeEngine, req: &DrilldownRequest) -> ApiResult {
    let c = engine.parse(req.cell.as_deref().unwrap_or("*"))?;
    let net = engine.drilldown(&c, &req.dim, req.level, &req.super_node)?;
    Ok(json!({
        "cell": engine.key(&c),
        "dimension": req.dim,
        "level": req.level,
        "super_node": req.super_node,
        "network": network_json(&net),
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BacktrackRequest {
    pub nodes: Vec<String>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
    pub k: Option<usize>,
    pub gamma: Option<f64>,
}

pub fn backtrack(engine: &CubeEngine, req: &BacktrackRequest) -> ApiResult {
    let q = NetworkQuery::new(req.nodes.clone(), req.edges.clone()).map_err(EngineError::from)?;
    let k = req.k.unwrap_or(DEFAULT_K);
    let gamma = req.gamma.unwrap_or(engine.params().gamma);
    let (hits, stats) = engine.backtrack(&q, k, gamma)?;
    Ok(json!({
        "k": k,
        "gamma": gamma,
        "query": { "nodes": q.nodes, "edges": q.edges },
        "hits": hits,
        "stats": stats,
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LocalizeRequest {
    pub nodes: Vec<String>,
    pub lambda: Option<f64>,
    pub rho: Option<f64>,
    pub level: Option<usize>,
}

pub fn localize(engine: &CubeEngine, req: &LocalizeRequest) -> ApiResult {
    let p = engine.params();
    let params = LocalizeParams {
        lambda: req.lambda.unwrap_or(p.lambda),
        rho: req.rho.unwrap_or(p.rho),
        level: req.level.unwrap_or(p.localize_level),
    };
    let r = engine.localize(&req.nodes, &params)?;
    Ok(json!({
        "params": params,
        "chosen": r.chosen,
        "coverage": r.coverage,
        "union_node_count": r.union_nodes.len(),
        "objective": r.objective,
        "unknown": r.unknown,
        "steps": r.steps,
        "network": network_json(&r.merged),
    }))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContrastRequest {
    pub fixed: Option<String>,
    pub dim: String,
    pub level: usize,
}

pub fn contrast(engine: &CubeEngine, req: &ContrastRequest) -> ApiResult {
    let c = engine.parse(req.fixed.as_deref().unwrap_or("*"))?;
    Ok(to_value(&engine.contrast(&c, &req.dim, req.level)?))
}
