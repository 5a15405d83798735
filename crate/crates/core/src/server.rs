//! Read-only HTTP service over one immutable engine.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::Value;

use crate::api::{self, ApiError, ApiResult};
use crate::engine::CubeEngine;

type Shared = State<Arc<CubeEngine>>;

struct Reply(ApiResult);

impl IntoResponse for Reply {
    fn into_response(self) -> Response {
        match self.0 {
            Ok(v) => (StatusCode::OK, Json(v)).into_response(),
            Err(e) => {
                let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::BAD_REQUEST);
                (status, Json(e.body())).into_response()
            }
        }
    }
}

fn rejected(message: String) -> Reply {
    Reply(Err(ApiError::bad_request(message)))
}

/// Runs an endpoint on the blocking pool; engine work is CPU-bound.
async fn run<F>(engine: Arc<CubeEngine>, f: F) -> Reply
where
    F: FnOnce(&CubeEngine) -> ApiResult + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&engine)).await {
        Ok(r) => Reply(r),
        Err(e) => Reply(Err(ApiError {
            code: "internal",
            status: 500,
            message: e.to_string(),
        })),
    }
}

async fn dimensions(State(e): Shared) -> Reply {
    run(e, api::dimensions).await
}

async fn summary(State(e): Shared, Path(coord): Path<String>) -> Reply {
    run(e, move |e| api::summary(e, &coord)).await
}

async fn patterns(
    State(e): Shared,
    Path(coord): Path<String>,
    q: Result<Query<api::PatternsRequest>, QueryRejection>,
) -> Reply {
    match q {
        Ok(Query(req)) => run(e, move |e| api::patterns(e, &coord, &req)).await,
        Err(r) => rejected(r.body_text()),
    }
}

async fn prox(State(e): Shared, Path(coord): Path<String>, q: Result<Query<api::ProxRequest>, QueryRejection>) -> Reply {
    match q {
        Ok(Query(req)) => run(e, move |e| api::prox(e, &coord, &req)).await,
        Err(r) => rejected(r.body_text()),
    }
}

async fn embedding(
    State(e): Shared,
    Path(coord): Path<String>,
    q: Result<Query<api::EmbedRequest>, QueryRejection>,
) -> Reply {
    match q {
        Ok(Query(req)) => run(e, move |e| api::embed(e, &coord, &req)).await,
        Err(r) => rejected(r.body_text()),
    }
}

async fn rollup(State(e): Shared, q: Result<Query<api::RollupRequest>, QueryRejection>) -> Reply {
    match q {
        Ok(Query(req)) => run(e, move |e| api::rollup(e, &req)).await,
        Err(r) => rejected(r.body_text()),
    }
}

async fn drilldown(State(e): Shared, q: Result<Query<api::DrilldownRequest>, QueryRejection>) -> Reply {
    match q {
        Ok(Query(req)) => run(e, move |e| api::drilldown(e, &req)).await,
        Err(r) => rejected(r.body_text()),
    }
}

async fn contrast(State(e): Shared, q: Result<Query<api::ContrastRequest>, QueryRejection>) -> Reply {
    match q {
        Ok(Query(req)) => run(e, move |e| api::contrast(e, &req)).await,
        Err(r) => rejected(r.body_text()),
    }
}

async fn backtrack(State(e): Shared, body: Result<Json<api::BacktrackRequest>, JsonRejection>) -> Reply {
    match body {
        Ok(Json(req)) => run(e, move |e| api::backtrack(e, &req)).await,
        Err(r) => rejected(r.body_text()),
    }
}

async fn localize(State(e): Shared, body: Result<Json<api::LocalizeRequest>, JsonRejection>) -> Reply {
    match body {
        Ok(Json(req)) => run(e, move |e| api::localize(e, &req)).await,
        Err(r) => rejected(r.body_text()),
    }
}

async fn not_found() -> Reply {
    Reply(Err(ApiError {
        code: "not_found",
        status: 404,
        message: "no such endpoint".into(),
    }))
}

async fn health(State(e): Shared) -> Json<Value> {
    Json(serde_json::json!({
        "status": "ok",
        "nodes": e.network().node_count(),
        "edges": e.network().edge_count(),
    }))
}

pub fn router(engine: Arc<CubeEngine>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/dimensions", get(dimensions))
        .route("/cells/{coord}/summary", get(summary))
        .route("/cells/{coord}/patterns", get(patterns))
        .route("/cells/{coord}/prox", get(prox))
        .route("/cells/{coord}/embedding", get(embedding))
        .route("/rollup", get(rollup))
        .route("/drilldown", get(drilldown))
        .route("/contrast", get(contrast))
        .route("/backtrack", post(backtrack))
        .route("/localize", post(localize))
        .fallback(not_found)
        .with_state(engine)
}

pub async fn serve(engine: Arc<CubeEngine>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine)).await
}
