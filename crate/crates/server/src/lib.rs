//! HTTP session API over the sensing-skin simulator.
//!
//! Routes, all JSON:
//!
//! | method | path | |
//! |---|---|---|
//! | POST | `/api/sessions` | create; optional [`SessionConfig`] body |
//! | GET | `/api/sessions/{id}/network` | network document |
//! | POST | `/api/sessions/{id}/press` | `{cell, mass_g, action}` |
//! | GET | `/api/sessions/{id}/series?sinceSample=n` | incremental samples |
//! | GET | `/api/sessions/{id}/families?pair=BL-C` | family map |
//! | POST | `/api/sessions/{id}/logic` | `{cellA, cellB}` gate report |
//! | DELETE | `/api/sessions/{id}` | |

pub mod session;

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lqskin_core::geometry::{CellId, ElectrodePair, Network};
use lqskin_core::io::network_to_json;
use lqskin_core::logic::{run_multitouch, GateReport, Protocol};
use lqskin_core::stimulus::{family_map, Family};
use lqskin_core::SkinError;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use session::{Clock, ManualClock, PressAction, SessionConfig, SessionStore, SystemClock};

/// Port used when neither a flag nor the environment sets one.
pub const DEFAULT_PORT: u16 = 8787;
/// Environment variable overriding [`DEFAULT_PORT`].
pub const PORT_ENV: &str = "LQSKIN_PORT";

pub type AppState = Arc<SessionStore>;

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest { field: Option<String>, message: String },
    Unprocessable { field: Option<String>, message: String },
    Internal(String),
}

impl ApiError {
    fn bad(message: impl Into<String>) -> Self {
        ApiError::BadRequest {
            field: None,
            message: message.into(),
        }
    }
}

/// Parameter problems are the client's fault; anything else is ours.
impl From<SkinError> for ApiError {
    fn from(e: SkinError) -> Self {
        match e {
            SkinError::InvalidField { field, message } => ApiError::Unprocessable {
                field: Some(field),
                message,
            },
            SkinError::InvalidCell(_) | SkinError::ProtocolWindow(_) | SkinError::Domain(_) => {
                ApiError::Unprocessable {
                    field: None,
                    message: e.to_string(),
                }
            }
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, field, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, None, m),
            ApiError::BadRequest { field, message } => (StatusCode::BAD_REQUEST, field, message),
            ApiError::Unprocessable { field, message } => (StatusCode::UNPROCESSABLE_ENTITY, field, message),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, None, m),
        };
        let mut body = json!({ "error": message });
        if let Some(f) = field {
            body["field"] = Value::String(f);
        }
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Parses a JSON body; serde's message names the offending field.
fn parse_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad(e.to_string()))
}

fn parse_cell(field: &str, label: &str) -> ApiResult<CellId> {
    label.parse().map_err(|_| ApiError::Unprocessable {
        field: Some(field.into()),
        message: format!("'{label}' is not a cell between A1 and P20"),
    })
}

fn session(state: &SessionStore, id: &str) -> ApiResult<Arc<std::sync::Mutex<session::Session>>> {
    state.get(id).ok_or_else(|| ApiError::NotFound(format!("no session '{id}'")))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", axum::routing::delete(delete_session))
        .route("/api/sessions/{id}/network", get(get_network))
        .route("/api/sessions/{id}/press", post(post_press))
        .route("/api/sessions/{id}/series", get(get_series))
        .route("/api/sessions/{id}/families", get(get_families))
        .route("/api/sessions/{id}/logic", post(post_logic))
        .with_state(state)
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let config: SessionConfig = if body.iter().all(u8::is_ascii_whitespace) {
        SessionConfig::default()
    } else {
        parse_body(&body)?
    };
    let id = state.create(config.clone()).map_err(|e| match ApiError::from(e) {
        // A bad creation body is a malformed request, not a bad press.
        ApiError::Unprocessable { field, message } => ApiError::BadRequest { field, message },
        other => other,
    })?;
    Ok((StatusCode::CREATED, Json(json!({ "id": id, "config": config }))))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<StatusCode> {
    if state.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ApiError::NotFound(format!("no session '{id}'")))
    }
}

async fn get_network(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let text = {
        let s = s.lock().unwrap();
        network_to_json(&s.model.network)?
    };
    Ok(Json(serde_json::from_str(&text).map_err(|e| ApiError::Internal(e.to_string()))?))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PressBody {
    cell: String,
    mass_g: f64,
    action: PressAction,
}

async fn post_press(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let req: PressBody = parse_body(&body)?;
    if !(req.mass_g.is_finite() && req.mass_g > 0.0) {
        return Err(ApiError::BadRequest {
            field: Some("mass_g".into()),
            message: format!("must be positive, got {}", req.mass_g),
        });
    }
    let cell = parse_cell("cell", &req.cell)?;
    let ack = s.lock().unwrap().press(cell, req.mass_g, req.action, state.now())?;
    Ok(Json(serde_json::to_value(ack).map_err(|e| ApiError::Internal(e.to_string()))?))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SeriesQuery {
    #[serde(default)]
    since_sample: usize,
}

async fn get_series(
    State(state): State<AppState>,
    Path(id): Path<String>,
    query: Result<Query<SeriesQuery>, axum::extract::rejection::QueryRejection>,
) -> ApiResult<Json<session::SeriesPage>> {
    let Query(q) = query.map_err(|e| ApiError::BadRequest {
        field: Some("sinceSample".into()),
        message: e.body_text(),
    })?;
    let s = session(&state, &id)?;
    let page = s.lock().unwrap().page(q.since_sample, state.now())?;
    Ok(Json(page))
}

#[derive(Deserialize)]
struct FamiliesQuery {
    pair: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct FamilyEntry {
    cell: CellId,
    family: Family,
}

async fn get_families(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FamiliesQuery>,
) -> ApiResult<Json<Value>> {
    let s = session(&state, &id)?;
    let (network, default_pair): (Network, ElectrodePair) = {
        let s = s.lock().unwrap();
        (s.model.network.clone(), s.config.electrode_pair)
    };
    let pair = match q.pair {
        None => default_pair,
        Some(p) => p.parse().map_err(|e: SkinError| ApiError::BadRequest {
            field: Some("pair".into()),
            message: e.to_string(),
        })?,
    };
    let cells: Vec<FamilyEntry> = family_map(&network, pair)
        .into_iter()
        .map(|(cell, family)| FamilyEntry { cell, family })
        .collect();
    Ok(Json(json!({ "pair": pair, "cells": cells })))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct LogicBody {
    cell_a: String,
    cell_b: String,
    #[serde(default)]
    thresholds: Option<Vec<f64>>,
    #[serde(default)]
    protocol: Option<Protocol>,
}

async fn post_logic(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Json<GateReport>> {
    let s = session(&state, &id)?;
    let req: LogicBody = parse_body(&body)?;
    let a = parse_cell("cellA", &req.cell_a)?;
    let b = parse_cell("cellB", &req.cell_b)?;
    let (model, pair) = {
        let s = s.lock().unwrap();
        (s.model.clone(), s.config.electrode_pair)
    };
    let protocol = req.protocol.unwrap_or_default();
    let thresholds = req.thresholds.unwrap_or_else(|| vec![0.13, 5.79]);
    let report = tokio::task::spawn_blocking(move || {
        run_multitouch(&model, pair, a, b, &protocol).map(|run| GateReport::new(&run, pair, a, b, &thresholds))
    })
    .await
    .map_err(|e| ApiError::Internal(e.to_string()))??;
    Ok(Json(report))
}

/// Port from `LQSKIN_PORT`, else [`DEFAULT_PORT`].
pub fn port_from_env() -> Result<u16, String> {
    match std::env::var(PORT_ENV) {
        Ok(v) => v.parse().map_err(|_| format!("{PORT_ENV}: '{v}' is not a port number")),
        Err(_) => Ok(DEFAULT_PORT),
    }
}

/// Serves until Ctrl-C. Sessions live in memory only.
pub async fn serve(addr: SocketAddr, network: Network) -> std::io::Result<()> {
    let state = Arc::new(SessionStore::new(network, Arc::new(SystemClock::new())));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
