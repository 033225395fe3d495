//! HTTP service over immutable snapshots of the radio map, navigation
//! graph and (in simulated mode) the scenario.
//!
//! Each request clones the current snapshot `Arc` once and answers from it,
//! so a reload swapping the snapshot never produces a mixed response.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Query, Request, State};
use axum::http::{HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::document::DocumentError;
use crate::localization::{locate, LocateError, MatcherConfig};
use crate::navgraph::{GraphConfig, GraphError, GraphLoadError, NavGraph};
use crate::propagation::{synth_scan, PlanarPoint, SERVICE_STREAM};
use crate::radiomap::RadioMap;
use crate::simulator::{train_scenario, Scenario, SimError};
use crate::wire::{ErrorBody, LocateRequest, MapResponse, RouteResponse, SimScanRequest, SimScanResponse};

/// Response header carrying the generation of the snapshot that answered.
pub const GENERATION_HEADER: &str = "x-waypoint-generation";

#[derive(Debug)]
pub struct Snapshot {
    pub map: RadioMap,
    pub graph: Option<NavGraph>,
    /// Present in simulated mode.
    pub scenario: Option<Scenario>,
    pub matcher: MatcherConfig,
    pub generation: u64,
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("either a radio map or a scenario is required")]
    NoMap,
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Document {
        path: PathBuf,
        #[source]
        source: DocumentError,
    },
    #[error("{path}: {source}")]
    Graph {
        path: PathBuf,
        #[source]
        source: GraphLoadError,
    },
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Matcher(#[from] LocateError),
}

/// Where snapshots are loaded from; re-read on every reload.
#[derive(Debug, Clone, Default)]
pub struct SnapshotSource {
    pub map: Option<PathBuf>,
    pub graph: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    pub matcher: MatcherConfig,
    pub graph_config: GraphConfig,
}

fn read(path: &PathBuf) -> Result<String, ServiceError> {
    std::fs::read_to_string(path).map_err(|source| ServiceError::Io {
        path: path.clone(),
        source,
    })
}

impl SnapshotSource {
    /// Loads every document. Without a map file the scenario is trained in
    /// memory at the matcher's floor.
    pub fn load(&self, generation: u64) -> Result<Snapshot, ServiceError> {
        self.matcher.validate()?;
        let scenario = match &self.scenario {
            Some(p) => Some(Scenario::from_json(&read(p)?).map_err(|e| match e {
                SimError::Document(source) => ServiceError::Document { path: p.clone(), source },
                other => ServiceError::Simulation(other),
            })?),
            None => None,
        };
        let map = match (&self.map, &scenario) {
            (Some(p), _) => RadioMap::from_json(&read(p)?).map_err(|source| ServiceError::Document { path: p.clone(), source })?,
            (None, Some(s)) => train_scenario(s, self.matcher.floor_dbm)?.map,
            (None, None) => return Err(ServiceError::NoMap),
        };
        let graph = match &self.graph {
            Some(p) => Some(
                NavGraph::from_json(&read(p)?, &self.graph_config).map_err(|source| ServiceError::Graph { path: p.clone(), source })?,
            ),
            None => None,
        };
        Ok(Snapshot {
            map,
            graph,
            scenario,
            matcher: self.matcher,
            generation,
        })
    }
}

pub struct ServiceState {
    current: RwLock<Arc<Snapshot>>,
    sim_counter: AtomicU64,
}

impl ServiceState {
    pub fn new(snapshot: Snapshot) -> Self {
        Self {
            current: RwLock::new(Arc::new(snapshot)),
            sim_counter: AtomicU64::new(0),
        }
    }

    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.current.read().expect("snapshot lock").clone()
    }

    pub fn replace(&self, snapshot: Snapshot) {
        *self.current.write().expect("snapshot lock") = Arc::new(snapshot);
    }

    /// Loads a new snapshot and swaps it in. On failure the current one stays.
    pub fn reload(&self, source: &SnapshotSource) -> Result<u64, ServiceError> {
        let next = self.snapshot().generation + 1;
        let snap = source.load(next)?;
        self.replace(snap);
        Ok(next)
    }
}

#[derive(Debug)]
struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl ToString) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.to_string(),
                path: None,
            },
        }
    }

    fn at(mut self, path: impl Into<String>) -> Self {
        self.body.path = Some(path.into());
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn ok<T: Serialize>(snap: &Snapshot, body: &T) -> Response {
    let mut resp = Json(body).into_response();
    resp.headers_mut().insert(GENERATION_HEADER, HeaderValue::from(snap.generation));
    resp
}

fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        let err = ApiError::new(StatusCode::BAD_REQUEST, e.into_inner());
        if path == "." {
            err
        } else {
            err.at(path)
        }
    })?;
    de.end().map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e))?;
    Ok(value)
}

async fn handle_locate(State(state): State<Arc<ServiceState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: LocateRequest = parse_body(&body)?;
    let scan = req
        .into_scan()
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.message).at(e.path))?;
    let snap = state.snapshot();
    match locate(&snap.map, &scan, &snap.matcher) {
        Ok(est) => Ok(ok(&snap, &est)),
        Err(e @ LocateError::NoUsableSignal) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e)),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e)),
    }
}

async fn handle_route(State(state): State<Arc<ServiceState>>, Query(q): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let param = |name: &str| {
        q.get(name)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, format!("missing query parameter {name:?}")).at(name))
    };
    let (from, to) = (param("from")?, param("to")?);
    let snap = state.snapshot();
    let Some(graph) = &snap.graph else {
        return Err(ApiError::new(StatusCode::CONFLICT, "no navigation graph loaded"));
    };
    match graph.shortest_path(&from, &to) {
        Ok(route) => Ok(ok(&snap, &RouteResponse::new(graph, &route))),
        Err(e @ GraphError::UnknownNode(_)) => Err(ApiError::new(StatusCode::NOT_FOUND, e)),
        Err(e) => Err(ApiError::new(StatusCode::CONFLICT, e)),
    }
}

async fn handle_map(State(state): State<Arc<ServiceState>>) -> Response {
    let snap = state.snapshot();
    ok(&snap, &MapResponse::new(&snap.map, snap.graph.as_ref(), snap.scenario.as_ref()))
}

async fn handle_sim_scan(State(state): State<Arc<ServiceState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: SimScanRequest = parse_body(&body)?;
    let snap = state.snapshot();
    let Some(s) = &snap.scenario else {
        return Err(ApiError::new(StatusCode::CONFLICT, "simulated mode is off: no scenario loaded"));
    };
    let p = PlanarPoint::new(req.x, req.y);
    if !(p.x.is_finite() && p.y.is_finite() && s.contains(p)) {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!(
                "point ({}, {}) outside the scenario extent {} x {} m",
                p.x, p.y, s.extent.width_m, s.extent.height_m
            ),
        ));
    }
    let index = SERVICE_STREAM | state.sim_counter.fetch_add(1, Ordering::Relaxed);
    let scan = synth_scan(&s.transmitters, p, &s.noise, index).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    Ok(ok(&snap, &SimScanResponse::new(s, p, index, scan)))
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "no such endpoint")
}

async fn log_requests(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let uri = req.uri().clone();
    let start = Instant::now();
    let resp = next.run(req).await;
    log::info!(
        target: "waypoint::access",
        "method={} uri={} status={} elapsed_ms={:.3}",
        method,
        uri,
        resp.status().as_u16(),
        start.elapsed().as_secs_f64() * 1e3
    );
    resp
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/api/v1/locate", post(handle_locate))
        .route("/api/v1/route", get(handle_route))
        .route("/api/v1/map", get(handle_map))
        .route("/api/v1/sim/scan", post(handle_sim_scan))
        .fallback(not_found)
        .layer(middleware::from_fn(log_requests))
        .with_state(state)
}

#[cfg(unix)]
async fn reload_on_hangup(state: Arc<ServiceState>, source: SnapshotSource) {
    use tokio::signal::unix::{signal, SignalKind};
    let Ok(mut hup) = signal(SignalKind::hangup()) else {
        log::warn!("cannot install SIGHUP handler; reload disabled");
        return;
    };
    while hup.recv().await.is_some() {
        let s = state.clone();
        let src = source.clone();
        match tokio::task::spawn_blocking(move || s.reload(&src)).await {
            Ok(Ok(generation)) => log::info!("reloaded snapshot, generation {generation}"),
            Ok(Err(e)) => log::error!("reload failed, keeping current snapshot: {e}"),
            Err(e) => log::error!("reload task failed: {e}"),
        }
    }
}

/// Serves until Ctrl-C. On Unix, SIGHUP reloads the documents.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ServiceState>, source: SnapshotSource) -> std::io::Result<()> {
    #[cfg(unix)]
    tokio::spawn(reload_on_hangup(state.clone(), source));
    #[cfg(not(unix))]
    drop(source);
    if let Ok(addr) = listener.local_addr() {
        log::info!("listening on http://{addr}");
    }
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
