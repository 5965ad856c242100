//! HTTP/JSON service for interactive generation.
//!
//! Models are loaded once and shared read-only between requests; every
//! response is a pure function of the request body and the loaded snapshot.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use roomgraph_core::graph::{scene_graph, SceneGraph};
use roomgraph_core::instantiate::PlacementViolation;
use roomgraph_core::scene::{
    validate_scene, CategoryRegistry, ConditionCode, ConditionSchema, RoomShell, RoomType, Scene,
};
use roomgraph_core::{synth, Error};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;

use crate::pipeline::{generate_layout, LoadError, ModelSet};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub room_type: String,
    pub label: String,
    #[serde(default)]
    pub shell: Option<RoomShell>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Adds wall-clock `timing_ms` to the body. Off by default so that equal
    /// requests get byte-identical responses; the time is always sent in the
    /// `Server-Timing` header.
    #[serde(default)]
    pub include_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub room_type: RoomType,
    pub label: String,
    pub seed: u64,
    pub scene: Scene,
    pub graph: SceneGraph,
    /// Scene item index for each graph node (`null` for walls and openings).
    pub item_of_node: Vec<Option<usize>>,
    pub predicates_checked: usize,
    pub predicates_failed: usize,
    pub violations: Vec<PlacementViolation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSchema {
    pub room_type: RoomType,
    pub condition_schema: ConditionSchema,
    pub category_registry: CategoryRegistry,
    pub default_shell: RoomShell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaResponse {
    pub rooms: Vec<RoomSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    /// Path of the offending field in the request body, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, error: impl Into<String>, field: Option<&str>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: error.into(),
                field: field.map(str::to_string),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse_body<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = (path != "." && path != "?").then_some(path);
        ApiError::new(
            StatusCode::BAD_REQUEST,
            e.into_inner().to_string(),
            field.as_deref(),
        )
    })
}

fn unprocessable(e: impl ToString, field: Option<&str>) -> ApiError {
    ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string(), field)
}

pub type SharedModels = Arc<ModelSet>;

pub fn router(models: SharedModels) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/schema", get(schema))
        .route("/api/v1/generate", post(generate))
        .route("/api/v1/extract", post(extract))
        .layer(CorsLayer::permissive())
        .with_state(models)
}

async fn healthz() -> &'static str {
    "ok"
}

async fn schema(State(models): State<SharedModels>) -> Json<SchemaResponse> {
    Json(SchemaResponse {
        rooms: models
            .rooms
            .iter()
            .map(|(&room_type, m)| RoomSchema {
                room_type,
                condition_schema: m.graph.schema.clone(),
                category_registry: m.graph.registry.clone(),
                default_shell: synth::default_shell(room_type),
            })
            .collect(),
    })
}

async fn generate(State(models): State<SharedModels>, body: Bytes) -> Result<Response, ApiError> {
    let start = Instant::now();
    let req: GenerateRequest = parse_body(&body)?;
    let room: RoomType = req
        .room_type
        .parse()
        .map_err(|e: Error| unprocessable(e, Some("room_type")))?;
    let room_models = models
        .rooms
        .get(&room)
        .ok_or_else(|| unprocessable(format!("no model is loaded for {room}"), Some("room_type")))?;
    let label_index = room_models.graph.schema.label_index(&req.label).ok_or_else(|| {
        unprocessable(
            format!(
                "unknown label {:?} for {room}; expected one of {:?}",
                req.label, room_models.graph.schema.labels
            ),
            Some("label"),
        )
    })?;
    if let Some(shell) = &req.shell {
        shell.check().map_err(|e| unprocessable(e, Some("shell")))?;
    }
    let seed = req.seed.unwrap_or(0);
    let cond = ConditionCode::new(room, label_index);

    let shared = Arc::clone(&models);
    let shell = req.shell.clone();
    let result = tokio::task::spawn_blocking(move || {
        generate_layout(&shared.rooms[&room], cond, shell.as_ref(), seed)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string(), None))?;
    let layout = match result {
        Ok(l) => l,
        Err(e @ (Error::Instantiation { .. } | Error::NoSpace { .. })) => {
            return Err(unprocessable(e, req.shell.as_ref().map(|_| "shell")));
        }
        Err(e) => {
            return Err(ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                e.to_string(),
                None,
            ))
        }
    };

    let elapsed = start.elapsed().as_secs_f64() * 1000.0;
    let response = GenerateResponse {
        room_type: room,
        label: req.label,
        seed,
        scene: layout.layout.scene,
        graph: layout.graph,
        item_of_node: layout.layout.item_of_node,
        predicates_checked: layout.layout.predicates_checked,
        predicates_failed: layout.layout.predicates_failed,
        violations: layout.layout.violations,
        timing_ms: req.include_timing.then_some(elapsed),
    };
    let mut resp = Json(response).into_response();
    if let Ok(v) = HeaderValue::from_str(&format!("generate;dur={elapsed:.1}")) {
        resp.headers_mut().insert("server-timing", v);
    }
    Ok(resp)
}

async fn extract(body: Bytes) -> Result<Json<SceneGraph>, ApiError> {
    let scene: Scene = parse_body(&body)?;
    let report = validate_scene(&scene);
    if let Some(v) = report.violations.iter().find(|v| {
        !matches!(
            v,
            roomgraph_core::scene::Violation::Outside { .. }
                | roomgraph_core::scene::Violation::Overlap { .. }
                | roomgraph_core::scene::Violation::EmptyItems
        )
    }) {
        return Err(unprocessable(format!("invalid scene: {v:?}"), None));
    }
    scene_graph(&scene).map(Json).map_err(|e| unprocessable(e, None))
}

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub graph_models: Vec<PathBuf>,
    pub placement_models: Vec<PathBuf>,
    pub host: String,
    pub port: u16,
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("invalid PORT value {0:?}")]
    Port(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Port from the `PORT` environment variable when set, else `configured`.
pub fn effective_port(configured: u16, env: Option<&str>) -> Result<u16, ServeError> {
    match env {
        Some(v) => v.trim().parse().map_err(|_| ServeError::Port(v.to_string())),
        None => Ok(configured),
    }
}

/// Loads every checkpoint (refusing to start if one is missing) and serves
/// until interrupted.
pub async fn serve(config: ServeConfig) -> Result<(), ServeError> {
    let models = ModelSet::load(&config.graph_models, &config.placement_models)?;
    let port = effective_port(config.port, std::env::var("PORT").ok().as_deref())?;
    let addr = format!("{}:{}", config.host, port);
    let listener = tokio::net::TcpListener::bind(&addr)
        .await
        .map_err(|source| ServeError::Bind {
            addr: addr.clone(),
            source,
        })?;
    let local: SocketAddr = listener.local_addr()?;
    log::info!("serving {} room type(s) on http://{local}", models.rooms.len());
    axum::serve(listener, router(Arc::new(models)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
