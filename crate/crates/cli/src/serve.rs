use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use deixis_core::planner::{
    assemble_prompt, parse_policy, requires_gesture, textualize_instruction, validate_policy,
    BackendError, CompletionBackend, Example, Instruction, PlannerError, PrimitiveCatalog,
    PromptContext, Violation,
};
use deixis_core::referent::{
    resolve_direction, resolve_location, resolve_object, Referent, ReferentError,
};
use deixis_core::registry::Registry;
use deixis_core::scene::{load_scene, Ontology, Scene};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::hand_frames;
use crate::config::Config;
use crate::{CliError, ResolveMode, ServeArgs};

/// Everything the handlers read; loaded once and never modified.
pub struct ServeState {
    pub registry: Registry<dyn CompletionBackend>,
    pub default_backend: String,
    pub ontology: Ontology,
    pub scenes: BTreeMap<String, Scene>,
}

impl ServeState {
    pub fn new(cfg: &Config, scenes_dir: Option<&Path>) -> Result<Self, CliError> {
        let mut scenes = BTreeMap::new();
        if let Some(dir) = scenes_dir {
            let entries = std::fs::read_dir(dir)
                .map_err(|e| CliError::Domain(format!("{}: {e}", dir.display())))?;
            let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
            paths.sort();
            for p in paths
                .into_iter()
                .filter(|p| p.extension().is_some_and(|x| x == "scene" || x == "json"))
            {
                let scene = load_scene(&p)
                    .map_err(|e| CliError::Domain(format!("{}: {e}", p.display())))?;
                let name = p
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or_default()
                    .to_owned();
                scenes.insert(name, scene);
            }
        }
        Ok(Self {
            registry: cfg.registry()?,
            default_backend: cfg.backend_name().to_owned(),
            ontology: cfg.ontology()?,
            scenes,
        })
    }
}

pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl ToString) -> Self {
        Self {
            status,
            code,
            message: message.to_string(),
        }
    }

    fn bad_request(message: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "error": { "code": self.code, "message": self.message } })),
        )
            .into_response()
    }
}

impl From<ReferentError> for ApiError {
    fn from(e: ReferentError) -> Self {
        let code = match &e {
            ReferentError::NoCandidates(_) => "NO_CANDIDATES",
            ReferentError::EmptyCloud => "EMPTY_CLOUD",
            ReferentError::Geometry(_) => "DEGENERATE_HAND",
            ReferentError::Filter(_) => "FILTER_REJECTED",
        };
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, e)
    }
}

impl From<BackendError> for ApiError {
    fn from(e: BackendError) -> Self {
        let (status, code) = match &e {
            BackendError::TranscriptMiss { .. } => (StatusCode::NOT_FOUND, "TRANSCRIPT_MISS"),
            BackendError::BackendUnreachable(_) => (StatusCode::BAD_GATEWAY, "BACKEND_UNREACHABLE"),
            BackendError::Timeout(_) => (StatusCode::GATEWAY_TIMEOUT, "BACKEND_TIMEOUT"),
            BackendError::Protocol(_) => (StatusCode::BAD_GATEWAY, "BACKEND_PROTOCOL"),
            BackendError::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "STORE_IO"),
        };
        Self::new(status, code, e)
    }
}

fn body<T: serde::de::DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(ApiError::bad_request)
}

#[derive(Deserialize)]
struct ResolveRequest {
    /// Name of a loaded scene, or an inline scene document.
    scene: Value,
    hand: Value,
    #[serde(default)]
    target: Option<String>,
    #[serde(default = "object_mode")]
    mode: ResolveMode,
}

fn object_mode() -> ResolveMode {
    ResolveMode::Object
}

async fn resolve(State(st): State<Arc<ServeState>>, bytes: Bytes) -> Result<Json<Value>, ApiError> {
    let req: ResolveRequest = body(&bytes)?;
    let inline;
    let scene = match &req.scene {
        Value::String(name) => st.scenes.get(name).ok_or_else(|| {
            ApiError::new(
                StatusCode::NOT_FOUND,
                "UNKNOWN_SCENE",
                format!("no scene named '{name}'"),
            )
        })?,
        doc @ Value::Object(_) => {
            inline = Scene::from_json(&doc.to_string())
                .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_SCENE", e))?;
            &inline
        }
        _ => {
            return Err(ApiError::bad_request(
                "scene must be a name or a scene document",
            ))
        }
    };
    let frames = hand_frames(req.hand)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_HAND", e))?;
    let hand = frames.last().expect("non-empty");
    let referent = match req.mode {
        ResolveMode::Object => {
            let target = req
                .target
                .as_deref()
                .ok_or_else(|| ApiError::bad_request("object mode needs a target"))?;
            Referent::Object(resolve_object(scene, hand, target, &st.ontology)?)
        }
        ResolveMode::Location => Referent::Location(resolve_location(scene, hand)?),
        ResolveMode::Direction => Referent::Direction(resolve_direction(hand)?),
    };
    Ok(Json(json!({ "referent": referent })))
}

#[derive(Deserialize)]
#[serde(rename_all = "snake_case")]
enum CatalogName {
    Standard,
    Extended,
}

#[derive(Deserialize)]
struct PlanRequest {
    instruction: Value,
    #[serde(default)]
    backend: Option<String>,
    #[serde(default)]
    catalog: Option<CatalogName>,
    #[serde(default)]
    history: Vec<Example>,
}

#[derive(Serialize)]
struct PlanResponse {
    instruction_lines: String,
    digest: String,
    program: String,
    valid: bool,
    violations: Vec<Violation>,
    requires_gesture: bool,
}

fn plan_sync(st: &ServeState, req: PlanRequest) -> Result<PlanResponse, ApiError> {
    let instruction: Instruction = serde_json::from_value(req.instruction)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "INVALID_INSTRUCTION", e))?;
    let name = req.backend.as_deref().unwrap_or(&st.default_backend);
    let backend = st
        .registry
        .get(name)
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "UNKNOWN_BACKEND", e))?;
    let catalog = match req.catalog {
        Some(CatalogName::Extended) => PrimitiveCatalog::extended(),
        _ => PrimitiveCatalog::standard(),
    };
    let ctx = PromptContext::new(catalog);
    let lines = textualize_instruction(&instruction, req.history.len());
    let prompt = assemble_prompt(&ctx, &req.history, &lines);
    let text = backend.complete(&prompt)?;
    let program = parse_policy(&text).map_err(|e| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "PARSE_ERROR",
            PlannerError::Parse(e),
        )
    })?;
    let violations = validate_policy(&program, &ctx.catalog)
        .err()
        .unwrap_or_default();
    let needs = requires_gesture(&program, &ctx.catalog);
    if violations.is_empty() && needs && instruction.gesture.is_none() {
        return Err(ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "MISSING_GESTURE",
            PlannerError::MissingGesture,
        ));
    }
    Ok(PlanResponse {
        instruction_lines: lines,
        digest: prompt.digest(),
        program: text,
        valid: violations.is_empty(),
        violations,
        requires_gesture: needs,
    })
}

async fn plan(
    State(st): State<Arc<ServeState>>,
    bytes: Bytes,
) -> Result<Json<PlanResponse>, ApiError> {
    let req: PlanRequest = body(&bytes)?;
    // Completion backends block (the remote one does network I/O).
    tokio::task::spawn_blocking(move || plan_sync(&st, req))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e))?
        .map(Json)
}

async fn health() -> &'static str {
    "ok\n"
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/resolve", post(resolve))
        .route("/v1/plan", post(plan))
        .with_state(state)
}

pub fn serve(cfg: &Config, a: ServeArgs) -> Result<(), CliError> {
    let state = Arc::new(ServeState::new(cfg, a.scenes.as_deref())?);
    let rt = tokio::runtime::Runtime::new().map_err(CliError::domain)?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&a.addr)
            .await
            .map_err(|e| CliError::Domain(format!("bind {}: {e}", a.addr)))?;
        eprintln!(
            "listening on {}",
            listener.local_addr().map_err(CliError::domain)?
        );
        axum::serve(listener, router(state))
            .await
            .map_err(CliError::domain)
    })
}
