//! JSON-over-HTTP surface used by the demo front end.
//!
//! | route | purpose |
//! |---|---|
//! | `GET /health` | liveness |
//! | `GET /items/{id}` | catalog item |
//! | `GET /users/{id}/history` | history with item metadata |
//! | `POST /explain` | `{recommended_id, user_id, method, k?}` → explanation |
//! | `GET /explanations/{id}` | stored explanation |
//! | `POST /ratings` | `{explanation_id, rater_id, criterion, score}` |
//! | `GET /stats` | current statistics report |
//!
//! Errors are `{code, message, stage}` with a matching status code.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::{AspectCache, AspectExtractor};
use crate::catalog::{ingest_catalog, load_history, Catalog, CatalogFormat, Item, UserHistory};
use crate::config::{AppConfig, ConfigError};
use crate::embedding::EmbeddingIndex;
use crate::evaluation::{Acknowledgment, EvalError, RatingRecord, RatingStore};
use crate::explanation::{ExplainError, Explainer, Explanation, ExplanationRequest, FailureKind, Method};
use crate::llm::{GenerationParams, ASPECT_MAX_TOKENS};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot load {what}: {message}")]
    Load { what: &'static str, message: String },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

fn load_err(what: &'static str) -> impl Fn(String) -> ServiceError {
    move |message| ServiceError::Load { what, message }
}

/// Shared state behind every handler.
pub struct AppState {
    explainer: Explainer,
    histories: BTreeMap<String, UserHistory>,
    k: usize,
    params: GenerationParams,
    explanations: RwLock<BTreeMap<String, Explanation>>,
    explanation_log: Option<PathBuf>,
    aspect_cache_path: Option<PathBuf>,
    ratings: Mutex<RatingStore>,
}

impl AppState {
    pub fn new(
        explainer: Explainer,
        histories: impl IntoIterator<Item = UserHistory>,
        ratings: RatingStore,
        k: usize,
        params: GenerationParams,
    ) -> Self {
        Self {
            explainer,
            histories: histories.into_iter().map(|h| (h.user_id.clone(), h)).collect(),
            k,
            params,
            explanations: RwLock::new(BTreeMap::new()),
            explanation_log: None,
            aspect_cache_path: None,
            ratings: Mutex::new(ratings),
        }
    }

    /// Appends each new explanation to `path` as a JSON line.
    pub fn with_explanation_log(mut self, path: impl Into<PathBuf>) -> Self {
        self.explanation_log = Some(path.into());
        self
    }

    /// Saves the aspect cache to `path` after each explanation.
    pub fn with_aspect_cache_path(mut self, path: impl Into<PathBuf>) -> Self {
        self.aspect_cache_path = Some(path.into());
        self
    }

    /// Makes previously generated explanations retrievable and rateable.
    pub fn preload(&self, explanations: impl IntoIterator<Item = Explanation>) {
        let mut map = self.explanations.write().expect("explanations lock");
        let mut ratings = self.ratings.lock().expect("ratings lock");
        for e in explanations {
            ratings.register_explanation(e.id.clone(), e.request.method);
            map.insert(e.id.clone(), e);
        }
    }

    /// Loads catalog, histories, index, caches and logs named by `config`.
    pub fn from_config(config: &AppConfig) -> Result<Self, ServiceError> {
        config.validate()?;
        let (catalog, _) = ingest_catalog(config.catalog_file(), CatalogFormat::Jsonl)
            .map_err(|e| load_err("catalog")(e.to_string()))?;
        let histories = if config.history_file().exists() {
            load_history(config.history_file()).map_err(|e| load_err("history")(e.to_string()))?
        } else {
            Vec::new()
        };
        let index = EmbeddingIndex::load(config.index_file()).map_err(|e| load_err("embedding index")(e.to_string()))?;
        if !index.is_current_for(&catalog, index.model_id()) {
            return Err(load_err("embedding index")(
                "index does not match the catalog; run `explainrec embed`".into(),
            ));
        }
        let cache = AspectCache::load(config.aspect_cache_file()).map_err(|e| load_err("aspect cache")(e.to_string()))?;
        let ratings = RatingStore::open(config.ratings_file(), config.criterion_set()?)
            .map_err(|e| load_err("ratings log")(e.to_string()))?;
        let templates = config.templates()?;
        let gateway = config.gateway()?;
        let params = config.generation_params();
        let extractor = AspectExtractor::new(gateway.clone(), config.examples()?, templates.clone())
            .with_params(params.clone().with_max_tokens(ASPECT_MAX_TOKENS));
        let explainer = Explainer::new(
            Arc::new(catalog),
            Arc::new(index),
            gateway,
            extractor,
            Arc::new(cache),
            templates,
        );
        let log = config.explanations_file();
        let previous = read_explanation_log(&log).map_err(|e| load_err("explanation log")(e.to_string()))?;
        let state = Self::new(explainer, histories, ratings, config.k, params)
            .with_explanation_log(log)
            .with_aspect_cache_path(config.aspect_cache_file());
        state.preload(previous);
        Ok(state)
    }

    fn catalog(&self) -> &Catalog {
        self.explainer.catalog()
    }
}

/// Reads a JSON-lines explanation log; a missing file is empty.
pub fn read_explanation_log(path: &Path) -> std::io::Result<Vec<Explanation>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for (n, line) in BufReader::new(std::fs::File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e = serde_json::from_str(&line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1))
        })?;
        out.push(e);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: u16,
    pub code: String,
    pub message: String,
    pub stage: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>, stage: Option<&str>) -> Self {
        Self {
            status: status.as_u16(),
            code: code.into(),
            message: message.into(),
            stage: stage.map(str::to_string),
        }
    }

    fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("{what} `{id}` not found"), None)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message, None)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<ExplainError> for ApiError {
    fn from(e: ExplainError) -> Self {
        let (status, code) = match e.kind {
            FailureKind::NotFound => (StatusCode::NOT_FOUND, "not_found"),
            FailureKind::InvalidRequest => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_request"),
            FailureKind::Upstream => (StatusCode::BAD_GATEWAY, "upstream_failure"),
        };
        Self::new(status, code, e.message, Some(&e.stage.to_string()))
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        Self::new(r.status(), "invalid_body", r.body_text(), Some("request"))
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/items/{id}", get(get_item))
        .route("/users/{id}/history", get(get_history))
        .route("/explain", post(explain))
        .route("/explanations/{id}", get(get_explanation))
        .route("/ratings", post(post_rating))
        .route("/stats", get(get_stats))
        .with_state(state)
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok" }))
}

async fn get_item(State(state): State<Arc<AppState>>, UrlPath(id): UrlPath<String>) -> ApiResult<Item> {
    state
        .catalog()
        .get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("item", &id))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub item_id: String,
    pub rating: Option<u8>,
    pub timestamp: Option<i64>,
    /// `None` when the item is missing from the catalog.
    pub item: Option<Item>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryResponse {
    pub user_id: String,
    pub interactions: Vec<HistoryEntry>,
}

async fn get_history(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<HistoryResponse> {
    let history = state.histories.get(&id).ok_or_else(|| ApiError::not_found("user", &id))?;
    let interactions = history
        .interactions
        .iter()
        .map(|i| HistoryEntry {
            item_id: i.item_id.clone(),
            rating: i.rating,
            timestamp: i.timestamp,
            item: state.catalog().get(&i.item_id).cloned(),
        })
        .collect();
    Ok(Json(HistoryResponse {
        user_id: id,
        interactions,
    }))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplainBody {
    pub recommended_id: String,
    pub user_id: String,
    pub method: Method,
    #[serde(default)]
    pub k: Option<usize>,
}

async fn explain(
    State(state): State<Arc<AppState>>,
    body: Result<Json<ExplainBody>, JsonRejection>,
) -> ApiResult<Explanation> {
    let Json(body) = body?;
    let history = state
        .histories
        .get(&body.user_id)
        .cloned()
        .ok_or_else(|| ApiError::not_found("user", &body.user_id))?;
    let mut request = ExplanationRequest::new(body.recommended_id, history, body.method);
    request.k = body.k.unwrap_or(state.k);
    request.params = state.params.clone();

    let worker = state.clone();
    let explanation = tokio::task::spawn_blocking(move || worker.run_explain(&request))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    Ok(Json(explanation))
}

impl AppState {
    fn run_explain(&self, request: &ExplanationRequest) -> Result<Explanation, ApiError> {
        let explanation = self.explainer.generate_explanation(request)?;
        if let Some(path) = &self.aspect_cache_path {
            if let Err(e) = self.explainer.aspect_cache().save(path) {
                tracing::warn!(error = %e, "aspect cache not saved");
            }
        }
        let fresh = {
            let mut map = self.explanations.write().expect("explanations lock");
            map.insert(explanation.id.clone(), explanation.clone()).is_none()
        };
        self.ratings
            .lock()
            .expect("ratings lock")
            .register_explanation(explanation.id.clone(), explanation.request.method);
        if fresh {
            if let Some(path) = &self.explanation_log {
                append_json_line(path, &explanation).map_err(|e| ApiError::internal(e.to_string()))?;
            }
        }
        Ok(explanation)
    }
}

fn append_json_line<T: Serialize>(path: &Path, value: &T) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    f.write_all(&line)
}

async fn get_explanation(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Explanation> {
    let map = state.explanations.read().expect("explanations lock");
    map.get(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::not_found("explanation", &id))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatingBody {
    pub explanation_id: String,
    pub rater_id: String,
    pub criterion: String,
    pub score: u8,
}

async fn post_rating(
    State(state): State<Arc<AppState>>,
    body: Result<Json<RatingBody>, JsonRejection>,
) -> Result<(StatusCode, Json<Acknowledgment>), ApiError> {
    let Json(body) = body?;
    let record = RatingRecord::new(body.explanation_id, body.rater_id, body.criterion, body.score);
    let worker = state.clone();
    let ack = tokio::task::spawn_blocking(move || worker.ratings.lock().expect("ratings lock").record_rating(record))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
        .map_err(|e| match e {
            EvalError::Io(m) => ApiError::internal(m),
            other => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_rating", other.to_string(), Some("rating")),
        })?;
    let status = if ack.replaced { StatusCode::OK } else { StatusCode::CREATED };
    Ok((status, Json(ack)))
}

async fn get_stats(State(state): State<Arc<AppState>>) -> ApiResult<crate::evaluation::StatsReport> {
    Ok(Json(state.ratings.lock().expect("ratings lock").report()))
}

async fn shutdown_signal() {
    if tokio::signal::ctrl_c().await.is_err() {
        std::future::pending::<()>().await;
    }
    tracing::info!("shutting down");
}

/// Runs the server until Ctrl-C. Blocking clients are built before the
/// runtime starts and dropped after it stops.
pub fn serve(config: &AppConfig) -> Result<(), ServiceError> {
    let state = Arc::new(AppState::from_config(config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    let result = runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&config.listen).await?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router(state.clone()))
            .with_graceful_shutdown(shutdown_signal())
            .await
    });
    drop(runtime);
    drop(state);
    result.map_err(ServiceError::from)
}
