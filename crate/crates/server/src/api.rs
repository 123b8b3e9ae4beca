//! Routes under `/v1`.
//!
//! | method | path                                   | success |
//! |--------|----------------------------------------|---------|
//! | POST   | `/v1/index`                            | 200     |
//! | POST   | `/v1/items`                            | 201     |
//! | GET    | `/v1/items/{id}/index`                 | 200     |
//! | POST   | `/v1/emotion-ids`                      | 201     |
//! | POST   | `/v1/sessions`                         | 201     |
//! | POST   | `/v1/sessions/{token}/recommendations` | 200     |
//! | DELETE | `/v1/sessions/{token}`                 | 204     |
//!
//! Errors: 400 malformed input, 404 unknown item or session, 410 expired
//! session, 422 text without emotional signal, 502 LLM backend faults.

use std::collections::HashSet;
use std::sync::Arc;

use affectrec::affect::AffectiveIndex;
use affectrec::catalog::Catalog;
use affectrec::corpus::{extract_batch, BatchError};
use affectrec::extraction::{extract_index, Backend, Document};
use affectrec::privacy::{issue_emotion_id, AuditedStorage, SessionStore, SessionToken};
use affectrec::profiles::{CatalogItem, UserProfile};
use affectrec::recommender::{recommend, NeighborhoodConfig, RecommendationList, Strategy};
use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<SessionStore>,
    catalog: Arc<Catalog>,
    backend: Arc<Backend>,
    storage: Arc<AuditedStorage>,
}

impl AppState {
    pub fn new(
        backend: Backend,
        catalog: Arc<Catalog>,
        sessions: Arc<SessionStore>,
        storage: Arc<AuditedStorage>,
    ) -> Self {
        Self {
            sessions,
            catalog,
            backend: Arc::new(backend),
            storage,
        }
    }

    pub fn sessions(&self) -> &Arc<SessionStore> {
        &self.sessions
    }

    pub fn catalog(&self) -> &Arc<Catalog> {
        &self.catalog
    }

    pub fn storage(&self) -> &Arc<AuditedStorage> {
        &self.storage
    }

    fn batch_width(&self) -> usize {
        match self.backend.as_ref() {
            Backend::Llm(llm) => llm.config().max_in_flight,
            Backend::Lexicon(_) => 1,
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/index", post(index_text))
        .route("/v1/items", post(ingest_items))
        .route("/v1/items/{id}/index", get(item_index))
        .route("/v1/emotion-ids", post(new_emotion_id))
        .route("/v1/sessions", post(open_session))
        .route("/v1/sessions/{token}", delete(close_session))
        .route("/v1/sessions/{token}/recommendations", post(recommendations))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &[u8], code: &'static str) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(code, e.to_string()))
}

async fn health() -> Json<serde_json::Value> {
    Json(serde_json::json!({"status": "ok"}))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IndexResponse {
    pub affective_index: AffectiveIndex,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexRequest {
    text: String,
}

async fn index_text(State(state): State<AppState>, body: Bytes) -> Result<Json<IndexResponse>, ApiError> {
    let request: IndexRequest = parse_json(&body, "bad_request")?;
    if request.text.trim().is_empty() {
        return Err(ApiError::bad_request("empty_text", "text must be non-empty"));
    }
    let backend = state.backend.clone();
    let doc = Document::new("request", request.text);
    let index = blocking(move || extract_index(&doc, &backend)).await??;
    Ok(Json(IndexResponse { affective_index: index }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemRef {
    pub item_id: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemError {
    pub item_id: String,
    pub error_code: String,
    pub message: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct IngestResponse {
    pub count: usize,
    pub items: Vec<ItemRef>,
    pub errors: Vec<ItemError>,
}

/// A JSON array of documents, or JSONL with one document per line.
fn parse_documents(body: &[u8]) -> Result<Vec<Document>, ApiError> {
    let text = std::str::from_utf8(body).map_err(|_| ApiError::bad_request("bad_request", "body is not UTF-8"))?;
    if text.trim_start().starts_with('[') {
        return parse_json(body, "bad_document");
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| ApiError::bad_request("bad_document", format!("line {}: {e}", i + 1)))
        })
        .collect()
}

async fn ingest_items(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let docs = parse_documents(&body)?;
    let mut seen = HashSet::new();
    for doc in &docs {
        if doc.id.trim().is_empty() {
            return Err(ApiError::bad_request("missing_id", "every document needs a non-empty id"));
        }
        if !seen.insert(doc.id.as_str()) || state.catalog.contains(&doc.id) {
            return Err(ApiError::bad_request("duplicate_id", format!("duplicate id {:?}", doc.id)));
        }
    }

    let backend = state.backend.clone();
    let width = state.batch_width();
    let results = blocking(move || extract_batch(docs.into_iter().map(Ok), &backend, width).collect::<Vec<_>>()).await?;

    let mut response = IngestResponse {
        count: 0,
        items: Vec::new(),
        errors: Vec::new(),
    };
    for result in results {
        match result {
            Ok(record) => {
                let item_id = record.id.clone();
                match state.catalog.insert(CatalogItem::from(record)) {
                    Ok(()) => response.items.push(ItemRef { item_id }),
                    Err(e) => {
                        let e = ApiError::from(e);
                        response.errors.push(ItemError {
                            item_id,
                            error_code: e.code.to_owned(),
                            message: e.message,
                        });
                    }
                }
            }
            Err(BatchError::Extraction { id, error }) => response.errors.push(ItemError {
                item_id: id,
                error_code: error.code().to_owned(),
                message: error.to_string(),
            }),
            Err(BatchError::Corpus(e)) => return Err(ApiError::internal(e.to_string())),
        }
    }
    response.count = response.items.len();
    Ok((StatusCode::CREATED, Json(response)).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ItemIndexResponse {
    pub item_id: String,
    pub affective_index: AffectiveIndex,
}

async fn item_index(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<ItemIndexResponse>, ApiError> {
    let item = state
        .catalog
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "item_not_found", format!("no item {id:?}")))?;
    Ok(Json(ItemIndexResponse {
        item_id: item.item_id,
        affective_index: item.index,
    }))
}

async fn new_emotion_id() -> Result<Response, ApiError> {
    let id = issue_emotion_id().map_err(|e| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "entropy_unavailable", e.to_string()))?;
    Ok((StatusCode::CREATED, Json(serde_json::json!({ "emotion_id": id }))).into_response())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SessionResponse {
    pub session_token: String,
    pub expires_in_seconds: u64,
}

async fn open_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let profile: UserProfile = parse_json(&body, "invalid_profile")?;
    let emotion_id = profile.emotion_id.clone();
    let token = state.sessions.open_session(&emotion_id, profile)?;
    let response = SessionResponse {
        session_token: token.as_str().to_owned(),
        expires_in_seconds: state.sessions.ttl().as_secs(),
    };
    Ok((StatusCode::CREATED, Json(response)).into_response())
}

async fn close_session(State(state): State<AppState>, Path(token): Path<String>) -> StatusCode {
    state.sessions.close_session(&SessionToken::from_string(token));
    StatusCode::NO_CONTENT
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RecommendRequest {
    strategy: String,
    n: usize,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    k_users: Option<usize>,
    #[serde(default)]
    peers: Option<Vec<serde_json::Value>>,
}

async fn recommendations(
    State(state): State<AppState>,
    Path(token): Path<String>,
    body: Bytes,
) -> Result<Json<RecommendationList>, ApiError> {
    let profile = state.sessions.get_profile(&SessionToken::from_string(token))?;
    let request: RecommendRequest = parse_json(&body, "bad_request")?;
    let strategy: Strategy = request
        .strategy
        .parse()
        .map_err(|e: String| ApiError::bad_request("bad_strategy", e))?;

    let defaults = NeighborhoodConfig::new(request.n);
    let config = NeighborhoodConfig {
        k_users: request.k_users.unwrap_or(defaults.k_users),
        alpha: request.alpha.unwrap_or(defaults.alpha),
        n: request.n,
    };
    config
        .check()
        .map_err(|e| ApiError::bad_request("bad_config", e.to_string()))?;

    // Peer profiles live only for this request.
    let peers: Vec<UserProfile> = match (strategy, request.peers) {
        (Strategy::Content, _) => Vec::new(),
        (_, None) => {
            return Err(ApiError::bad_request(
                "missing_peers",
                "collaborative and hybrid strategies need a peers list",
            ))
        }
        (_, Some(values)) => values
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                serde_json::from_value(v)
                    .map_err(|e| ApiError::bad_request("invalid_profile", format!("peer {i}: {e}")))
            })
            .collect::<Result<_, _>>()?,
    };

    let catalog = state.catalog.snapshot();
    let list = blocking(move || recommend(strategy, &profile, &peers, &catalog, &config)).await?;
    Ok(Json(list))
}
