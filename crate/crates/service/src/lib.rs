//! HTTP facade over an infostyle search index.
//!
//! Handlers read an immutable [`Snapshot`] (model, index, corpus paths)
//! through [`AppState`]; installing a new snapshot swaps it atomically, so a
//! request sees either the old snapshot or the new one, never a mix.

mod error;

pub use error::ApiError;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use infostyle::embed::embed_image;
use infostyle::store::scan_corpus;
use infostyle::{decode_image, normalize_window, Hit, MetricModel, SearchIndex, Searcher};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::services::ServeDir;

pub const DEFAULT_K: usize = 5;
pub const MAX_K: usize = 100;
pub const MAX_UPLOAD_BYTES: usize = 20 * 1024 * 1024;

/// Everything a request needs, loaded once and never mutated.
#[derive(Debug)]
pub struct Snapshot {
    searcher: Searcher,
    fingerprint: String,
    images: BTreeMap<String, PathBuf>,
}

impl Snapshot {
    /// `images` maps corpus ids to their original files.
    pub fn new(searcher: Searcher, images: BTreeMap<String, PathBuf>) -> infostyle::Result<Self> {
        let fingerprint = searcher.model().fingerprint()?;
        Ok(Self {
            searcher,
            fingerprint,
            images,
        })
    }

    /// Load model and index files and list the corpus directory.
    pub fn load(
        model: &std::path::Path,
        index: &std::path::Path,
        corpus: &std::path::Path,
    ) -> infostyle::Result<Self> {
        let model = MetricModel::load(model)?;
        let index = SearchIndex::load(index)?;
        let images = scan_corpus(corpus)?
            .into_iter()
            .map(|e| (e.id, e.path))
            .collect();
        Self::new(Searcher::new(model, index)?, images)
    }

    pub fn searcher(&self) -> &Searcher {
        &self.searcher
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}

#[derive(Clone, Debug)]
pub struct ServiceConfig {
    /// Allowed browser origins; `*` allows any. Empty disables CORS headers.
    pub cors_origins: Vec<String>,
    /// Directory of static UI assets served for unmatched paths.
    pub ui_dir: Option<PathBuf>,
    /// Concurrent CPU-bound image jobs (uploads, thumbnails).
    pub workers: usize,
    pub max_upload_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            cors_origins: Vec::new(),
            ui_dir: None,
            workers: std::thread::available_parallelism().map_or(2, |n| n.get()),
            max_upload_bytes: MAX_UPLOAD_BYTES,
        }
    }
}

struct Inner {
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    workers: Semaphore,
    config: ServiceConfig,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// A state with no snapshot yet; `/health` answers 503 until one is
    /// installed.
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                snapshot: RwLock::new(None),
                workers: Semaphore::new(config.workers.max(1)),
                config,
            }),
        }
    }

    pub fn install(&self, snapshot: Snapshot) {
        let mut slot = self.inner.snapshot.write().unwrap_or_else(|e| e.into_inner());
        *slot = Some(Arc::new(snapshot));
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.inner
            .snapshot
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .clone()
    }

    fn ready(&self) -> Result<Arc<Snapshot>, ApiError> {
        self.snapshot().ok_or_else(ApiError::not_ready)
    }

    /// Run CPU-bound work on the blocking pool, bounded by the worker count.
    async fn blocking<T, F>(&self, f: F) -> Result<T, ApiError>
    where
        F: FnOnce() -> Result<T, ApiError> + Send + 'static,
        T: Send + 'static,
    {
        let _permit = self
            .inner
            .workers
            .acquire()
            .await
            .map_err(|_| ApiError::internal("worker pool closed"))?;
        tokio::task::spawn_blocking(f)
            .await
            .map_err(|e| ApiError::internal(e.to_string()))?
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultItem {
    pub id: String,
    pub distance: f64,
    pub thumbnail_url: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResponse {
    pub query_id: String,
    pub results: Vec<ResultItem>,
}

impl SearchResponse {
    fn new(query_id: impl Into<String>, hits: Vec<Hit>) -> Self {
        Self {
            query_id: query_id.into(),
            results: hits
                .into_iter()
                .map(|h| ResultItem {
                    thumbnail_url: format!("/thumb/{}", h.id),
                    id: h.id,
                    distance: h.distance,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub index_size: usize,
    pub model_fingerprint: String,
}

pub fn router(state: AppState) -> Router {
    let config = state.inner.config.clone();
    let mut app = Router::new()
        .route("/health", get(health))
        .route("/similar/{id}", get(similar))
        .route(
            "/search",
            // room for multipart framing around a maximal image
            post(search).layer(DefaultBodyLimit::max(config.max_upload_bytes + 64 * 1024)),
        )
        .route("/image/{id}", get(original_image))
        .route("/thumb/{id}", get(thumbnail))
        .with_state(state);
    app = match &config.ui_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route") }),
    };
    if let Some(cors) = cors_layer(&config.cors_origins) {
        app = app.layer(cors);
    }
    app
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(
            origins
                .iter()
                .filter_map(|o| HeaderValue::from_str(o).ok()),
        )
    };
    Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([axum::http::Method::GET, axum::http::Method::POST]),
    )
}

/// Bind `addr` and serve until the process is stopped.
pub async fn serve(addr: SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

fn parse_k(params: &HashMap<String, String>) -> Result<usize, ApiError> {
    let Some(raw) = params.get("k") else {
        return Ok(DEFAULT_K);
    };
    match raw.parse::<usize>() {
        Ok(k) if (1..=MAX_K).contains(&k) => Ok(k),
        _ => Err(ApiError::bad_request(
            "invalid_k",
            format!("k must be an integer in 1..={MAX_K}, got `{raw}`"),
        )),
    }
}

type Params = Result<Query<HashMap<String, String>>, axum::extract::rejection::QueryRejection>;

fn query_params(params: Params) -> Result<HashMap<String, String>, ApiError> {
    params
        .map(|Query(p)| p)
        .map_err(|e| ApiError::bad_request("invalid_query", e.body_text()))
}

async fn health(State(state): State<AppState>) -> Result<Json<Health>, ApiError> {
    let snap = state.ready()?;
    Ok(Json(Health {
        status: "ok".into(),
        index_size: snap.searcher.index().len(),
        model_fingerprint: snap.fingerprint.clone(),
    }))
}

async fn similar(
    State(state): State<AppState>,
    Path(id): Path<String>,
    params: Params,
) -> Result<Json<SearchResponse>, ApiError> {
    let k = parse_k(&query_params(params)?)?;
    let snap = state.ready()?;
    let hits = snap.searcher.query_id(&id, k, true).map_err(ApiError::from_core)?;
    Ok(Json(SearchResponse::new(id, hits)))
}

async fn search(
    State(state): State<AppState>,
    params: Params,
    mut multipart: Multipart,
) -> Result<Json<SearchResponse>, ApiError> {
    let k = parse_k(&query_params(params)?)?;
    let snap = state.ready()?;
    let limit = state.inner.config.max_upload_bytes;
    let mut payload = None;
    while let Some(field) = multipart.next_field().await.map_err(ApiError::multipart)? {
        if field.name() == Some("image") {
            payload = Some(field.bytes().await.map_err(ApiError::multipart)?);
            break;
        }
    }
    let bytes = payload
        .ok_or_else(|| ApiError::bad_request("missing_image", "multipart field `image` is required"))?;
    if bytes.len() > limit {
        return Err(ApiError::too_large(limit));
    }
    let hits = state
        .blocking(move || {
            let img = decode_image(&bytes).map_err(|e| ApiError::bad_request("undecodable_image", e.to_string()))?;
            let q = embed_image(snap.searcher.model(), &img).map_err(ApiError::from_core)?;
            snap.searcher.query(&q, k, None).map_err(ApiError::from_core)
        })
        .await?;
    Ok(Json(SearchResponse::new("upload", hits)))
}

fn content_type(path: &std::path::Path) -> &'static str {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        _ => "application/octet-stream",
    }
}

async fn read_original(snap: &Snapshot, id: &str) -> Result<(PathBuf, Vec<u8>), ApiError> {
    let path = snap
        .images
        .get(id)
        .ok_or_else(|| ApiError::unknown_id(id))?
        .clone();
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::internal(format!("reading {}: {e}", path.display())))?;
    Ok((path, bytes))
}

async fn original_image(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let snap = state.ready()?;
    let (path, bytes) = read_original(&snap, &id).await?;
    Ok(([(header::CONTENT_TYPE, content_type(&path))], bytes).into_response())
}

async fn thumbnail(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = state.ready()?;
    let (_, bytes) = read_original(&snap, &id).await?;
    let png = state
        .blocking(move || {
            let img = decode_image(&bytes).map_err(|e| ApiError::internal(e.to_string()))?;
            normalize_window(&img).to_png().map_err(|e| ApiError::internal(e.to_string()))
        })
        .await?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}
