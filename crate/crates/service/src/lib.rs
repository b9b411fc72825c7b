//! HTTP query service over a loaded snapshot.
//!
//! Every GET endpoint is a serialization of one [`SearchEngine`] call. The engine sits
//! behind an `Arc` that `POST /admin/reload` swaps atomically; in-flight requests keep
//! the engine they started with.

pub mod config;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use hashbridge_core::{ModelSnapshot, RankError, RankingOptions, ScoredHashtag, SearchEngine, UserContext};
use serde::Serialize;
use serde_json::json;

pub use config::{ConfigError, ServiceConfig};

/// A JSON error body `{code, message}` with its status.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({"code": self.code, "message": self.message}))).into_response()
    }
}

impl From<RankError> for ApiError {
    fn from(e: RankError) -> Self {
        let status = match e {
            RankError::UnknownCategory(_) | RankError::UnknownHashtag(_) => StatusCode::NOT_FOUND,
            RankError::Shape(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let code = match e {
            RankError::EmptyQuery => "empty_query",
            RankError::UnknownCategory(_) => "unknown_category",
            RankError::UnknownHashtag(_) => "unknown_hashtag",
            RankError::InvalidWindow { .. } => "invalid_window",
            RankError::InvalidOptions(_) => "invalid_options",
            RankError::Shape(_) => "internal",
        };
        Self::new(status, code, e.to_string())
    }
}

/// One `/search` result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchPanel {
    pub hashtag: String,
    pub score: f64,
    pub similarity: f64,
    pub index_id: u32,
    pub post_count: u64,
    /// Most recent first.
    pub timestamps: Vec<i64>,
    pub search_volume: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrendingResponse {
    pub hashtag: String,
    pub from: i64,
    pub to: i64,
    pub trend: f64,
    pub buckets: Vec<u64>,
}

pub struct AppState {
    engine: RwLock<Option<Arc<SearchEngine>>>,
    snapshot_path: Option<PathBuf>,
    context: UserContext,
    default_top_n: usize,
    timestamp_sample: usize,
}

impl AppState {
    pub fn new(config: &ServiceConfig) -> Self {
        Self {
            engine: RwLock::new(None),
            snapshot_path: config.snapshot.clone(),
            context: config.user_context,
            default_top_n: config.default_top_n,
            timestamp_sample: config.timestamp_sample,
        }
    }

    /// State serving `snapshot` immediately.
    pub fn with_snapshot(config: &ServiceConfig, snapshot: ModelSnapshot) -> Self {
        let s = Self::new(config);
        s.install(snapshot);
        s
    }

    pub fn install(&self, snapshot: ModelSnapshot) {
        let engine = Arc::new(SearchEngine::new(snapshot, self.context));
        *self.engine.write().expect("engine lock") = Some(engine);
    }

    pub fn engine(&self) -> Option<Arc<SearchEngine>> {
        self.engine.read().expect("engine lock").clone()
    }

    /// Loads the configured snapshot file and swaps it in. The old engine stays on failure.
    pub fn reload(&self) -> Result<u64, ApiError> {
        let path = self
            .snapshot_path
            .as_deref()
            .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "no_snapshot_path", "no snapshot path configured"))?;
        let snap = load_snapshot(path)?;
        let digest = snap.meta.digest;
        self.install(snap);
        Ok(digest)
    }

    fn loaded(&self) -> Result<Arc<SearchEngine>, ApiError> {
        self.engine()
            .ok_or_else(|| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "not_loaded", "no snapshot loaded"))
    }
}

fn load_snapshot(path: &Path) -> Result<ModelSnapshot, ApiError> {
    ModelSnapshot::load(path)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "load_failed", e.to_string()))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/stats", get(stats))
        .route("/categories", get(categories))
        .route("/topn", get(topn))
        .route("/search", get(search))
        .route("/trending", get(trending))
        .route("/export.csv", get(export))
        .route("/admin/reload", post(reload))
        .with_state(state)
}

type Params = Query<HashMap<String, String>>;

fn parse_opt<T: std::str::FromStr>(p: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    match p.get(key) {
        None => Ok(None),
        Some(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| ApiError::bad_request(format!("parameter {key} must be an integer, got {v:?}"))),
    }
}

fn required<'a>(p: &'a HashMap<String, String>, key: &str) -> Result<&'a str, ApiError> {
    match p.get(key).map(|s| s.trim()) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(ApiError::bad_request(format!("parameter {key} is required"))),
    }
}

/// Options shared by `/topn` and `/export.csv`.
pub fn topn_options(p: &HashMap<String, String>, default_n: usize) -> Result<RankingOptions, ApiError> {
    Ok(RankingOptions {
        top_n: parse_opt(p, "n")?.unwrap_or(default_n),
        min_post_count: parse_opt(p, "min_posts")?,
        max_post_count: parse_opt(p, "max_posts")?,
        ..RankingOptions::default()
    })
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn stats(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let e = state.loaded()?;
    let s = e.snapshot();
    Ok(Json(json!({
        "digest": format!("{:016x}", s.meta.digest),
        "created_at": s.meta.created_at,
        "config_hash": format!("{:016x}", s.meta.config_hash),
        "dim": s.dim(),
        "node_counts": s.embeddings.node_counts(),
        "hashtags": s.index.len(),
        "categories": s.categories.len(),
        "vocabulary": s.encoder.vocab.words().len(),
    })))
}

async fn categories(State(state): State<Arc<AppState>>) -> Result<Response, ApiError> {
    let e = state.loaded()?;
    Ok(Json(e.snapshot().category_tree()).into_response())
}

fn ranked(state: &AppState, p: &HashMap<String, String>) -> Result<Vec<ScoredHashtag>, ApiError> {
    let e = state.loaded()?;
    let category = required(p, "category")?;
    let opts = topn_options(p, state.default_top_n)?;
    Ok(e.rank_for_category(category, &opts)?)
}

async fn topn(State(state): State<Arc<AppState>>, Query(p): Params) -> Result<Json<Vec<ScoredHashtag>>, ApiError> {
    Ok(Json(ranked(&state, &p)?))
}

/// RFC 4180 CSV of ranked rows.
pub fn export_csv(rows: &[ScoredHashtag]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["hashtag", "similarity", "rerank_score", "post_count"])
        .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.hashtag.clone(),
            r.similarity.to_string(),
            r.rerank_score.to_string(),
            r.post_count.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 input")
}

async fn export(State(state): State<Arc<AppState>>, Query(p): Params) -> Result<Response, ApiError> {
    let rows = ranked(&state, &p)?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], export_csv(&rows)).into_response())
}

pub fn search_panels(e: &SearchEngine, rows: Vec<ScoredHashtag>, sample: usize) -> Vec<SearchPanel> {
    rows.into_iter()
        .map(|s| {
            let rec = e
                .snapshot()
                .index
                .record(s.index_ref)
                .expect("ranked records are indexed");
            SearchPanel {
                timestamps: rec.timestamps.iter().rev().take(sample).copied().collect(),
                hashtag: s.hashtag,
                score: s.rerank_score,
                similarity: s.similarity,
                index_id: s.index_ref,
                post_count: s.post_count,
                search_volume: s.search_volume,
            }
        })
        .collect()
}

async fn search(State(state): State<Arc<AppState>>, Query(p): Params) -> Result<Json<Vec<SearchPanel>>, ApiError> {
    let e = state.loaded()?;
    let q = required(&p, "q")?;
    let opts = RankingOptions::top(parse_opt(&p, "n")?.unwrap_or(state.default_top_n));
    let rows = e.search(q, &opts)?;
    Ok(Json(search_panels(&e, rows, state.timestamp_sample)))
}

async fn trending(State(state): State<Arc<AppState>>, Query(p): Params) -> Result<Json<TrendingResponse>, ApiError> {
    let e = state.loaded()?;
    let tag = required(&p, "tag")?;
    let from = parse_opt(&p, "from")?.ok_or_else(|| ApiError::bad_request("parameter from is required"))?;
    let to = parse_opt(&p, "to")?.ok_or_else(|| ApiError::bad_request("parameter to is required"))?;
    if from >= to {
        return Err(RankError::InvalidWindow { start: from, end: to }.into());
    }
    let rep = e.trending(tag, from, to)?;
    Ok(Json(TrendingResponse {
        hashtag: rep.hashtag,
        from,
        to,
        trend: rep.trend,
        buckets: rep.buckets.to_vec(),
    }))
}

async fn reload(State(state): State<Arc<AppState>>) -> Result<Json<serde_json::Value>, ApiError> {
    let path = state.snapshot_path.clone();
    let st = state.clone();
    let digest = tokio::task::spawn_blocking(move || st.reload())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
    log::info!(
        "reloaded snapshot {}",
        path.map(|p| p.display().to_string()).unwrap_or_default()
    );
    Ok(Json(json!({"status": "reloaded", "digest": format!("{digest:016x}")})))
}

/// Binds `config.bind:config.port`, loads the configured snapshot if any, and serves
/// until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> std::io::Result<()> {
    let state = Arc::new(AppState::new(&config));
    if let Some(path) = &config.snapshot {
        match load_snapshot(path) {
            Ok(s) => state.install(s),
            Err(e) => log::warn!(
                "{}: {}; serving 503 until /admin/reload succeeds",
                path.display(),
                e.message
            ),
        }
    }
    let listener = tokio::net::TcpListener::bind((config.bind.as_str(), config.port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
