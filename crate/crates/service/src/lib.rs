//! Read-only JSON API over a fitted [`TopicModel`].
//!
//! | Method | Path | Body |
//! |---|---|---|
//! | GET | `/healthz` | `{"status":"ok"}` |
//! | GET | `/api/v1/model` | [`ModelSummary`] |
//! | GET | `/api/v1/topics/search?q=&n=` | [`SearchResult`] |
//! | GET | `/api/v1/topics/{id}/series?bin_weeks=&from=&to=` | [`SeriesResponse`] |
//! | POST | `/api/v1/topics/nearest` | [`NearestRequest`] to [`NearestResponse`] |
//! | POST | `/api/v1/tests` | [`TestRequest`] to [`TestResponse`] |
//! | GET | `/api/v1/overlays` | [`OverlaySeries`] |
//!
//! Failures carry an [`ErrorBody`] with a stable machine `code`.

mod error;

use std::future::Future;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tower_http::cors::{AllowOrigin, CorsLayer};

use topicscope::dynamics::{BinWidth, OverlaySeries, SeriesPoint};
use topicscope::ingest::DateWindow;
use topicscope::model::{TopicModel, MAX_RESULTS};
use topicscope::represent::{SearchResult, TopicCard};
use topicscope::stats::{KruskalWallisResult, DEFAULT_ALPHA};

pub use error::{ApiError, ErrorBody};

pub const DEFAULT_RESULTS: usize = 6;
pub const DEFAULT_BIN_WEEKS: u32 = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryCounts {
    pub documents: usize,
    pub topics: usize,
    pub outliers: usize,
    pub vocabulary: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub created_at: String,
    pub config_hash: String,
    pub stopword_list: String,
    pub counts: SummaryCounts,
    pub window: DateWindow,
    pub bin_widths: Vec<u32>,
    pub embedding_dim: usize,
    pub reduced_dim: usize,
    pub reduce_frequent_words: bool,
    pub topic_sizes: Vec<usize>,
}

impl ModelSummary {
    pub fn of(model: &TopicModel) -> Self {
        let info = &model.info;
        Self {
            created_at: info.created_at.clone(),
            config_hash: info.config_hash.clone(),
            stopword_list: info.stopword_list.clone(),
            counts: SummaryCounts {
                documents: info.documents,
                topics: info.topics,
                outliers: info.outliers,
                vocabulary: info.vocabulary,
            },
            window: info.window,
            bin_widths: model.series.iter().map(|s| s.width().weeks()).collect(),
            embedding_dim: info.embedding_dim,
            reduced_dim: info.reduced_dim,
            reduce_frequent_words: info.reduce_frequent_words,
            topic_sizes: model.topic_sizes.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct SearchParams {
    pub q: Option<String>,
    pub n: Option<usize>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct SeriesParams {
    pub bin_weeks: Option<u32>,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesResponse {
    pub topic_id: usize,
    pub bin_weeks: u32,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub points: Vec<SeriesPoint>,
    /// Case counts and events inside `[from, to]`.
    pub overlays: OverlaySeries,
}

fn default_bin_weeks() -> u32 {
    DEFAULT_BIN_WEEKS
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestRequest {
    pub topic_id: usize,
    pub window1: [NaiveDate; 2],
    pub window2: [NaiveDate; 2],
    #[serde(default = "default_bin_weeks")]
    pub bin_weeks: u32,
    #[serde(default)]
    pub alpha: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResponse {
    pub topic_id: usize,
    pub window1: [NaiveDate; 2],
    pub window2: [NaiveDate; 2],
    pub bin_weeks: u32,
    pub alpha: f64,
    pub overlapping: bool,
    pub result: KruskalWallisResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearestRequest {
    pub embedding: Vec<f64>,
    #[serde(default)]
    pub n: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NearestResponse {
    pub topics: Vec<TopicCard>,
}

#[derive(Clone)]
struct AppState {
    model: Arc<TopicModel>,
    summary: Arc<ModelSummary>,
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn window(pair: [NaiveDate; 2], name: &str) -> Result<DateWindow, ApiError> {
    DateWindow::new(pair[0], pair[1])
        .map_err(|_| ApiError::new(StatusCode::BAD_REQUEST, "bad_window", format!("{name}: start {} is after end {}", pair[0], pair[1])))
}

fn bin_width(weeks: u32) -> Result<BinWidth, ApiError> {
    Ok(BinWidth::new(weeks)?)
}

async fn healthz(State(s): State<AppState>) -> Json<serde_json::Value> {
    Json(serde_json::json!({ "status": "ok", "topics": s.model.n_topics() }))
}

async fn model_info(State(s): State<AppState>) -> Json<ModelSummary> {
    Json(s.summary.as_ref().clone())
}

async fn search(State(s): State<AppState>, params: Result<Query<SearchParams>, QueryRejection>) -> ApiResult<SearchResult> {
    let Query(p) = params.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let q = p.q.unwrap_or_default();
    let n = p.n.unwrap_or(DEFAULT_RESULTS).min(MAX_RESULTS);
    Ok(Json(s.model.search(&q, n)?))
}

fn topic_id(path: Result<Path<usize>, PathRejection>) -> Result<usize, ApiError> {
    path.map(|Path(id)| id).map_err(|e| ApiError::bad_request(format!("topic id: {}", e.body_text())))
}

async fn series(
    State(s): State<AppState>,
    path: Result<Path<usize>, PathRejection>,
    params: Result<Query<SeriesParams>, QueryRejection>,
) -> ApiResult<SeriesResponse> {
    let topic = topic_id(path)?;
    let Query(p) = params.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let width = bin_width(p.bin_weeks.unwrap_or(DEFAULT_BIN_WEEKS))?;
    if !s.model.has_topic(topic) {
        return Err(ApiError::topic_not_found(topic));
    }
    let full = s.model.info.window;
    let range = window([p.from.unwrap_or(full.start), p.to.unwrap_or(full.end)], "range")?;
    let series = s.model.topic_series(topic, width, Some(range))?;
    Ok(Json(SeriesResponse {
        topic_id: topic,
        bin_weeks: width.weeks(),
        from: range.start,
        to: range.end,
        points: series.points,
        overlays: s.model.overlays.slice(&range),
    }))
}

async fn nearest(State(s): State<AppState>, body: Result<Json<NearestRequest>, JsonRejection>) -> ApiResult<NearestResponse> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let n = req.n.unwrap_or(DEFAULT_RESULTS);
    Ok(Json(NearestResponse { topics: s.model.search_by_embedding(&req.embedding, n)? }))
}

async fn run_test(State(s): State<AppState>, body: Result<Json<TestRequest>, JsonRejection>) -> ApiResult<TestResponse> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let width = bin_width(req.bin_weeks)?;
    let (w1, w2) = (window(req.window1, "window1")?, window(req.window2, "window2")?);
    let alpha = req.alpha.unwrap_or(DEFAULT_ALPHA);
    let t = s.model.test_windows(req.topic_id, &w1, &w2, width, alpha)?;
    Ok(Json(TestResponse {
        topic_id: req.topic_id,
        window1: req.window1,
        window2: req.window2,
        bin_weeks: width.weeks(),
        alpha,
        overlapping: t.overlapping,
        result: t.result,
    }))
}

async fn overlays(State(s): State<AppState>) -> Json<OverlaySeries> {
    Json(s.model.overlays.clone())
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint")
}

async fn method_not_allowed() -> ApiError {
    ApiError::new(StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed", "method not allowed on this endpoint")
}

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("invalid CORS origin `{0}`")]
    Cors(String),
    #[error("cannot bind {addr}: {source}")]
    Bind { addr: String, source: std::io::Error },
    #[error("server failed: {0}")]
    Io(#[from] std::io::Error),
}

fn cors_layer(origins: &[String]) -> Result<Option<CorsLayer>, ServeError> {
    if origins.is_empty() {
        return Ok(None);
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        let values = origins
            .iter()
            .map(|o| HeaderValue::from_str(o).map_err(|_| ServeError::Cors(o.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        AllowOrigin::list(values)
    };
    Ok(Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE]),
    ))
}

/// Routes over a shared, immutable model. `cors_origins` may contain `*`.
pub fn router(model: Arc<TopicModel>, cors_origins: &[String]) -> Result<Router, ServeError> {
    let state = AppState { summary: Arc::new(ModelSummary::of(&model)), model };
    let api = Router::new()
        .route("/model", get(model_info))
        .route("/topics/search", get(search))
        .route("/topics/nearest", post(nearest))
        .route("/topics/{id}/series", get(series))
        .route("/tests", post(run_test))
        .route("/overlays", get(overlays));
    let mut app = Router::new()
        .route("/healthz", get(healthz))
        .nest("/api/v1", api)
        .fallback(not_found)
        .method_not_allowed_fallback(method_not_allowed)
        .with_state(state);
    if let Some(cors) = cors_layer(cors_origins)? {
        app = app.layer(cors);
    }
    Ok(app)
}

pub async fn bind(addr: &str) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind { addr: addr.to_string(), source })
}

/// Serves `app` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    app: Router,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await?;
    Ok(())
}
