use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use topicscope::dynamics::DynamicsError;
use topicscope::model::QueryError;
use topicscope::reduce::ReduceError;
use topicscope::represent::RepresentError;
use topicscope::stats::StatsError;

/// Error body returned by every failing endpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn topic_not_found(topic: usize) -> Self {
        Self::new(StatusCode::NOT_FOUND, "topic_not_found", format!("unknown topic {topic}"))
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code.to_string(), message: self.message };
        (self.status, Json(body)).into_response()
    }
}

impl From<RepresentError> for ApiError {
    fn from(e: RepresentError) -> Self {
        match e {
            RepresentError::UnknownTopic(t) => Self::topic_not_found(t),
            RepresentError::NoSearchableTerms => Self::new(StatusCode::BAD_REQUEST, "no_searchable_terms", e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl From<DynamicsError> for ApiError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::UnknownTopic(t) => Self::topic_not_found(t),
            DynamicsError::BadWidth(_) => Self::new(StatusCode::BAD_REQUEST, "bad_bin_width", e.to_string()),
            DynamicsError::EmptyInterval { .. } => Self::new(StatusCode::BAD_REQUEST, "empty_range", e.to_string()),
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl From<StatsError> for ApiError {
    fn from(e: StatsError) -> Self {
        let unprocessable = |code| Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string());
        match e {
            StatsError::UnknownTopic(t) => Self::topic_not_found(t),
            StatsError::WindowTooNarrow { .. } => unprocessable("window_too_narrow"),
            StatsError::Degenerate => unprocessable("degenerate_ties"),
            StatsError::BadAlpha(_) => Self::new(StatusCode::BAD_REQUEST, "bad_alpha", e.to_string()),
            StatsError::NonFinite(_)
            | StatsError::Empty
            | StatsError::TooFewGroups(_)
            | StatsError::EmptyGroup(_)
            | StatsError::BadArgument(_) => unprocessable("invalid_test_input"),
        }
    }
}

impl From<ReduceError> for ApiError {
    fn from(e: ReduceError) -> Self {
        match e {
            ReduceError::DimensionMismatch { .. } | ReduceError::NonFinite => {
                Self::new(StatusCode::BAD_REQUEST, "bad_embedding", e.to_string())
            }
            other => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", other.to_string()),
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::Represent(e) => e.into(),
            QueryError::Dynamics(e) => e.into(),
            QueryError::Stats(e) => e.into(),
            QueryError::Reduce(e) => e.into(),
        }
    }
}
