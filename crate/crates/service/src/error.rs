use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use mugtrack_core::{MaskError, PipelineError, SegmentError, StoreError};

/// Error body: `{"code": "...", "message": "..."}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, code: code.into(), message: message.into() }
    }

    pub fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "code": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::UnknownTrack(_) => StatusCode::NOT_FOUND,
            StoreError::FrameOutOfRange { .. } | StoreError::DimensionMismatch { .. } | StoreError::InvalidStatus => {
                StatusCode::BAD_REQUEST
            }
            StoreError::Locked(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<SegmentError> for ApiError {
    fn from(e: SegmentError) -> Self {
        let status = match &e {
            SegmentError::InvalidRequest(_) => StatusCode::BAD_REQUEST,
            SegmentError::NoCandidate => StatusCode::UNPROCESSABLE_ENTITY,
            SegmentError::BackendUnavailable(_) | SegmentError::Protocol(_) => StatusCode::BAD_GATEWAY,
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Segment(s) => s.into(),
            PipelineError::InvalidConfig(_) => Self::bad_request(e.code(), e.to_string()),
            other => Self::internal(other.code(), other.to_string()),
        }
    }
}

impl From<MaskError> for ApiError {
    fn from(e: MaskError) -> Self {
        Self::bad_request(e.code(), e.to_string())
    }
}
