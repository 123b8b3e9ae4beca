use affectrec::catalog::CatalogError;
use affectrec::extraction::ExtractionError;
use affectrec::privacy::SessionError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// Uniform error body: `{"error_code": ..., "message": ...}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error_code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error_code: self.code.to_owned(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<ExtractionError> for ApiError {
    fn from(e: ExtractionError) -> Self {
        let status = match e {
            ExtractionError::EmptyText => StatusCode::BAD_REQUEST,
            ExtractionError::NoSignal => StatusCode::UNPROCESSABLE_ENTITY,
            ExtractionError::BackendUnavailable(_)
            | ExtractionError::ParseFailure(_)
            | ExtractionError::SumOutOfRange { .. } => StatusCode::BAD_GATEWAY,
            ExtractionError::TemplateInvalid(_) | ExtractionError::Config(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        };
        Self::new(status, e.code(), e.to_string())
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::SessionNotFound => Self::new(StatusCode::NOT_FOUND, "session_not_found", message),
            SessionError::SessionExpired => Self::new(StatusCode::GONE, "session_expired", message),
            SessionError::ProfileMismatch => Self::bad_request("profile_mismatch", message),
            SessionError::InvalidProfile(_) => Self::bad_request("invalid_profile", message),
            SessionError::Token(_) => Self::new(StatusCode::SERVICE_UNAVAILABLE, "entropy_unavailable", message),
        }
    }
}

impl From<CatalogError> for ApiError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Duplicate(id) => Self::bad_request("duplicate_id", format!("item {id:?} already exists")),
            other => Self::internal(other.to_string()),
        }
    }
}
