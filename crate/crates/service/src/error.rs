use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

/// JSON error body: `{"error": code, "message": ..., "line": ...}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub line: Option<u64>,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    message: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    line: Option<u64>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            line: None,
        }
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_portfolio",
            format!("no portfolio `{id}`"),
        )
    }

    pub fn unprocessable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_request", message)
    }

    /// Errors while reading an uploaded portfolio.
    pub fn upload(e: stratos_core::Error) -> Self {
        Self::from_core(StatusCode::BAD_REQUEST, e)
    }

    /// Errors while computing over a registered portfolio.
    pub fn compute(e: stratos_core::Error) -> Self {
        let status = match e {
            stratos_core::Error::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::from_core(status, e)
    }

    fn from_core(status: StatusCode, e: stratos_core::Error) -> Self {
        ApiError {
            status,
            code: e.code(),
            line: e.line(),
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: self.code,
            message: &self.message,
            line: self.line,
        };
        (self.status, Json(body)).into_response()
    }
}
