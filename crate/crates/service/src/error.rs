use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use worldgraph_core::engine::EngineError;

use crate::api::ErrorBody;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session `{session}` has no turn {turn}")]
    UnknownTurn { session: String, turn: u32 },
    #[error("session `{0}` accepts no further actions")]
    SessionClosed(String),
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("store error: {0}")]
    Store(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl ServiceError {
    /// Stable machine-readable name, sent as `error` in response bodies.
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::UnknownScenario(_) => "UnknownScenario",
            ServiceError::UnknownSession(_) => "UnknownSession",
            ServiceError::UnknownTurn { .. } => "UnknownTurn",
            ServiceError::SessionClosed(_) => "SessionClosed",
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::Store(_) => "StoreError",
            ServiceError::Engine(_) => "EngineError",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::UnknownScenario(_) | ServiceError::UnknownSession(_) | ServiceError::UnknownTurn { .. } => {
                StatusCode::NOT_FOUND
            }
            ServiceError::SessionClosed(_) => StatusCode::CONFLICT,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::Engine(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Store(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Store(e.to_string())
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            log::error!("{self}");
        }
        let body = ErrorBody { error: self.code().to_string(), message: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}
