use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Request};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gtruth_core::export::ExportError;
use gtruth_core::morphology::MorphError;
use gtruth_core::raster::RasterError;
use gtruth_core::SessionError;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};

/// Body of every error response.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEnvelope {
    pub code: String,
    pub message: String,
    pub details: Value,
}

#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub envelope: ErrorEnvelope,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            envelope: ErrorEnvelope {
                code: code.into(),
                message: message.into(),
                details: Value::Null,
            },
        }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.envelope.details = details;
        self
    }

    pub fn session_not_found(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "SessionNotFound",
            format!("no session {id:?}"),
        )
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.envelope)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError::*;
        let status = match &e {
            WrongPhase { .. }
            | ConfirmationRequired
            | LabelInUse { .. }
            | SessionFinalized
            | UnlabeledUnitsRemain(_)
            | DuplicateName(_)
            | DuplicateColor(_)
            | LabelCapacityExceeded
            | NoGroupedMask => StatusCode::CONFLICT,
            UnknownLabel(_) | UnknownUnit(_) => StatusCode::NOT_FOUND,
            SnapshotMismatch(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        let details = match &e {
            UnlabeledUnitsRemain(ids) | LabelInUse { units: ids, .. } => json!(ids),
            UnknownLabel(i) => json!(i),
            UnknownUnit(i) => json!(i),
            _ => Value::Null,
        };
        Self::new(status, e.code(), e.to_string()).with_details(details)
    }
}

impl From<MorphError> for ApiError {
    fn from(e: MorphError) -> Self {
        SessionError::Morph(e).into()
    }
}

impl From<RasterError> for ApiError {
    fn from(e: RasterError) -> Self {
        let (status, code) = match &e {
            RasterError::UnsupportedFormat(_) => {
                (StatusCode::UNSUPPORTED_MEDIA_TYPE, "UnsupportedFormat")
            }
            RasterError::CorruptImage(_) => (StatusCode::UNPROCESSABLE_ENTITY, "CorruptImage"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "RasterError"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl From<ExportError> for ApiError {
    fn from(e: ExportError) -> Self {
        match e {
            ExportError::NotFinalized => {
                Self::new(StatusCode::CONFLICT, "NotFinalized", e.to_string())
            }
            ExportError::Raster(r) => r.into(),
            other => Self::internal(other.to_string()),
        }
    }
}

/// `Json` extractor whose rejections use the error envelope.
pub struct JsonBody<T>(pub T);

impl<S, T> FromRequest<S> for JsonBody<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(JsonBody(v)),
            Err(rejection) => {
                let code = match rejection {
                    JsonRejection::JsonDataError(_) => "InvalidBody",
                    JsonRejection::MissingJsonContentType(_) => "UnsupportedMediaType",
                    _ => "BadRequest",
                };
                Err(ApiError::new(
                    rejection.status(),
                    code,
                    rejection.body_text(),
                ))
            }
        }
    }
}
