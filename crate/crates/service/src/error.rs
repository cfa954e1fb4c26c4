use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use illocute_core::act::ActError;
use illocute_core::geometry::MeshError;
use illocute_core::ids::SessionId;
use illocute_core::minute::MinuteError;
use illocute_core::session::SessionError;
use illocute_core::store::StoreError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("missing or unknown bearer token")]
    Unauthorized,
    #[error("unknown session {0}")]
    UnknownSession(SessionId),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Minute(#[from] MinuteError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

impl From<ActError> for ServiceError {
    fn from(e: ActError) -> Self {
        ServiceError::Store(StoreError::Act(e))
    }
}

fn act_class(e: &ActError) -> (StatusCode, &'static str) {
    match e {
        ActError::InvalidAct(_) => (StatusCode::BAD_REQUEST, "InvalidAct"),
        ActError::InvalidAnchor(_) => (StatusCode::BAD_REQUEST, "InvalidAnchor"),
        ActError::UnknownReference(_) => (StatusCode::BAD_REQUEST, "UnknownReference"),
        ActError::EmptyReply => (StatusCode::BAD_REQUEST, "EmptyReply"),
        ActError::AnnotationArchived => (StatusCode::CONFLICT, "AnnotationArchived"),
        ActError::ReplyOutOfOrder { .. } => (StatusCode::CONFLICT, "ReplyOutOfOrder"),
        ActError::ForbiddenTransition { .. } => (StatusCode::CONFLICT, "ForbiddenTransition"),
        ActError::ForbiddenRole { .. } => (StatusCode::FORBIDDEN, "ForbiddenRole"),
        ActError::Unanswered => (StatusCode::CONFLICT, "Unanswered"),
        ActError::AlreadyPublic => (StatusCode::CONFLICT, "AlreadyPublic"),
    }
}

fn store_class(e: &StoreError) -> (StatusCode, &'static str) {
    match e {
        StoreError::UnknownDocument(_) => (StatusCode::NOT_FOUND, "UnknownDocument"),
        StoreError::UnknownRevision { .. } => (StatusCode::NOT_FOUND, "UnknownRevision"),
        StoreError::NotFound(_) => (StatusCode::NOT_FOUND, "NotFound"),
        StoreError::UnknownMinute => (StatusCode::NOT_FOUND, "UnknownMinute"),
        StoreError::VersionConflict { .. } => (StatusCode::CONFLICT, "VersionConflict"),
        StoreError::Act(a) => act_class(a),
        StoreError::SphereRegression(_) => (StatusCode::CONFLICT, "SphereRegression"),
        StoreError::ThreadRewritten(_) => (StatusCode::CONFLICT, "ThreadRewritten"),
        StoreError::DocumentMismatch(_) => (StatusCode::BAD_REQUEST, "DocumentMismatch"),
        StoreError::InvalidQuery(_) => (StatusCode::BAD_REQUEST, "InvalidQuery"),
        StoreError::SchemaUnsupported(_) => (StatusCode::BAD_REQUEST, "SchemaUnsupported"),
        StoreError::HashMismatch { .. } => (StatusCode::BAD_REQUEST, "HashMismatch"),
        StoreError::Malformed(_) => (StatusCode::BAD_REQUEST, "Malformed"),
        StoreError::Mesh(_) => (StatusCode::BAD_REQUEST, "InvalidMesh"),
        StoreError::Io(_) | StoreError::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "Internal"),
    }
}

impl ServiceError {
    /// HTTP status and stable error code.
    pub fn classify(&self) -> (StatusCode, &'static str) {
        match self {
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "Unauthorized"),
            ServiceError::UnknownSession(_) => (StatusCode::NOT_FOUND, "UnknownSession"),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "BadRequest"),
            ServiceError::Store(e) => store_class(e),
            ServiceError::Session(e) => match e {
                SessionError::SessionClosed => (StatusCode::CONFLICT, "SessionClosed"),
                SessionError::NotJoined(_) => (StatusCode::FORBIDDEN, "NotJoined"),
                SessionError::RoleRequired { .. } => (StatusCode::FORBIDDEN, "RoleRequired"),
                SessionError::SecondArchitect => (StatusCode::CONFLICT, "SecondArchitect"),
            },
            ServiceError::Minute(e) => match e {
                MinuteError::SessionStillOpen => (StatusCode::CONFLICT, "SessionStillOpen"),
                MinuteError::UnknownDocument(_) => (StatusCode::NOT_FOUND, "UnknownDocument"),
                MinuteError::Store(s) => store_class(s),
            },
            ServiceError::Mesh(_) => (StatusCode::BAD_REQUEST, "InvalidMesh"),
        }
    }

    pub fn code(&self) -> &'static str {
        self.classify().1
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = self.classify();
        let mut body = json!({ "error": code, "message": self.to_string() });
        match &self {
            ServiceError::Store(StoreError::VersionConflict { current }) => body["current"] = json!(current),
            ServiceError::Store(StoreError::Act(ActError::InvalidAct(report))) => {
                body["violations"] = json!(report.codes())
            }
            _ => {}
        }
        (status, Json(body)).into_response()
    }
}
