//! Review service: annotation CRUD, review sessions with role enforcement,
//! sphere-based visibility, and live per-session event streams over HTTP.
//!
//! [`ReviewService`] holds the logic and can be driven directly;
//! [`router`] exposes it over HTTP/JSON with server-sent events for
//! session streams.

pub mod auth;
pub mod error;
pub mod http;
pub mod service;

use std::future::Future;
use std::sync::Arc;

pub use auth::{Caller, TokenFileError, TokenRegistry};
pub use error::ServiceError;
pub use http::router;
pub use service::{
    EventStream, NewAnnotation, OpenSession, RemapEntry, ReviewService, RevisionReport, SessionAction, SessionSummary,
};

/// Serves `service` on `listener` until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    service: Arc<ReviewService>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(service))
        .with_graceful_shutdown(shutdown)
        .await
}
