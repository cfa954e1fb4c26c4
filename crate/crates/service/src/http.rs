//! HTTP/JSON routes and the server-sent event stream.

use std::convert::Infallible;
use std::str::FromStr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::header::{AUTHORIZATION, CONTENT_TYPE};
use axum::http::request::Parts;
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::Engine;
use futures::{Stream, StreamExt};
use illocute_core::act::{ClarificationKind, ContentKind, ForceKind, Polarity, Sphere, Status};
use illocute_core::geometry::{load_mesh, MeshFormat, Vec3};
use illocute_core::ids::{AnnotationId, DocumentId, ParticipantId, SessionId};
use illocute_core::minute::{render_minute, MinuteFormat};
use illocute_core::store::{Query, Region};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::auth::Caller;
use crate::error::ServiceError;
use crate::service::{NewAnnotation, OpenSession, ReviewService, SessionAction};

type Svc = State<Arc<ReviewService>>;

pub fn router(service: Arc<ReviewService>) -> Router {
    Router::new()
        .route("/documents", post(create_document).get(list_documents))
        .route("/documents/{id}", get(get_document))
        .route("/documents/{id}/revisions", post(add_revision))
        .route("/documents/{id}/mesh", get(get_mesh))
        .route("/annotations", post(create_annotation).get(query_annotations))
        .route("/annotations/{id}", get(get_annotation))
        .route("/annotations/{id}/replies", post(reply))
        .route("/annotations/{id}/status", post(transition))
        .route("/annotations/{id}/publish", post(publish))
        .route("/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/join", post(join))
        .route("/sessions/{id}/leave", post(leave))
        .route("/sessions/{id}/events", post(session_event))
        .route("/sessions/{id}/close", post(close))
        .route("/sessions/{id}/stream", get(stream))
        .route("/sessions/{id}/minute", get(minute))
        .with_state(service)
}

impl FromRequestParts<Arc<ReviewService>> for Caller {
    type Rejection = ServiceError;

    async fn from_request_parts(parts: &mut Parts, state: &Arc<ReviewService>) -> Result<Self, Self::Rejection> {
        let token = parts
            .headers
            .get(AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "))
            .ok_or(ServiceError::Unauthorized)?;
        state.authenticate(token.trim())
    }
}

/// JSON body whose rejections use the service error format.
struct Body<T>(T);

impl<S, T> FromRequest<S> for Body<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ServiceError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(Body(v)),
            Err(e) => Err(ServiceError::BadRequest(json_rejection(e))),
        }
    }
}

fn json_rejection(e: JsonRejection) -> String {
    e.body_text()
}

/// Query string whose rejections use the service error format.
struct Params<T>(T);

impl<S, T> FromRequestParts<S> for Params<T>
where
    T: DeserializeOwned,
    S: Send + Sync,
{
    type Rejection = ServiceError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        match axum::extract::Query::<T>::from_request_parts(parts, state).await {
            Ok(axum::extract::Query(v)) => Ok(Params(v)),
            Err(e) => Err(ServiceError::BadRequest(QueryRejection::body_text(&e))),
        }
    }
}

// ----------------------------------------------------------------- documents

#[derive(Deserialize)]
struct MeshUpload {
    #[serde(default)]
    name: Option<String>,
    format: MeshFormat,
    /// Base64 of the file contents.
    data: String,
}

impl MeshUpload {
    fn mesh(&self) -> Result<illocute_core::Mesh, ServiceError> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(self.data.trim())
            .map_err(|e| ServiceError::BadRequest(format!("mesh data is not base64: {e}")))?;
        Ok(load_mesh(&bytes, self.format)?)
    }
}

async fn create_document(
    State(svc): Svc,
    caller: Caller,
    Body(up): Body<MeshUpload>,
) -> Result<Response, ServiceError> {
    let name = up
        .name
        .clone()
        .filter(|n| !n.trim().is_empty())
        .ok_or_else(|| ServiceError::BadRequest("document name is required".into()))?;
    let doc = svc.put_document(&caller, &name, up.mesh()?)?;
    Ok((StatusCode::CREATED, Json(doc)).into_response())
}

async fn list_documents(State(svc): Svc, _caller: Caller) -> Response {
    Json(svc.documents()).into_response()
}

async fn get_document(State(svc): Svc, _caller: Caller, Path(id): Path<DocumentId>) -> Result<Response, ServiceError> {
    Ok(Json(svc.document(id)?).into_response())
}

async fn add_revision(
    State(svc): Svc,
    caller: Caller,
    Path(id): Path<DocumentId>,
    Body(up): Body<MeshUpload>,
) -> Result<Response, ServiceError> {
    let report = svc.add_revision(&caller, id, up.mesh()?)?;
    Ok((StatusCode::CREATED, Json(report)).into_response())
}

#[derive(Deserialize)]
struct MeshParams {
    revision: Option<u32>,
}

#[derive(Serialize)]
struct MeshPayload<'a> {
    document: DocumentId,
    revision: u32,
    content_hash: String,
    vertices: &'a [Vec3],
    faces: &'a [[u32; 3]],
}

async fn get_mesh(
    State(svc): Svc,
    _caller: Caller,
    Path(id): Path<DocumentId>,
    Params(p): Params<MeshParams>,
) -> Result<Response, ServiceError> {
    let (revision, mesh) = svc.mesh(id, p.revision)?;
    Ok(Json(MeshPayload {
        document: id,
        revision,
        content_hash: mesh.content_hash().to_hex(),
        vertices: mesh.vertices(),
        faces: mesh.faces(),
    })
    .into_response())
}

// --------------------------------------------------------------- annotations

async fn create_annotation(
    State(svc): Svc,
    caller: Caller,
    Body(new): Body<NewAnnotation>,
) -> Result<Response, ServiceError> {
    let a = svc.create_annotation(&caller, new)?;
    Ok((StatusCode::CREATED, Json(a)).into_response())
}

/// Query-string form of [`Query`]; a region is `region_center=x,y,z` plus
/// `region_radius=r`.
#[derive(Debug, Default, Deserialize)]
struct AnnotationParams {
    force_kind: Option<ForceKind>,
    clarification_kind: Option<ClarificationKind>,
    polarity: Option<Polarity>,
    content_kind: Option<ContentKind>,
    author: Option<ParticipantId>,
    status: Option<Status>,
    sphere: Option<Sphere>,
    document: Option<DocumentId>,
    revision: Option<u32>,
    text_substring: Option<String>,
    region_center: Option<String>,
    region_radius: Option<f64>,
}

impl AnnotationParams {
    fn into_query(self) -> Result<Query, ServiceError> {
        let region = match (self.region_center, self.region_radius) {
            (None, None) => None,
            (Some(c), Some(radius)) => {
                let parts: Vec<f64> = c
                    .split(',')
                    .map(|p| p.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| ServiceError::BadRequest("region_center must be x,y,z".into()))?;
                let [x, y, z] = parts[..] else {
                    return Err(ServiceError::BadRequest("region_center must be x,y,z".into()));
                };
                Some(Region {
                    center: Vec3::new(x, y, z),
                    radius,
                })
            }
            _ => {
                return Err(ServiceError::BadRequest(
                    "region_center and region_radius go together".into(),
                ))
            }
        };
        Ok(Query {
            force_kind: self.force_kind,
            clarification_kind: self.clarification_kind,
            polarity: self.polarity,
            content_kind: self.content_kind,
            author: self.author,
            status: self.status,
            sphere: self.sphere,
            document: self.document,
            revision: self.revision,
            text_substring: self.text_substring,
            region,
        })
    }
}

async fn query_annotations(
    State(svc): Svc,
    caller: Caller,
    Params(p): Params<AnnotationParams>,
) -> Result<Response, ServiceError> {
    let q = p.into_query()?;
    Ok(Json(svc.query(&caller, &q)?).into_response())
}

async fn get_annotation(
    State(svc): Svc,
    caller: Caller,
    Path(id): Path<AnnotationId>,
) -> Result<Response, ServiceError> {
    Ok(Json(svc.annotation(&caller, id)?).into_response())
}

#[derive(Deserialize)]
struct ReplyBody {
    text: String,
}

async fn reply(
    State(svc): Svc,
    caller: Caller,
    Path(id): Path<AnnotationId>,
    Body(b): Body<ReplyBody>,
) -> Result<Response, ServiceError> {
    let a = svc.reply(&caller, id, &b.text)?;
    Ok((StatusCode::CREATED, Json(a)).into_response())
}

#[derive(Deserialize)]
struct StatusBody {
    to: Status,
}

async fn transition(
    State(svc): Svc,
    caller: Caller,
    Path(id): Path<AnnotationId>,
    Body(b): Body<StatusBody>,
) -> Result<Response, ServiceError> {
    let (_, a) = svc.transition(&caller, id, b.to)?;
    Ok(Json(a).into_response())
}

async fn publish(State(svc): Svc, caller: Caller, Path(id): Path<AnnotationId>) -> Result<Response, ServiceError> {
    Ok(Json(svc.publish(&caller, id)?).into_response())
}

// ------------------------------------------------------------------ sessions

async fn open_session(State(svc): Svc, caller: Caller, Body(req): Body<OpenSession>) -> Result<Response, ServiceError> {
    let s = svc.open_session(&caller, req)?;
    Ok((StatusCode::CREATED, Json(s)).into_response())
}

async fn get_session(State(svc): Svc, _caller: Caller, Path(id): Path<SessionId>) -> Result<Response, ServiceError> {
    Ok(Json(svc.session(id)?).into_response())
}

async fn join(State(svc): Svc, caller: Caller, Path(id): Path<SessionId>) -> Result<Response, ServiceError> {
    Ok(Json(svc.join(&caller, id)?).into_response())
}

async fn leave(State(svc): Svc, caller: Caller, Path(id): Path<SessionId>) -> Result<Response, ServiceError> {
    Ok(Json(svc.leave(&caller, id)?).into_response())
}

async fn session_event(
    State(svc): Svc,
    caller: Caller,
    Path(id): Path<SessionId>,
    Body(action): Body<SessionAction>,
) -> Result<Response, ServiceError> {
    let event = svc.session_act(&caller, id, action)?;
    Ok((StatusCode::CREATED, Json(event)).into_response())
}

async fn close(State(svc): Svc, caller: Caller, Path(id): Path<SessionId>) -> Result<Response, ServiceError> {
    let minute = svc.close_session(&caller, id)?;
    Ok(Json(json!({ "minute": minute })).into_response())
}

#[derive(Deserialize)]
struct StreamParams {
    last_seen: Option<u64>,
}

/// Each SSE message carries one event as JSON, with the seq as its id so
/// a reconnecting client can resume through `Last-Event-ID`.
async fn stream(
    State(svc): Svc,
    caller: Caller,
    Path(id): Path<SessionId>,
    Params(p): Params<StreamParams>,
    headers: HeaderMap,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ServiceError> {
    let last_seen = match p.last_seen {
        Some(n) => n,
        None => headers
            .get("last-event-id")
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(0),
    };
    let events = svc.subscribe(&caller, id, last_seen)?;
    let sse = events.map(|e| {
        let data = serde_json::to_string(&e).expect("events serialize");
        Ok(Event::default().id(e.seq.to_string()).data(data))
    });
    Ok(Sse::new(sse).keep_alive(KeepAlive::default()))
}

#[derive(Deserialize)]
struct MinuteParams {
    format: Option<String>,
}

async fn minute(
    State(svc): Svc,
    _caller: Caller,
    Path(id): Path<SessionId>,
    Params(p): Params<MinuteParams>,
) -> Result<Response, ServiceError> {
    let format = match p.format.as_deref() {
        None => MinuteFormat::Json,
        Some(f) => {
            MinuteFormat::from_str(f).map_err(|_| ServiceError::BadRequest(format!("unknown minute format {f:?}")))?
        }
    };
    let minute = svc.minute(id)?;
    let content_type = match format {
        MinuteFormat::Json => "application/json",
        MinuteFormat::Html => "text/html; charset=utf-8",
    };
    Ok(([(CONTENT_TYPE, content_type)], render_minute(&minute, format)).into_response())
}
