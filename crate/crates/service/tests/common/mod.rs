//! In-process HTTP harness: requests go straight into the router.
#![allow(dead_code)]

use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{HeaderMap, Method, Request, StatusCode};
use axum::Router;
use base64::Engine;
use http_body_util::BodyExt;
use illocute_core::act::Role;
use illocute_core::clock::ManualClock;
use illocute_core::fixtures;
use illocute_core::ids::SequentialIds;
use illocute_core::store::{AnnotationStore, StoreOptions};
use illocute_service::{router, ReviewService, TokenRegistry};
use serde_json::{json, Value};
use tower::ServiceExt;

/// (token, participant, role). One participant per role plus a spare
/// architect.
pub const USERS: &[(&str, &str, Role)] = &[
    ("t-archi", "archi", Role::Architect),
    ("t-pms", "pms", Role::Pms),
    ("t-des", "des", Role::Designer),
    ("t-script", "script", Role::ScriptWriter),
    ("t-ind", "ind", Role::Industrial),
    ("t-archi2", "archi2", Role::Architect),
];

pub fn token_of(role: Role) -> &'static str {
    USERS.iter().find(|u| u.2 == role).unwrap().0
}

pub fn name_of(role: Role) -> &'static str {
    USERS.iter().find(|u| u.2 == role).unwrap().1
}

pub fn registry(extra: &[(String, String, Role)]) -> TokenRegistry {
    let mut reg = TokenRegistry::new();
    for (t, p, r) in USERS {
        reg.insert(*t, (*p).into(), *r).unwrap();
    }
    for (t, p, r) in extra {
        reg.insert(t.clone(), p.as_str().into(), *r).unwrap();
    }
    reg
}

pub struct TestApp {
    pub service: Arc<ReviewService>,
    pub router: Router,
}

impl TestApp {
    pub fn new() -> Self {
        Self::with_tokens(registry(&[]))
    }

    pub fn with_tokens(tokens: TokenRegistry) -> Self {
        let store = AnnotationStore::in_memory(StoreOptions {
            clock: Arc::new(ManualClock::fixed()),
            ids: Arc::new(SequentialIds::new(7)),
            ..StoreOptions::default()
        });
        let service = Arc::new(ReviewService::new(store, tokens));
        TestApp {
            router: router(Arc::clone(&service)),
            service,
        }
    }

    pub async fn raw(
        &self,
        method: Method,
        uri: &str,
        token: Option<&str>,
        body: Option<Value>,
    ) -> (StatusCode, HeaderMap, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let req = match body {
            Some(v) => req
                .header("content-type", "application/json")
                .body(Body::from(serde_json::to_vec(&v).unwrap())),
            None => req.body(Body::empty()),
        }
        .unwrap();
        let resp = self.router.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let headers = resp.headers().clone();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
        (status, headers, bytes)
    }

    pub async fn call(&self, method: Method, uri: &str, token: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, _, bytes) = self.raw(method, uri, Some(token), body).await;
        let value = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
        };
        (status, value)
    }

    pub async fn get(&self, uri: &str, token: &str) -> (StatusCode, Value) {
        self.call(Method::GET, uri, token, None).await
    }

    pub async fn post(&self, uri: &str, token: &str, body: Value) -> (StatusCode, Value) {
        self.call(Method::POST, uri, token, Some(body)).await
    }

    /// Uploads the unit cube; returns the document id.
    pub async fn cube_document(&self, name: &str) -> String {
        let (status, doc) = self
            .post(
                "/documents",
                "t-pms",
                upload(Some(name), fixtures::CUBE_OBJ.as_bytes(), "obj"),
            )
            .await;
        assert_eq!(status, StatusCode::CREATED, "{doc}");
        doc["id"].as_str().unwrap().to_string()
    }

    pub async fn open_stream(
        &self,
        uri: &str,
        token: &str,
        last_event_id: Option<u64>,
    ) -> Result<SseClient, (StatusCode, Value)> {
        let mut req = Request::builder()
            .method(Method::GET)
            .uri(uri)
            .header("authorization", format!("Bearer {token}"));
        if let Some(id) = last_event_id {
            req = req.header("last-event-id", id.to_string());
        }
        let resp = self
            .router
            .clone()
            .oneshot(req.body(Body::empty()).unwrap())
            .await
            .unwrap();
        if resp.status() != StatusCode::OK {
            let status = resp.status();
            let bytes = resp.into_body().collect().await.unwrap().to_bytes();
            return Err((status, serde_json::from_slice(&bytes).unwrap_or(Value::Null)));
        }
        Ok(SseClient {
            body: resp.into_body(),
            buf: String::new(),
            ended: false,
        })
    }
}

pub fn upload(name: Option<&str>, bytes: &[u8], format: &str) -> Value {
    let mut v = json!({
        "format": format,
        "data": base64::engine::general_purpose::STANDARD.encode(bytes),
    });
    if let Some(n) = name {
        v["name"] = json!(n);
    }
    v
}

pub fn exhaust_body(document: &str, sphere: &str) -> Value {
    json!({
        "document": document,
        "force": {"kind": "Evaluation", "polarity": "Negative"},
        "utterance": {"text": fixtures::EXHAUST_TEXT, "content_kind": "Constraint"},
        "anchor": {"face": 2, "bary": [0.2, 0.3, 0.5], "normal_offset": 0.0},
        "sphere": sphere,
    })
}

pub fn suspension_body(document: &str, answers: &str) -> Value {
    json!({
        "document": document,
        "force": {"kind": "Proposition"},
        "utterance": {"text": fixtures::SUSPENSION_TEXT, "content_kind": "Action"},
        "anchor": {"face": 10, "bary": [0.25, 0.25, 0.5], "normal_offset": 0.0},
        "sphere": "Public",
        "references": [{"target": answers, "kind": "Answers"}],
    })
}

/// Reads server-sent events from a response body.
pub struct SseClient {
    body: Body,
    buf: String,
    ended: bool,
}

impl SseClient {
    /// Next event's JSON payload; `None` when the stream ends or nothing
    /// arrives within `wait`.
    pub async fn next(&mut self, wait: Duration) -> Option<Value> {
        loop {
            if let Some(end) = self.buf.find("\n\n") {
                let block: String = self.buf.drain(..end + 2).collect();
                let data: Vec<&str> = block
                    .lines()
                    .filter_map(|l| l.strip_prefix("data:"))
                    .map(|d| d.strip_prefix(' ').unwrap_or(d))
                    .collect();
                if data.is_empty() {
                    continue;
                }
                return Some(serde_json::from_str(&data.join("\n")).unwrap());
            }
            if self.ended {
                return None;
            }
            match tokio::time::timeout(wait, self.body.frame()).await {
                Err(_) => return None,
                Ok(None) => self.ended = true,
                Ok(Some(frame)) => {
                    if let Ok(data) = frame.unwrap().into_data() {
                        self.buf.push_str(std::str::from_utf8(&data).unwrap());
                    }
                }
            }
        }
    }

    pub async fn take(&mut self, n: usize, wait: Duration) -> Vec<Value> {
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            match self.next(wait).await {
                Some(v) => out.push(v),
                None => break,
            }
        }
        out
    }

    pub fn ended(&self) -> bool {
        self.ended && self.buf.trim().is_empty()
    }
}
