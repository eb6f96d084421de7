#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, Response};
use axum::Router;
use elmo2eds_core::crypto::KeyPair;
use elmo2eds_core::eds::Did;
use elmo2eds_core::vdr::Registry;
use elmo2eds_service::engine::{did_of, Engine};
use elmo2eds_service::http::{router, AppState};
use http_body_util::BodyExt;
use tower::ServiceExt;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn read(rel: &str) -> Vec<u8> {
    std::fs::read(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

pub fn key(name: &str) -> KeyPair {
    KeyPair::from_file(fixture(&format!("keys/{name}"))).unwrap()
}

pub fn did(name: &str) -> Did {
    did_of(&key(name)).unwrap()
}

/// Engine that can sign as k1 for holder k2.
pub fn signing_engine() -> Engine {
    Engine {
        issuer_key: Some(key("k1.jwk")),
        issuer_did: Some(did("k1.jwk")),
        holder_did: Some(did("k2.jwk")),
        ..Engine::default()
    }
}

pub fn app(engine: Engine) -> Router {
    router(AppState::new(engine, Registry::in_memory()))
}

pub fn app_with_state(engine: Engine) -> (Router, Arc<AppState>) {
    let state = AppState::new(engine, Registry::in_memory());
    (router(state.clone()), state)
}

pub fn xml_post(uri: &str, body: Vec<u8>) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/xml")
        .body(Body::from(body))
        .unwrap()
}

pub fn json_post(uri: &str, body: Vec<u8>) -> Request<Body> {
    Request::post(uri)
        .header("content-type", "application/json")
        .body(Body::from(body))
        .unwrap()
}

pub async fn send(app: &Router, req: Request<Body>) -> (u16, Response<()>, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let (parts, body) = resp.into_parts();
    let bytes = body.collect().await.unwrap().to_bytes().to_vec();
    (
        parts.status.as_u16(),
        Response::from_parts(parts, ()),
        bytes,
    )
}

pub fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(bytes)))
}
