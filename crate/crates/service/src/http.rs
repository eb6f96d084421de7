//! HTTP API: `/convert`, `/verify`, `/health`, plus registry management
//! under `/registry`.

// Request helpers fail with a finished `Response` that handlers return as is.
#![allow(clippy::result_large_err)]

use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::rejection::BytesRejection;
use axum::extract::{DefaultBodyLimit, Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use elmo2eds_core::eds::{parse_eds, Did};
use elmo2eds_core::elmo::{DocumentType, ElmoError};
use elmo2eds_core::transform::{ConversionError, ConversionMode};
use elmo2eds_core::vdr::{verify_credential_full, DidDocument, LogEntry, Registry, RegistryError};
use serde::Deserialize;
use serde_json::json;

use crate::config::ServiceConfig;
use crate::engine::{ConvertRequest, Engine, ErrorBody, ServiceError};

pub const WARNINGS_HEADER: &str = "x-conversion-warnings-count";
pub const JSONLD: &str = "application/ld+json";

pub struct AppState {
    pub engine: Engine,
    pub registry: Mutex<Registry>,
}

impl AppState {
    pub fn new(engine: Engine, registry: Registry) -> Arc<Self> {
        Arc::new(Self {
            engine,
            registry: Mutex::new(registry),
        })
    }

    pub fn from_config(cfg: &ServiceConfig) -> Result<Arc<Self>, ServiceError> {
        let engine = Engine::from_config(cfg)?;
        let registry = Registry::open(&cfg.registry_path)?;
        Ok(Self::new(engine, registry))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let limit = state.engine.max_input_bytes;
    Router::new()
        .route("/health", get(health))
        .route("/convert", post(convert))
        .route("/verify", post(verify))
        .route("/registry/dids", post(register_did))
        .route("/registry/dids/{did}", get(resolve_did))
        .route("/registry/issuers", post(add_issuer))
        .route("/registry/issuers/{did}", delete(remove_issuer))
        .route("/registry/schemas", post(add_schema))
        .route("/registry/check", get(check_registry))
        .layer(DefaultBodyLimit::max(limit))
        .layer(middleware::from_fn(log_request))
        .with_state(state)
}

/// One line per request; bodies are never logged.
async fn log_request(req: Request, next: Next) -> Response {
    let method = req.method().clone();
    let path = req.uri().path().to_string();
    let started = Instant::now();
    let resp = next.run(req).await;
    tracing::info!(
        target: "elmo2eds::http",
        %method,
        path,
        status = resp.status().as_u16(),
        elapsed_ms = started.elapsed().as_millis() as u64,
        "request"
    );
    resp
}

fn status_for(e: &ServiceError) -> StatusCode {
    match e {
        ServiceError::Conversion(c) => match c {
            ConversionError::Elmo(
                ElmoError::MalformedXml(_) | ElmoError::SchemaViolation { .. },
            ) => StatusCode::BAD_REQUEST,
            ConversionError::Elmo(ElmoError::OversizeInput { .. }) => StatusCode::PAYLOAD_TOO_LARGE,
            ConversionError::Elmo(ElmoError::UnclassifiableDocument)
            | ConversionError::Validation(_)
            | ConversionError::UnmappableClaim { .. }
            | ConversionError::Eds(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ConversionError::MissingDid => StatusCode::CONFLICT,
            ConversionError::Template(_) => StatusCode::INTERNAL_SERVER_ERROR,
        },
        ServiceError::Credential(_) => StatusCode::BAD_REQUEST,
        ServiceError::SigningUnavailable(_) => StatusCode::CONFLICT,
        ServiceError::Usage(_) => StatusCode::BAD_REQUEST,
        ServiceError::Registry(r) => match r {
            RegistryError::DuplicateDid(_) => StatusCode::CONFLICT,
            RegistryError::InvalidDocument(_) => StatusCode::BAD_REQUEST,
            RegistryError::CorruptLog { .. } | RegistryError::Io(_) => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
        },
        ServiceError::Crypto(_) | ServiceError::Config(_) | ServiceError::Io(_) => {
            StatusCode::INTERNAL_SERVER_ERROR
        }
    }
}

fn error_response(status: StatusCode, body: ErrorBody) -> Response {
    (status, Json(body)).into_response()
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        error_response(status_for(&self), self.body())
    }
}

fn client_error(status: StatusCode, code: &str, message: String) -> Response {
    error_response(
        status,
        ErrorBody {
            code: code.to_string(),
            message,
            path: None,
            findings: Vec::new(),
        },
    )
}

fn body_error(r: BytesRejection) -> Response {
    let status = r.status();
    let code = if status == StatusCode::PAYLOAD_TOO_LARGE {
        "oversize-input"
    } else {
        "unreadable-body"
    };
    client_error(status, code, r.body_text())
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": env!("CARGO_PKG_VERSION") }))
}

fn parse_flag(v: &str) -> Option<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "" | "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

fn convert_request(q: &HashMap<String, String>) -> Result<ConvertRequest, Response> {
    let bad = |m: String| client_error(StatusCode::BAD_REQUEST, "invalid-query", m);
    let mut req = ConvertRequest::default();
    if let Some(m) = q.get("mode") {
        req.mode = Some(m.parse::<ConversionMode>().map_err(bad)?);
    }
    if let Some(t) = q.get("type") {
        req.document_type = Some(t.parse::<DocumentType>().map_err(bad)?);
    }
    if let Some(s) = q.get("sign") {
        req.sign = parse_flag(s).ok_or_else(|| bad(format!("sign=`{s}` is not a boolean")))?;
    }
    Ok(req)
}

fn content_type_is(headers: &HeaderMap, accept: impl Fn(&str) -> bool) -> bool {
    match headers.get(header::CONTENT_TYPE) {
        None => true,
        Some(v) => v
            .to_str()
            .map(|s| {
                let mime = s
                    .split(';')
                    .next()
                    .unwrap_or("")
                    .trim()
                    .to_ascii_lowercase();
                accept(&mime)
            })
            .unwrap_or(false),
    }
}

async fn convert(
    State(state): State<Arc<AppState>>,
    Query(q): Query<HashMap<String, String>>,
    headers: HeaderMap,
    body: Result<Bytes, BytesRejection>,
) -> Response {
    if !content_type_is(&headers, |m| {
        m == "application/xml" || m == "text/xml" || m.ends_with("+xml")
    }) {
        return client_error(
            StatusCode::UNSUPPORTED_MEDIA_TYPE,
            "unsupported-media-type",
            "send ELMO as application/xml".into(),
        );
    }
    let req = match convert_request(&q) {
        Ok(r) => r,
        Err(resp) => return resp,
    };
    let body = match body {
        Ok(b) => b,
        Err(r) => return body_error(r),
    };
    let work = tokio::task::spawn_blocking(move || state.engine.convert(&body, req)).await;
    match work {
        Ok(Ok(out)) => {
            let mut resp = (StatusCode::OK, out.body).into_response();
            let h = resp.headers_mut();
            h.insert(header::CONTENT_TYPE, HeaderValue::from_static(JSONLD));
            h.insert(
                WARNINGS_HEADER,
                HeaderValue::from(out.report.warnings.len()),
            );
            resp
        }
        Ok(Err(e)) => e.into_response(),
        Err(_) => client_error(
            StatusCode::INTERNAL_SERVER_ERROR,
            "internal",
            "conversion task failed".into(),
        ),
    }
}

/// Runs `f` on the registry off the async workers, after catching up with
/// other writers of the log file.
async fn with_registry<T: Send + 'static>(
    state: Arc<AppState>,
    f: impl FnOnce(&mut Registry) -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(move || {
        let mut reg = state
            .registry
            .lock()
            .map_err(|_| ServiceError::Io("registry lock poisoned".into()))?;
        reg.refresh()?;
        f(&mut reg)
    })
    .await
    .map_err(|_| ServiceError::Io("registry task failed".into()))?
}

async fn verify(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Response {
    let body = match body {
        Ok(b) => b,
        Err(r) => return body_error(r),
    };
    let cred = match parse_eds(&body) {
        Ok(c) => c,
        Err(e) => return ServiceError::from(e).into_response(),
    };
    match with_registry(state, move |reg| {
        Ok(verify_credential_full(reg.state(), &cred))
    })
    .await
    {
        Ok(report) => Json(report).into_response(),
        Err(e) => e.into_response(),
    }
}

fn entry_response(entry: LogEntry) -> Response {
    (
        StatusCode::CREATED,
        Json(json!({ "seq": entry.seq, "hash": entry.hash })),
    )
        .into_response()
}

fn json_body<T: for<'de> Deserialize<'de>>(
    body: &Result<Bytes, BytesRejection>,
) -> Result<T, Response> {
    match body {
        Ok(b) => serde_json::from_slice(b)
            .map_err(|e| client_error(StatusCode::BAD_REQUEST, "malformed-json", e.to_string())),
        Err(_) => Err(client_error(
            StatusCode::BAD_REQUEST,
            "unreadable-body",
            "cannot read body".into(),
        )),
    }
}

fn parse_did(text: &str) -> Result<Did, Response> {
    text.parse::<Did>()
        .map_err(|e| ServiceError::from(e).into_response())
}

async fn register_did(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Response {
    let doc: DidDocument = match json_body(&body) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match with_registry(state, move |reg| Ok(reg.register_did(doc)?)).await {
        Ok(entry) => entry_response(entry),
        Err(e) => e.into_response(),
    }
}

async fn resolve_did(State(state): State<Arc<AppState>>, Path(did): Path<String>) -> Response {
    let did = match parse_did(&did) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match with_registry(state, move |reg| Ok(reg.resolve_did(&did).cloned())).await {
        Ok(Some(doc)) => Json(doc).into_response(),
        Ok(None) => client_error(
            StatusCode::NOT_FOUND,
            "unknown-did",
            "DID is not registered".into(),
        ),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct IssuerBody {
    did: String,
}

async fn add_issuer(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Response {
    let b: IssuerBody = match json_body(&body) {
        Ok(b) => b,
        Err(r) => return r,
    };
    let did = match parse_did(&b.did) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match with_registry(state, move |reg| Ok(reg.add_trusted_issuer(did)?)).await {
        Ok(entry) => entry_response(entry),
        Err(e) => e.into_response(),
    }
}

async fn remove_issuer(State(state): State<Arc<AppState>>, Path(did): Path<String>) -> Response {
    let did = match parse_did(&did) {
        Ok(d) => d,
        Err(r) => return r,
    };
    match with_registry(state, move |reg| Ok(reg.remove_trusted_issuer(did)?)).await {
        Ok(entry) => entry_response(entry),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct SchemaBody {
    id: String,
    #[serde(default)]
    descriptor: String,
}

async fn add_schema(
    State(state): State<Arc<AppState>>,
    body: Result<Bytes, BytesRejection>,
) -> Response {
    let b: SchemaBody = match json_body(&body) {
        Ok(b) => b,
        Err(r) => return r,
    };
    match with_registry(state, move |reg| {
        Ok(reg.add_trusted_schema(&b.id, &b.descriptor)?)
    })
    .await
    {
        Ok(entry) => entry_response(entry),
        Err(e) => e.into_response(),
    }
}

async fn check_registry(State(state): State<Arc<AppState>>) -> Response {
    match with_registry(state, |reg| {
        Ok((reg.verify_log_integrity(), reg.state().log().len()))
    })
    .await
    {
        Ok((valid, entries)) => Json(json!({ "valid": valid, "entries": entries })).into_response(),
        Err(e) => e.into_response(),
    }
}

/// Binds `cfg.listen_address` and serves until Ctrl-C.
pub async fn serve(cfg: &ServiceConfig) -> Result<(), ServiceError> {
    let state = AppState::from_config(cfg)?;
    let listener = tokio::net::TcpListener::bind(&cfg.listen_address)
        .await
        .map_err(|e| ServiceError::Io(format!("bind {}: {e}", cfg.listen_address)))?;
    let addr = listener
        .local_addr()
        .map_err(|e| ServiceError::Io(e.to_string()))?;
    tracing::info!(target: "elmo2eds::http", %addr, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Io(e.to_string()))
}
