//! HTTP API over a shared read-only [`Engine`].
//!
//! * `GET /v1/health` reports status and loaded indices.
//! * `GET /v1/models` lists the models that can answer requests.
//! * `POST /v1/suggest` answers one request; `?topk=N` adds the candidate list.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{Any, CorsLayer};

use crate::engine::{CandidateInfo, Engine, ModelKind, SuggestRequest};
use crate::error::Error;
use crate::ngram::search::{StopPolicy, DEFAULT_ENTROPY_THRESHOLDS};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const BIND_ENV: &str = "GHOST_BIND";
const MAX_TOPK: usize = 50;

/// Stop policy as it appears in request bodies.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StopSpec {
    #[default]
    None,
    MaxWords {
        t: u32,
    },
    Entropy {
        threshold: f64,
    },
}

impl From<StopSpec> for StopPolicy {
    fn from(s: StopSpec) -> Self {
        match s {
            StopSpec::None => StopPolicy::None,
            StopSpec::MaxWords { t } => StopPolicy::MaxWords(t),
            StopSpec::Entropy { threshold } => StopPolicy::Entropy(threshold),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuggestBody {
    pub prefix: String,
    #[serde(default)]
    pub context: Vec<String>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default)]
    pub rerank: bool,
    #[serde(default)]
    pub stop: StopSpec,
    #[serde(default)]
    pub min_confidence: Option<f64>,
}

fn default_model() -> String {
    "mpc".into()
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SuggestResponse {
    pub suggestion: String,
    /// Absent when the suggestion is empty.
    pub confidence: Option<f64>,
    pub source: String,
    pub latency_us: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub abstain_reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub candidates: Option<Vec<CandidateOut>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CandidateOut {
    pub text: String,
    pub score: Option<f64>,
    pub model_score: Option<f64>,
}

impl From<CandidateInfo> for CandidateOut {
    fn from(c: CandidateInfo) -> Self {
        CandidateOut {
            text: c.text,
            score: c.score.is_finite().then_some(c.score),
            model_score: c.model_score.is_finite().then_some(c.model_score),
        }
    }
}

#[derive(Debug, Deserialize)]
struct SuggestQuery {
    topk: Option<usize>,
}

struct AppState {
    engine: Arc<Engine>,
    errors: AtomicU64,
}

fn error(status: StatusCode, message: impl Into<String>) -> Response {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn internal(state: &AppState, detail: &str) -> Response {
    let n = state.errors.fetch_add(1, Ordering::Relaxed);
    let nanos = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.subsec_nanos());
    let id = format!("{:08x}-{n:04x}", nanos);
    log::error!("internal error {id}: {detail}");
    (
        StatusCode::INTERNAL_SERVER_ERROR,
        Json(json!({ "error": "internal error", "id": id })),
    )
        .into_response()
}

/// Parses and validates a request body. Errors are client errors.
pub fn parse_request(engine: &Engine, body: &[u8]) -> Result<SuggestRequest, String> {
    let b: SuggestBody = serde_json::from_slice(body).map_err(|e| format!("malformed request: {e}"))?;
    let model: ModelKind = b.model.parse().map_err(|e: Error| e.to_string())?;
    if !engine.has_model(model) {
        return Err(format!("model {model} is not loaded"));
    }
    if b.rerank && !engine.can_rerank() {
        return Err("rerank requested but no TF-IDF index is loaded".into());
    }
    let stop = StopPolicy::from(b.stop).validate().map_err(|e| e.to_string())?;
    if b.prefix.trim_end_matches(char::is_control).is_empty() {
        return Err("prefix is empty".into());
    }
    Ok(SuggestRequest {
        prefix: b.prefix,
        context: b.context,
        model,
        rerank: b.rerank,
        stop,
        min_confidence: b.min_confidence,
    })
}

async fn suggest(State(state): State<Arc<AppState>>, Query(q): Query<SuggestQuery>, body: Bytes) -> Response {
    let started = Instant::now();
    let req = match parse_request(&state.engine, &body) {
        Ok(r) => r,
        Err(m) => return error(StatusCode::BAD_REQUEST, m),
    };
    let topk = q.topk.unwrap_or(0).min(MAX_TOPK);
    let engine = Arc::clone(&state.engine);
    let result = tokio::task::spawn_blocking(move || engine.suggest_detailed(&req, topk)).await;
    let (s, cands) = match result {
        Ok(Ok(x)) => x,
        Ok(Err(e @ (Error::InvalidArgument(_) | Error::ModelNotLoaded(_)))) => {
            return error(StatusCode::BAD_REQUEST, e.to_string())
        }
        Ok(Err(e)) => return internal(&state, &e.to_string()),
        Err(e) => return internal(&state, &e.to_string()),
    };
    let shown = s.is_shown();
    let resp = SuggestResponse {
        confidence: (shown && s.score.is_finite()).then_some(s.score),
        source: s.source.to_string(),
        suggestion: s.text,
        latency_us: started.elapsed().as_micros() as u64,
        abstain_reason: s.abstain_reason,
        candidates: q.topk.map(|_| cands.into_iter().map(CandidateOut::from).collect()),
    };
    Json(resp).into_response()
}

async fn health(State(state): State<Arc<AppState>>) -> Response {
    let e = &state.engine;
    Json(json!({
        "status": "ok",
        "models": e.models(),
        "rerank": e.can_rerank(),
        "fingerprint": e.fingerprint(),
        "indices": e.indices(),
    }))
    .into_response()
}

async fn models(State(state): State<Arc<AppState>>) -> Response {
    let e = &state.engine;
    let list: Vec<_> = e
        .models()
        .into_iter()
        .map(|m| json!({ "name": m, "rerank": e.can_rerank() }))
        .collect();
    Json(json!({
        "models": list,
        "rerank_available": e.can_rerank(),
        "entropy_thresholds": DEFAULT_ENTROPY_THRESHOLDS,
        "rerank_weights": { "alpha": e.rerank.alpha, "beta": e.rerank.beta, "gamma": e.rerank.gamma, "k": e.rerank.k },
    }))
    .into_response()
}

pub fn router(engine: Arc<Engine>) -> Router {
    let state = Arc::new(AppState {
        engine,
        errors: AtomicU64::new(0),
    });
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST])
        .allow_headers(Any);
    Router::new()
        .route("/v1/health", get(health))
        .route("/v1/models", get(models))
        .route("/v1/suggest", post(suggest))
        .layer(cors)
        .with_state(state)
}

/// Bind address: explicit value, then `GHOST_BIND`, then the default.
pub fn resolve_bind(explicit: Option<&str>) -> String {
    explicit
        .map(str::to_string)
        .or_else(|| std::env::var(BIND_ENV).ok().filter(|s| !s.is_empty()))
        .unwrap_or_else(|| DEFAULT_BIND.to_string())
}

/// Serves until Ctrl-C.
pub async fn serve(engine: Arc<Engine>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    let addr: SocketAddr = listener.local_addr()?;
    log::info!("listening on http://{addr}");
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
