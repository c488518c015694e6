use std::fs::{File, OpenOptions};
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response as HttpResponse};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;
use tower_http::services::ServeDir;

use super::{io_err, load_responses, media_type, EvalError, PairManifest, Response};
use crate::env::Hash64;

/// Append-only JSONL response log. Appends go through a single writer;
/// readers take a cheap snapshot of the responses seen so far.
pub struct ResponseStore {
    path: PathBuf,
    writer: Mutex<File>,
    snapshot: RwLock<Arc<Vec<Response>>>,
}

#[derive(Debug)]
enum InsertError {
    UnknownPair,
    Duplicate,
    Io(String),
}

impl ResponseStore {
    /// Opens the log, reloading any responses already in it.
    pub fn open(path: &Path) -> Result<Self, EvalError> {
        let existing = if path.exists() { load_responses(path)? } else { Vec::new() };
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
        Ok(Self { path: path.to_path_buf(), writer: Mutex::new(file), snapshot: RwLock::new(Arc::new(existing)) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn snapshot(&self) -> Arc<Vec<Response>> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub fn responses(&self) -> Vec<Response> {
        self.snapshot().as_ref().clone()
    }

    fn answered(&self, annotator: &str) -> Vec<String> {
        self.snapshot().iter().filter(|r| r.annotator_id == annotator).map(|r| r.pair_id.clone()).collect()
    }

    fn insert(&self, r: Response, manifest: &PairManifest) -> Result<(), InsertError> {
        if manifest.get(&r.pair_id).is_none() {
            return Err(InsertError::UnknownPair);
        }
        let mut file = self.writer.lock().expect("writer lock");
        let current = self.snapshot();
        if current.iter().any(|x| x.pair_id == r.pair_id && x.annotator_id == r.annotator_id) {
            return Err(InsertError::Duplicate);
        }
        let line = serde_json::to_string(&r).expect("response serializes");
        writeln!(file, "{line}").and_then(|_| file.flush()).map_err(|e| InsertError::Io(e.to_string()))?;
        let mut next = current.as_ref().clone();
        next.push(r);
        *self.snapshot.write().expect("snapshot lock") = Arc::new(next);
        Ok(())
    }
}

pub struct ServerConfig {
    pub manifest: PairManifest,
    pub store_path: PathBuf,
    /// Static annotation UI bundle served at `/`.
    pub ui_dir: Option<PathBuf>,
}

#[derive(Clone)]
struct AppState {
    manifest: Arc<PairManifest>,
    store: Arc<ResponseStore>,
}

/// Per-annotator pair order: a shuffle seeded by the manifest seed XOR a
/// hash of the annotator id.
pub fn presentation_order(manifest: &PairManifest, annotator: &str) -> Vec<usize> {
    let h = Hash64::of(annotator.as_bytes());
    let salt = u64::from_str_radix(h.as_str(), 16).expect("hash is hex");
    let mut order: Vec<usize> = (0..manifest.pairs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(manifest.seed ^ salt));
    order
}

#[derive(Deserialize)]
struct AnnotatorQuery {
    annotator: Option<String>,
}

fn error(status: StatusCode, message: impl Into<String>) -> HttpResponse {
    (status, Json(json!({ "error": message.into() }))).into_response()
}

fn annotator(q: AnnotatorQuery) -> Option<String> {
    q.annotator.filter(|a| !a.trim().is_empty())
}

fn missing_annotator() -> HttpResponse {
    error(StatusCode::BAD_REQUEST, "missing `annotator` query parameter")
}

async fn next_pair(State(s): State<AppState>, Query(q): Query<AnnotatorQuery>) -> HttpResponse {
    let Some(who) = annotator(q) else {
        return missing_annotator();
    };
    let answered = s.store.answered(&who);
    let total = s.manifest.pairs.len();
    let progress = json!({ "answered": answered.len(), "total": total });
    let next =
        presentation_order(&s.manifest, &who).into_iter().map(|i| &s.manifest.pairs[i]).find(|p| !answered.contains(&p.pair_id));
    match next {
        None => Json(json!({ "done": true, "progress": progress })).into_response(),
        Some(p) => Json(json!({
            "done": false,
            "pair_id": p.pair_id,
            "goal": p.goal,
            "left_image": format!("/images/{}/left", p.pair_id),
            "right_image": format!("/images/{}/right", p.pair_id),
            "progress": progress,
        }))
        .into_response(),
    }
}

async fn post_response(State(s): State<AppState>, body: Bytes) -> HttpResponse {
    let mut r: Response = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, format!("invalid response: {e}")),
    };
    if let Err(e) = r.validate() {
        return error(StatusCode::BAD_REQUEST, e);
    }
    if r.timestamp == 0 {
        r.timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    }
    let store = s.store.clone();
    let manifest = s.manifest.clone();
    let result = tokio::task::spawn_blocking(move || store.insert(r, &manifest)).await;
    match result {
        Ok(Ok(())) => (StatusCode::CREATED, Json(json!({ "ok": true }))).into_response(),
        Ok(Err(InsertError::UnknownPair)) => error(StatusCode::NOT_FOUND, "unknown pair"),
        Ok(Err(InsertError::Duplicate)) => error(StatusCode::CONFLICT, "pair already answered by this annotator"),
        Ok(Err(InsertError::Io(e))) => error(StatusCode::INTERNAL_SERVER_ERROR, e),
        Err(e) => error(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()),
    }
}

async fn progress(State(s): State<AppState>, Query(q): Query<AnnotatorQuery>) -> HttpResponse {
    let Some(who) = annotator(q) else {
        return missing_annotator();
    };
    let answered = s.store.answered(&who).len();
    let total = s.manifest.pairs.len();
    Json(json!({ "annotator": who, "answered": answered, "total": total, "done": answered >= total })).into_response()
}

async fn image(State(s): State<AppState>, UrlPath((pair_id, side)): UrlPath<(String, String)>) -> HttpResponse {
    let Some(pair) = s.manifest.get(&pair_id) else {
        return error(StatusCode::NOT_FOUND, "unknown pair");
    };
    let path = match side.as_str() {
        "left" => &pair.left_image,
        "right" => &pair.right_image,
        _ => return error(StatusCode::NOT_FOUND, "side must be left or right"),
    };
    match tokio::fs::read(path).await {
        Ok(bytes) => ([(header::CONTENT_TYPE, media_type(path))], bytes).into_response(),
        // The file path would reveal which system produced the image.
        Err(_) => error(StatusCode::NOT_FOUND, "image unavailable"),
    }
}

/// Router for the annotation API, usable inside an existing runtime.
pub fn annotation_app(manifest: PairManifest, store: Arc<ResponseStore>, ui_dir: Option<&Path>) -> Router {
    let state = AppState { manifest: Arc::new(manifest), store };
    let router = Router::new()
        .route("/api/pairs/next", get(next_pair))
        .route("/api/responses", post(post_response))
        .route("/api/progress", get(progress))
        .route("/images/:pair_id/:side", get(image))
        .with_state(state);
    match ui_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router,
    }
}

/// A server running on its own thread; stops when dropped.
pub struct AnnotationServer {
    addr: SocketAddr,
    store: Arc<ResponseStore>,
    shutdown: Option<tokio::sync::oneshot::Sender<()>>,
    thread: Option<std::thread::JoinHandle<()>>,
}

impl AnnotationServer {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn responses(&self) -> Vec<Response> {
        self.store.responses()
    }

    /// Blocks until the server exits.
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn stop(mut self) {
        self.halt();
    }

    fn halt(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for AnnotationServer {
    fn drop(&mut self) {
        self.halt();
    }
}

/// Binds `addr` (port 0 picks a free port) and serves until stopped.
pub fn spawn_annotation_server(cfg: ServerConfig, addr: &str) -> Result<AnnotationServer, EvalError> {
    for p in &cfg.manifest.pairs {
        if p.left_image == p.right_image {
            return Err(EvalError::Invalid(format!("pair {} shows the same image twice", p.pair_id)));
        }
    }
    let store = Arc::new(ResponseStore::open(&cfg.store_path)?);
    let listener = std::net::TcpListener::bind(addr).map_err(|e| EvalError::Invalid(format!("bind {addr}: {e}")))?;
    listener.set_nonblocking(true).map_err(|e| EvalError::Invalid(e.to_string()))?;
    let local = listener.local_addr().map_err(|e| EvalError::Invalid(e.to_string()))?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(|e| EvalError::Invalid(format!("runtime: {e}")))?;
    let app = annotation_app(cfg.manifest, store.clone(), cfg.ui_dir.as_deref());
    let (tx, rx) = tokio::sync::oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::from_std(listener).expect("listener registers");
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(AnnotationServer { addr: local, store, shutdown: Some(tx), thread: Some(thread) })
}
