//! The annotator HTTP service.

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use elbench_core::linkers::link_with_segments;
use elbench_core::{Annotation, LinkError, Linker};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::net::TcpListener;
use tokio::sync::oneshot;

use crate::wire::{codes, AnnotateRequest, AnnotateResponse, ErrorBody};

pub const SERVICE_NAME: &str = "elbench";

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    BindFailure { addr: String, source: std::io::Error },
    #[error("server runtime: {0}")]
    Runtime(#[from] std::io::Error),
}

/// A linker behind the adapter chain: documents are split into segments of at
/// most `max_tokens` tokens, linked per segment, and merged back to document
/// offsets.
#[derive(Clone)]
pub struct Pipeline {
    pub linker: Arc<dyn Linker>,
    pub max_tokens: usize,
    /// Free-form label, e.g. `prior_argmax/dict`.
    pub system: String,
}

impl Pipeline {
    pub fn new(linker: Arc<dyn Linker>, max_tokens: usize, system: impl Into<String>) -> Self {
        Self { linker, max_tokens, system: system.into() }
    }

    pub fn annotate(&self, text: &str) -> Result<Vec<Annotation>, LinkError> {
        link_with_segments(self.linker.as_ref(), text, self.max_tokens)
    }
}

impl std::fmt::Debug for Pipeline {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Pipeline")
            .field("linker", &self.linker.name())
            .field("max_tokens", &self.max_tokens)
            .field("system", &self.system)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub service: String,
    pub linker: String,
    pub system: String,
    pub max_tokens: usize,
}

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new().route("/annotate", post(annotate)).route("/health", get(health)).with_state(pipeline)
}

fn error_response(status: StatusCode, code: &str, message: impl Into<String>) -> Response {
    (status, Json(ErrorBody::new(code, message))).into_response()
}

// Takes raw bytes so that every parse failure, including a wrong content
// type, maps to the same 400 body.
async fn annotate(State(pipeline): State<Arc<Pipeline>>, body: Bytes) -> Response {
    let request: AnnotateRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(StatusCode::BAD_REQUEST, codes::MALFORMED_REQUEST, e.to_string()),
    };
    let linked = tokio::task::spawn_blocking(move || pipeline.annotate(&request.text)).await;
    match linked {
        Ok(Ok(annotations)) => Json(AnnotateResponse::from_annotations(&annotations)).into_response(),
        Ok(Err(e)) => error_response(StatusCode::INTERNAL_SERVER_ERROR, codes::LINKER_FAILURE, e.to_string()),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, codes::LINKER_FAILURE, e.to_string()),
    }
}

async fn health(State(pipeline): State<Arc<Pipeline>>) -> Json<Health> {
    Json(Health {
        service: SERVICE_NAME.to_string(),
        linker: pipeline.linker.name().to_string(),
        system: pipeline.system.clone(),
        max_tokens: pipeline.max_tokens,
    })
}

/// Binds `addr` and serves until the future is dropped.
pub async fn serve(pipeline: Arc<Pipeline>, addr: &str) -> Result<(), ServeError> {
    let listener =
        TcpListener::bind(addr).await.map_err(|source| ServeError::BindFailure { addr: addr.to_string(), source })?;
    axum::serve(listener, router(pipeline)).await?;
    Ok(())
}

/// A service running on its own thread and runtime. Dropping the handle
/// shuts the service down and joins the thread.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(thread) = self.thread.take() {
            let _ = thread.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop();
    }
}

/// Starts the service in the background. Use port 0 to pick a free port;
/// the bound address is available from the handle.
pub fn spawn_server(pipeline: Arc<Pipeline>, addr: &str) -> Result<ServerHandle, ServeError> {
    let runtime = tokio::runtime::Builder::new_multi_thread().worker_threads(2).enable_all().build()?;
    let listener = runtime
        .block_on(TcpListener::bind(addr))
        .map_err(|source| ServeError::BindFailure { addr: addr.to_string(), source })?;
    let bound = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let thread = std::thread::spawn(move || {
        runtime.block_on(async move {
            let _ = axum::serve(listener, router(pipeline))
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
    });
    Ok(ServerHandle { addr: bound, shutdown: Some(tx), thread: Some(thread) })
}
