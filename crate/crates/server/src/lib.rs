//! Reference data exchange controller: a session server through which two
//! model participants exchange variable data, with toggleable faults.
//!
//! Endpoints: `POST /create_session`, `/join_session`, `/send_data`,
//! `/receive_data`, `/end_session`, `GET /sessions/{id}`, and `POST /reset`
//! when enabled.

pub mod config;
pub mod controller;
pub mod faults;

use std::net::SocketAddr;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::{Json, Router};
use tokio::net::TcpListener;
use tokio::sync::oneshot;

pub use config::{ConfigError, ServerConfig};
pub use controller::{Controller, Reply, Status};
pub use faults::{FaultConfig, Preset};

#[derive(Clone)]
struct AppState {
    controller: Arc<Controller>,
    reset_enabled: bool,
}

async fn handle(State(app): State<AppState>, method: Method, uri: Uri, body: Bytes) -> Response {
    let reply = app
        .controller
        .dispatch(method.as_str(), uri.path(), &body, app.reset_enabled);
    let status = StatusCode::from_u16(reply.status.code()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, Json(reply.body)).into_response()
}

pub fn router(controller: Arc<Controller>, reset_enabled: bool) -> Router {
    Router::new().fallback(handle).with_state(AppState {
        controller,
        reset_enabled,
    })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: TcpListener,
    config: &ServerConfig,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let app = router(Arc::new(Controller::new(config.faults)), config.enable_reset);
    axum::serve(listener, app).with_graceful_shutdown(shutdown).await
}

/// A server running on its own thread; stopped on drop.
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<std::io::Result<()>>>,
}

impl ServerHandle {
    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn shutdown(mut self) -> std::io::Result<()> {
        self.stop_and_join()
    }

    fn stop_and_join(&mut self) -> std::io::Result<()> {
        if let Some(stop) = self.stop.take() {
            let _ = stop.send(());
        }
        match self.thread.take() {
            Some(t) => t
                .join()
                .unwrap_or_else(|_| Err(std::io::Error::other("server thread panicked"))),
            None => Ok(()),
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        let _ = self.stop_and_join();
    }
}

/// Binds `config.host:config.port` (port 0 picks a free port) and serves on
/// a background thread.
pub fn spawn(config: ServerConfig) -> std::io::Result<ServerHandle> {
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()?;
    let listener = runtime.block_on(TcpListener::bind((config.host.as_str(), config.port)))?;
    let addr = listener.local_addr()?;
    let (stop, stopped) = oneshot::channel::<()>();
    let thread = std::thread::Builder::new().name("des-server".into()).spawn(move || {
        runtime.block_on(serve(listener, &config, async {
            let _ = stopped.await;
        }))
    })?;
    Ok(ServerHandle {
        addr,
        stop: Some(stop),
        thread: Some(thread),
    })
}
