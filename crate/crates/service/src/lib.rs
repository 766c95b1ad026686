//! Chat service: a JSON API for the in-page widget and a terminal REPL.

pub mod config;
pub mod http;
pub mod repl;
pub mod sessions;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Instant;

use edubot_core::{open_store, Engine, StatementStore, StoreError};
use tokio::net::TcpListener;
use tokio::sync::oneshot;
use tokio::task::JoinHandle;

pub use config::{ConfigError, ServiceConfig};
pub use http::{router, AppState, ChatRequest, ChatResponse, Health, OriginPolicy};
pub use repl::run_repl;
pub use sessions::SessionManager;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot listen on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppState {
    pub fn new(store: Arc<dyn StatementStore>, config: &ServiceConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let engine = Engine::new(store, config.engine()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(Self {
            engine,
            sessions: Arc::new(SessionManager::new(config.session_idle())),
            origins: Arc::new(OriginPolicy::from_list(&config.allowed_origins)),
            max_input_chars: config.max_input_chars,
            started: Instant::now(),
        })
    }
}

/// A server running in the background.
pub struct RunningService {
    pub addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    task: JoinHandle<std::io::Result<()>>,
}

impl RunningService {
    /// Stops accepting connections, waits for in-flight requests, and drops
    /// the store.
    pub async fn stop(mut self) -> std::io::Result<()> {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        self.task.await.map_err(std::io::Error::other)?
    }
}

pub async fn spawn(listener: TcpListener, state: AppState) -> std::io::Result<RunningService> {
    let addr = listener.local_addr()?;
    let (tx, rx) = oneshot::channel::<()>();
    let app = router(state);
    let task = tokio::spawn(async move {
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = rx.await;
            })
            .await
    });
    Ok(RunningService {
        addr,
        shutdown: Some(tx),
        task,
    })
}

/// Opens the configured store and serves until `shutdown` resolves.
pub async fn serve(config: &ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
    config.validate()?;
    let store = open_store(&config.store_location())?;
    let state = AppState::new(store, config)?;
    let addr = config.addr();
    let listener = TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    tracing::info!(%addr, db = %config.db, read_only = config.read_only, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    Ok(())
}
