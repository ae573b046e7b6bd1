//! HTTP front-end for annotation sessions.
//!
//! Sessions live in memory, keyed by an opaque id. Image work runs on a
//! bounded blocking pool; each session is guarded by its own read/write
//! lock so mutations on one session are serialized while other sessions
//! proceed. Every error response carries `{code, message, details}`.

pub mod bundle;
pub mod config;
pub mod error;
pub mod routes;
pub mod state;

use std::future::Future;
use std::net::SocketAddr;
use std::time::{Duration, Instant};

pub use config::ServiceConfig;
pub use error::{ApiError, ErrorEnvelope};
pub use routes::router;
pub use state::AppState;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        source: std::io::Error,
    },
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Binds, restores snapshots, serves until `shutdown` resolves, then writes
/// a final snapshot. `on_bound` sees the actual listening address.
pub async fn serve(
    config: ServiceConfig,
    on_bound: impl FnOnce(SocketAddr),
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<AppState, ServeError> {
    let listener = tokio::net::TcpListener::bind(&config.bind)
        .await
        .map_err(|source| ServeError::Bind {
            addr: config.bind.clone(),
            source,
        })?;
    let state = AppState::new(config);
    let restored = state.restore_snapshots()?;
    if restored > 0 {
        tracing::info!(restored, "restored sessions from snapshots");
    }
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    on_bound(addr);

    let maintenance = tokio::spawn(maintain(state.clone()));
    let app = router(state.clone());
    let served = axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await;
    maintenance.abort();
    let saved = state.save_snapshots().await?;
    if saved > 0 {
        tracing::info!(saved, "wrote session snapshots");
    }
    served?;
    Ok(state)
}

/// Periodic idle eviction and snapshotting.
async fn maintain(state: AppState) {
    let cfg = state.config();
    let mut period =
        (cfg.session_timeout() / 4).clamp(Duration::from_secs(1), Duration::from_secs(30));
    if cfg.snapshot_dir.is_some() {
        period = period.min(cfg.snapshot_interval());
    }
    let mut last_snapshot = Instant::now();
    let mut tick = tokio::time::interval(period);
    loop {
        tick.tick().await;
        state.evict_idle(Instant::now());
        if last_snapshot.elapsed() >= state.config().snapshot_interval() {
            last_snapshot = Instant::now();
            if let Err(e) = state.save_snapshots().await {
                tracing::warn!(error = %e, "snapshot failed");
            }
        }
    }
}
