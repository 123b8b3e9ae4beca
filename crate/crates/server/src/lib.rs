//! HTTP/JSON facade over `affectrec`: extraction, catalog ingestion,
//! ephemeral profile sessions, and recommendations.
//!
//! Catalog writes are the only durable writes and go through the audited
//! storage gateway; user profiles exist only in the session table.

pub mod api;
pub mod config;
pub mod error;

use std::net::SocketAddr;
use std::sync::Arc;

use affectrec::catalog::Catalog;
use affectrec::privacy::{AuditedStorage, FileBackend, SessionStore, Sweeper};

pub use api::{router, AppState};
pub use config::{BackendKind, ConfigError, ServiceConfig};
pub use error::{ApiError, ErrorBody};

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot open catalog: {0}")]
    Catalog(#[from] affectrec::catalog::CatalogError),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

/// Builds the production state from a validated config.
pub fn build_state(config: &ServiceConfig) -> Result<AppState, ServeError> {
    let backend = config.build_backend()?;
    let storage = Arc::new(AuditedStorage::new(Arc::new(FileBackend::new("."))));
    let catalog = Catalog::persistent(storage.clone(), config.catalog_path.to_string_lossy())?;
    log::info!("catalog holds {} item(s)", catalog.len());
    let sessions = Arc::new(SessionStore::with_system_clock(config.session_ttl()));
    Ok(AppState::new(backend, Arc::new(catalog), sessions, storage))
}

/// Runs the service until Ctrl-C.
pub async fn serve(config: ServiceConfig) -> Result<(), ServeError> {
    let state = build_state(&config)?;
    let _sweeper = Sweeper::start(state.sessions().clone(), config.sweep_interval());
    let addr: SocketAddr = format!("{}:{}", config.listen, config.port)
        .parse()
        .map_err(|e| ConfigError::Invalid(format!("listen address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
