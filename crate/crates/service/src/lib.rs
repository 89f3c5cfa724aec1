//! HTTP API and command line around the railsafe core.

pub mod api;
mod cli;
mod config;

use std::sync::Arc;

use railsafe_core::store::Archive;

pub use api::{router, with_cors, ApiError, AppState};
pub use cli::run;
pub use config::{read_ontology, ApiConfig};

/// Builds the full application (routes, auth, CORS) for `config`.
pub fn app(config: &ApiConfig, archive: Archive) -> axum::Router {
    let state = Arc::new(AppState::new(archive, config));
    with_cors(router(state), &config.cors_origins)
}

/// Serves until Ctrl-C or SIGTERM, then lets in-flight requests finish.
pub async fn serve(config: ApiConfig, archive: Archive) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    axum::serve(listener, app(&config, archive))
        .with_graceful_shutdown(shutdown_signal())
        .await
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        if let Ok(mut s) = tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            s.recv().await;
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {}
        _ = term => {}
    }
}
