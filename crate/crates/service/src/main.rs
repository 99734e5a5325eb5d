use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use healthdial_core::config::Config;
use healthdial_core::engine::Engine;
use healthdial_service::{router, AppState};
use tracing_subscriber::EnvFilter;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();

    let file = std::env::args().nth(1).map(PathBuf::from);
    let config = match Config::load(file.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            tracing::error!("{e}");
            return ExitCode::from(2);
        }
    };
    let engine = match Engine::from_config(&config) {
        Ok(e) => Arc::new(e),
        Err(e) => {
            tracing::error!("{e}");
            return ExitCode::from(2);
        }
    };
    let app = router(AppState::new(engine, config.token.clone()));
    let listener = match tokio::net::TcpListener::bind(&config.listen).await {
        Ok(l) => l,
        Err(e) => {
            tracing::error!("cannot listen on {}: {e}", config.listen);
            return ExitCode::from(1);
        }
    };
    tracing::info!(listen = %config.listen, store = %config.store.display(), "serving");
    if let Err(e) = axum::serve(listener, app).await {
        tracing::error!("{e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
