//! HTTP/JSON service over the stratos engine.
//!
//! Uploaded portfolios become immutable snapshots held in memory under an
//! opaque id. Every other endpoint is a pure function of a snapshot and the
//! request, so repeated requests return identical bodies.

mod error;
mod handlers;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, RwLock};

use axum::extract::DefaultBodyLimit;
use axum::http::{header, HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use serde::Deserialize;
use stratos_core::PortfolioSnapshot;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use error::ApiError;

pub const DEFAULT_MAX_BODY_BYTES: usize = 64 * 1024 * 1024;

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServiceConfig {
    /// Upload size limit; larger bodies get 413.
    pub max_body_bytes: usize,
    /// Origins allowed by CORS. `"*"` allows any; empty disables CORS.
    pub cors_origins: Vec<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            cors_origins: Vec::new(),
        }
    }
}

#[derive(Debug)]
pub struct PortfolioHandle {
    pub id: String,
    pub snapshot: PortfolioSnapshot,
    pub created_unix_seconds: u64,
}

/// Registered portfolios. The map is the only mutable state.
#[derive(Clone, Default)]
pub struct AppState {
    portfolios: Arc<RwLock<HashMap<String, Arc<PortfolioHandle>>>>,
}

impl AppState {
    pub fn register(&self, snapshot: PortfolioSnapshot) -> Arc<PortfolioHandle> {
        let handle = Arc::new(PortfolioHandle {
            id: uuid::Uuid::new_v4().simple().to_string(),
            snapshot,
            created_unix_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
        });
        self.portfolios
            .write()
            .expect("registry lock poisoned")
            .insert(handle.id.clone(), handle.clone());
        handle
    }

    pub fn get(&self, id: &str) -> Option<Arc<PortfolioHandle>> {
        self.portfolios
            .read()
            .expect("registry lock poisoned")
            .get(id)
            .cloned()
    }

    pub fn len(&self) -> usize {
        self.portfolios
            .read()
            .expect("registry lock poisoned")
            .len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn router(state: AppState, config: &ServiceConfig) -> Router {
    let api = Router::new()
        .route("/v1/health", get(handlers::health))
        .route("/v1/portfolios", post(handlers::upload))
        .route("/v1/portfolios/{id}", get(handlers::describe))
        .route("/v1/portfolios/{id}/shares", get(handlers::shares))
        .route("/v1/portfolios/{id}/stratify", post(handlers::stratify))
        .route("/v1/portfolios/{id}/hhi", get(handlers::hhi))
        .route("/v1/portfolios/{id}/simulate", post(handlers::simulate))
        .route(
            "/v1/portfolios/{id}/productivity",
            get(handlers::productivity),
        )
        .layer(DefaultBodyLimit::max(config.max_body_bytes))
        .with_state(state);
    match cors_layer(&config.cors_origins) {
        Some(cors) => api.layer(cors),
        None => api,
    }
}

fn cors_layer(origins: &[String]) -> Option<CorsLayer> {
    if origins.is_empty() {
        return None;
    }
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    Some(
        CorsLayer::new()
            .allow_origin(allow)
            .allow_methods([Method::GET, Method::POST])
            .allow_headers([header::CONTENT_TYPE]),
    )
}

/// Serves until interrupted.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!(
        "stratos service listening on http://{}",
        listener.local_addr()?
    );
    axum::serve(listener, router(AppState::default(), &config))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
