use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::Json;
use serde::{Deserialize, Serialize};
use stratos_core::io::report::{
    concentration_doc, format_share, impact_views, productivity_doc, stratification_doc,
    ConcentrationDoc, ImpactView, ProductivityDoc, StratificationDoc,
};
use stratos_core::io::{parse_config, read_portfolio};
use stratos_core::model::SliceKey;
use stratos_core::{
    blend_curve, cumulative_shares, hhi_report, productivity_curve, simulate_threshold_impact,
    solve_t_a, stratify as run_stratify, BlendSpec, Money, Scope, StratifyConfig, Thresholds,
};

use crate::error::ApiError;
use crate::{AppState, PortfolioHandle};

type ApiResult<T> = Result<T, ApiError>;

fn lookup(state: &AppState, id: &str) -> ApiResult<Arc<PortfolioHandle>> {
    state.get(id).ok_or_else(|| ApiError::not_found(id))
}

/// Runs CPU-bound work off the async workers.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
}

#[derive(Serialize)]
pub struct Health {
    status: &'static str,
    version: &'static str,
}

pub async fn health() -> Json<Health> {
    Json(Health {
        status: "ok",
        version: env!("CARGO_PKG_VERSION"),
    })
}

#[derive(Serialize)]
pub struct PortfolioInfo {
    portfolio_id: String,
    n: usize,
    total_value: String,
    dimensions: Vec<String>,
    created_unix_seconds: u64,
}

impl From<&PortfolioHandle> for PortfolioInfo {
    fn from(h: &PortfolioHandle) -> Self {
        PortfolioInfo {
            portfolio_id: h.id.clone(),
            n: h.snapshot.len(),
            total_value: h.snapshot.total_display(),
            dimensions: h.snapshot.dimensions().to_vec(),
            created_unix_seconds: h.created_unix_seconds,
        }
    }
}

pub async fn upload(
    State(state): State<AppState>,
    body: Bytes,
) -> ApiResult<(StatusCode, Json<PortfolioInfo>)> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "empty_body",
            "request body must be a portfolio table",
        ));
    }
    let snapshot =
        blocking(move || read_portfolio(body.as_ref()).map_err(ApiError::upload)).await?;
    let handle = state.register(snapshot);
    Ok((
        StatusCode::CREATED,
        Json(PortfolioInfo::from(handle.as_ref())),
    ))
}

pub async fn describe(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<PortfolioInfo>> {
    Ok(Json(PortfolioInfo::from(lookup(&state, &id)?.as_ref())))
}

#[derive(Serialize)]
pub struct SharesDoc {
    n: usize,
    item_ids: Vec<String>,
    shares: Vec<String>,
}

/// Cumulative share of every item, in ranked order.
pub async fn shares(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> ApiResult<Json<SharesDoc>> {
    let handle = lookup(&state, &id)?;
    blocking(move || {
        let s = &handle.snapshot;
        let shares = cumulative_shares(s).map_err(ApiError::compute)?;
        Ok(Json(SharesDoc {
            n: s.len(),
            item_ids: s.iter().map(|i| i.id().to_string()).collect(),
            shares: shares.as_slice().iter().map(|&c| format_share(c)).collect(),
        }))
    })
    .await
}

/// Body is a config document; an empty body means the defaults.
pub async fn stratify(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<StratificationDoc>> {
    let handle = lookup(&state, &id)?;
    let config = if body.iter().all(u8::is_ascii_whitespace) {
        StratifyConfig::default()
    } else {
        let text = std::str::from_utf8(&body)
            .map_err(|_| ApiError::unprocessable("config must be UTF-8"))?;
        parse_config(text).map_err(ApiError::compute)?
    };
    blocking(move || {
        let result = run_stratify(&handle.snapshot, &config).map_err(ApiError::compute)?;
        Ok(Json(stratification_doc(&result)))
    })
    .await
}

#[derive(Deserialize)]
pub struct HhiQuery {
    dims: Option<String>,
}

/// `dims` is a comma-separated list of dimensions; absent means the whole portfolio.
pub async fn hhi(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HhiQuery>,
) -> ApiResult<Json<ConcentrationDoc>> {
    let handle = lookup(&state, &id)?;
    let dims: Vec<String> = query
        .dims
        .as_deref()
        .unwrap_or("")
        .split(',')
        .map(str::trim)
        .filter(|d| !d.is_empty())
        .map(String::from)
        .collect();
    blocking(move || {
        let report = hhi_report(&handle.snapshot, &dims).map_err(ApiError::compute)?;
        Ok(Json(concentration_doc(&report)))
    })
    .await
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRequest {
    candidates: Vec<f64>,
    /// Baseline; its `t_b` and `t_c` are kept for every candidate.
    #[serde(default)]
    thresholds: Option<Thresholds>,
    /// Restricts the simulation to one slice.
    #[serde(default)]
    filter: BTreeMap<String, String>,
    #[serde(default)]
    scope: Scope,
    #[serde(default = "default_cutoff")]
    new_cutoff_months: u32,
}

fn default_cutoff() -> u32 {
    stratos_core::model::DEFAULT_NEW_CUTOFF_MONTHS
}

pub async fn simulate(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> ApiResult<Json<Vec<ImpactView>>> {
    let handle = lookup(&state, &id)?;
    let request: SimulateRequest = serde_json::from_slice(&body)
        .map_err(|e| ApiError::unprocessable(format!("invalid simulate request: {e}")))?;
    blocking(move || {
        if request.candidates.is_empty() {
            return Ok(Json(Vec::new()));
        }
        let key = SliceKey {
            filter: request.filter,
            scope: request.scope,
        };
        let slice = handle
            .snapshot
            .slice_with_cutoff(&key, request.new_cutoff_months)
            .map_err(ApiError::compute)?;
        let baseline = request.thresholds.unwrap_or_default();
        let rows = simulate_threshold_impact(&slice, &baseline, &request.candidates)
            .map_err(ApiError::compute)?;
        Ok(Json(impact_views(&rows)))
    })
    .await
}

/// `j` is the later-pass item count and `J` their total value.
pub async fn productivity(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> ApiResult<Json<ProductivityDoc>> {
    let handle = lookup(&state, &id)?;
    let param = |name: &str| {
        query
            .get(name)
            .ok_or_else(|| ApiError::unprocessable(format!("missing query parameter `{name}`")))
    };
    let j: u64 = param("j")?
        .parse()
        .map_err(|_| ApiError::unprocessable("`j` must be a positive integer"))?;
    let big_j: Money = param("J")?
        .parse()
        .map_err(|e| ApiError::unprocessable(format!("`J`: {e}")))?;
    let blend = BlendSpec::new(j, big_j).map_err(ApiError::compute)?;
    blocking(move || {
        let curve = productivity_curve(&handle.snapshot).map_err(ApiError::compute)?;
        let b = blend_curve(&curve, &blend);
        let solution = solve_t_a(&handle.snapshot, &blend).ok();
        Ok(Json(productivity_doc(&curve, &b, solution.as_ref())))
    })
    .await
}
