//! HTTP interface over a [`Store`].
//!
//! Every body is JSON. Errors come back as `{"error": <code>, "reason":
//! <message>}` with a 4xx status for anything the client can fix.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use fillroute_core::forecast::{forecast_fleet, ForecastConfig};
use fillroute_core::io::BaselineRoute;
use fillroute_core::model::ModelTag;
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::compare::{compare, BaselinePlan};
use crate::error::Error;
use crate::geo;
use crate::plan::{plan_day, PlanRequest};
use crate::store::Store;

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    code: &'static str,
    reason: String,
}

impl ApiError {
    fn bad_request(reason: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            code: "bad_request",
            reason: reason.into(),
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        use fillroute_core::Error as Core;
        let (status, code) = match &e {
            Error::PlanNotFound(_) => (StatusCode::NOT_FOUND, "not_found"),
            Error::InvalidRequest(_) => (StatusCode::BAD_REQUEST, "bad_request"),
            Error::MissingMatrix(_) | Error::MissingFile(_) | Error::MissingCoordinates(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "incomplete_store")
            }
            Error::Core(Core::UnknownContainer(_)) => (StatusCode::BAD_REQUEST, "unknown_container"),
            Error::Core(Core::InvalidParameter(_) | Core::DuplicateId(_)) => (StatusCode::BAD_REQUEST, "bad_request"),
            _ => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        Self {
            status,
            code,
            reason: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            warn!("{}: {}", self.code, self.reason);
        }
        (self.status, Json(json!({"error": self.code, "reason": self.reason}))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Runs blocking store work off the async executor.
async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    F: FnOnce() -> Result<T, Error> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError {
        status: StatusCode::INTERNAL_SERVER_ERROR,
        code: "internal",
        reason: e.to_string(),
    })?
    .map_err(ApiError::from)
}

fn json_bytes(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/containers", get(containers))
        .route("/history/{container_id}", get(history))
        .route("/forecasts", get(forecasts))
        .route("/plans", post(create_plan))
        .route("/plans/{id}", get(get_plan))
        .route("/plans/{id}/geojson", get(get_geojson))
        .route("/plans/{id}/compare", post(compare_plan))
        .route("/plans/{id}/trace", get(get_trace))
        .with_state(store)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(store: Arc<Store>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(store)).await
}

async fn containers(State(store): State<Arc<Store>>) -> ApiResult<Response> {
    let list = blocking(move || store.containers()).await?;
    Ok(Json(list).into_response())
}

async fn history(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    let (known, records) = blocking(move || {
        let known = store.containers()?.iter().any(|c| c.id == id);
        let records: Vec<_> = store.history()?.into_iter().filter(|r| r.container_id == id).collect();
        Ok((known, records))
    })
    .await?;
    if !known {
        return Err(ApiError {
            status: StatusCode::NOT_FOUND,
            code: "not_found",
            reason: "unknown container".into(),
        });
    }
    Ok(Json(records).into_response())
}

#[derive(Debug, Deserialize)]
struct ForecastQuery {
    date: Option<String>,
    model: Option<String>,
}

#[derive(Serialize)]
struct ForecastResponse {
    date: NaiveDate,
    model: ModelTag,
    forecasts: Vec<fillroute_core::model::Forecast>,
    skipped: Vec<(String, String)>,
}

async fn forecasts(
    State(store): State<Arc<Store>>,
    query: Result<Query<ForecastQuery>, QueryRejection>,
) -> ApiResult<Response> {
    let Query(q) = query.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let date: NaiveDate = q
        .date
        .as_deref()
        .ok_or_else(|| ApiError::bad_request("missing date"))?
        .parse()
        .map_err(|e| ApiError::bad_request(format!("bad date: {e}")))?;
    let model: ModelTag = match q.model.as_deref() {
        None => ModelTag::Gp,
        Some(m) => m.parse().map_err(|_| ApiError::bad_request(format!("unknown model {m}")))?,
    };
    let fleet = blocking(move || {
        Ok(forecast_fleet(
            &store.containers()?,
            &store.history()?,
            date,
            model,
            &ForecastConfig::default(),
        ))
    })
    .await?;
    Ok(Json(ForecastResponse {
        date,
        model,
        forecasts: fleet.forecasts,
        skipped: fleet.skipped,
    })
    .into_response())
}

#[derive(Serialize)]
struct PlanCreated {
    plan_id: String,
    date: NaiveDate,
    fresh: bool,
    routes: usize,
    routed: usize,
    unassigned: usize,
    fitness: f64,
}

async fn create_plan(
    State(store): State<Arc<Store>>,
    body: Result<Json<PlanRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(request) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let run = blocking(move || plan_day(&store, &request)).await?;
    let p = &run.plan;
    let body = PlanCreated {
        plan_id: p.plan_id.clone(),
        date: p.date,
        fresh: run.fresh,
        routes: p.solution.routes.iter().filter(|r| !r.is_empty()).count(),
        routed: p.solution.assigned_count(),
        unassigned: p.solution.unassigned.len(),
        fitness: p.solution.fitness,
    };
    let status = if run.fresh { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(body)).into_response())
}

async fn get_plan(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(json_bytes(blocking(move || store.plan_document(&id)).await?))
}

async fn get_geojson(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    let doc = blocking(move || {
        let plan = store.load_plan(&id)?;
        geo::to_document(&geo::export_geojson(&plan, &store)?)
    })
    .await?;
    Ok(([(header::CONTENT_TYPE, "application/geo+json")], doc).into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareRequest {
    routes: Vec<BaselineRoute>,
}

async fn compare_plan(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    body: Result<Json<CompareRequest>, JsonRejection>,
) -> ApiResult<Response> {
    let Json(req) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    let report = blocking(move || {
        let plan = store.load_plan(&id)?;
        let baseline = BaselinePlan::for_plan(&store, &plan, req.routes)?;
        compare(&plan, &baseline)
    })
    .await?;
    Ok(Json(report).into_response())
}

async fn get_trace(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Response> {
    let key = id.clone();
    let trace = blocking(move || store.load_trace(&key)).await?;
    Ok(Json(json!({"plan_id": id, "best_fitness": trace})).into_response())
}
