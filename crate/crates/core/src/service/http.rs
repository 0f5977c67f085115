use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use super::{ApiCode, ApiError, SchedulingService, StateSummary, HEATMAP_DAYS_AFTER, HEATMAP_DAYS_BEFORE};
use crate::engine::{HeatmapCell, Recommendation};
use crate::model::{Booking, CaseRequest, DateWindow, Day, SurgeonId, UnitId};

impl ApiCode {
    pub fn status(self) -> StatusCode {
        match self {
            ApiCode::Validation => StatusCode::BAD_REQUEST,
            ApiCode::NoFeasibleDay | ApiCode::DayNotFeasible => StatusCode::UNPROCESSABLE_ENTITY,
            ApiCode::InsufficientHours | ApiCode::Conflict => StatusCode::CONFLICT,
            ApiCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.code.status(), Json(self)).into_response()
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct HeatmapQuery {
    pub unit: UnitId,
    pub surgeon: SurgeonId,
    pub start: Option<Day>,
    pub end: Option<Day>,
    /// Without `start`/`end`, show two weeks before to a month after this day.
    pub reference: Option<Day>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapResponse {
    pub version: u64,
    pub unit: UnitId,
    pub surgeon: SurgeonId,
    pub start: Day,
    pub end: Day,
    pub thresholds: Vec<u32>,
    pub cells: Vec<HeatmapCell>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecommendBody {
    #[serde(flatten)]
    pub request: CaseRequest,
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendResponse {
    pub version: u64,
    #[serde(flatten)]
    pub recommendation: Recommendation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BookBody {
    #[serde(flatten)]
    pub request: CaseRequest,
    pub day: Day,
    pub expected_version: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BookResponse {
    pub version: u64,
    #[serde(flatten)]
    pub booking: Booking,
}

type Svc = Arc<SchedulingService>;

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ApiError> {
    payload.map(|Json(b)| b).map_err(|e| ApiError::validation(e.body_text()))
}

async fn get_heatmap(
    State(svc): State<Svc>,
    query: Result<Query<HeatmapQuery>, QueryRejection>,
) -> Result<Json<HeatmapResponse>, ApiError> {
    let Query(q) = query.map_err(|e| ApiError::validation(e.body_text()))?;
    let (start, end) = match (q.start, q.end, q.reference) {
        (Some(s), Some(e), _) => (s, e),
        (None, None, Some(r)) => (r - HEATMAP_DAYS_BEFORE, r + HEATMAP_DAYS_AFTER),
        _ => return Err(ApiError::validation("give start and end, or reference")),
    };
    let range = DateWindow::new(start, end).map_err(|e| ApiError::validation(e.to_string()))?;
    let (version, cells) = svc.heatmap(&q.unit, &q.surgeon, range)?;
    Ok(Json(HeatmapResponse {
        version,
        unit: q.unit,
        surgeon: q.surgeon,
        start,
        end,
        thresholds: svc.thresholds().values().to_vec(),
        cells,
    }))
}

async fn post_recommend(
    State(svc): State<Svc>,
    payload: Result<Json<RecommendBody>, JsonRejection>,
) -> Result<Json<RecommendResponse>, ApiError> {
    let b = body(payload)?;
    let (version, recommendation) = svc.recommend(&b.request, b.n)?;
    Ok(Json(RecommendResponse { version, recommendation }))
}

async fn post_book(
    State(svc): State<Svc>,
    payload: Result<Json<BookBody>, JsonRejection>,
) -> Result<Json<BookResponse>, ApiError> {
    let b = body(payload)?;
    let receipt = tokio::task::spawn_blocking(move || svc.book(&b.request, b.day, b.expected_version))
        .await
        .map_err(|e| ApiError::new(ApiCode::Internal, e.to_string()))??;
    Ok(Json(BookResponse {
        version: receipt.version,
        booking: receipt.booking,
    }))
}

async fn get_state(State(svc): State<Svc>) -> Json<StateSummary> {
    Json(svc.summary())
}

pub fn router(svc: Svc) -> Router {
    Router::new()
        .route("/heatmap", get(get_heatmap))
        .route("/recommend", post(post_recommend))
        .route("/book", post(post_book))
        .route("/state", get(get_state))
        .with_state(svc)
}

/// Serves until ctrl-c.
pub async fn serve(svc: Svc, listener: tokio::net::TcpListener) -> std::io::Result<()> {
    axum::serve(listener, router(svc))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
