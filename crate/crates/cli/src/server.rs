//! HTTP front end of an [`AnnotationService`].
//!
//! | method | path | body | response |
//! |---|---|---|---|
//! | GET | `/categories` | | [`ProgressResponse`] |
//! | GET | `/queue/next?category=PRE` | | [`QueueItem`] |
//! | POST | `/decision` | [`ClusterDecision`] | [`CategoryProgress`] |
//! | GET | `/export` | | [`ExportResponse`] |
//!
//! Failures carry `{"error": "..."}`: 400 for malformed requests, 404 for
//! unknown clusters or categories without a queue, 409 for a cluster that is
//! already decided, 422 for an inconsistent decision.

use std::sync::{Arc, RwLock};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tweetsense::wsd::{AnnotationService, CategoryProgress, CleaningReport, ClusterDecision, LabeledExample, QueueItem};
use tweetsense::{Error, EventCategory};

pub type SharedService = Arc<RwLock<AnnotationService>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressResponse {
    pub all_done: bool,
    pub categories: Vec<CategoryProgress>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportResponse {
    pub labeled: Vec<LabeledExample>,
    pub report: CleaningReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

#[derive(Debug, Deserialize)]
pub struct NextQuery {
    pub category: String,
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(ErrorBody { error: self.1 })).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::DuplicateDecision { .. } => StatusCode::CONFLICT,
            Error::UnknownCluster(_) => StatusCode::NOT_FOUND,
            Error::InvalidDecision(_) => StatusCode::UNPROCESSABLE_ENTITY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

fn poisoned<T>(_: T) -> ApiError {
    ApiError(StatusCode::INTERNAL_SERVER_ERROR, "service state poisoned".into())
}

pub fn router(service: SharedService) -> Router {
    Router::new()
        .route("/categories", get(categories))
        .route("/queue/next", get(next))
        .route("/decision", post(decision))
        .route("/export", get(export))
        .with_state(service)
}

async fn categories(State(s): State<SharedService>) -> Result<Json<ProgressResponse>, ApiError> {
    let s = s.read().map_err(poisoned)?;
    Ok(Json(ProgressResponse {
        all_done: s.session().all_done(),
        categories: s.progress(),
    }))
}

async fn next(
    State(s): State<SharedService>,
    q: Result<Query<NextQuery>, QueryRejection>,
) -> Result<Json<QueueItem>, ApiError> {
    let Query(q) = q.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    let category: EventCategory = q
        .category
        .parse()
        .map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("{e}")))?;
    let s = s.read().map_err(poisoned)?;
    if !s.session().queues().contains_key(&category) {
        return Err(ApiError(StatusCode::NOT_FOUND, format!("no review queue for {category}")));
    }
    Ok(Json(s.next(category)))
}

async fn decision(
    State(s): State<SharedService>,
    body: Result<Json<ClusterDecision>, JsonRejection>,
) -> Result<Json<CategoryProgress>, ApiError> {
    let Json(d) = body.map_err(|e| ApiError(StatusCode::BAD_REQUEST, e.body_text()))?;
    let mut s = s.write().map_err(poisoned)?;
    Ok(Json(s.decide(d)?))
}

async fn export(State(s): State<SharedService>) -> Result<Json<ExportResponse>, ApiError> {
    let s = s.read().map_err(poisoned)?;
    let (labeled, report) = s.export();
    Ok(Json(ExportResponse { labeled, report }))
}
