//! JSON-over-HTTP front end for [`SessionService`].
//!
//! | method | path                                   |
//! |--------|----------------------------------------|
//! | POST   | `/api/sessions`                        |
//! | POST   | `/api/sessions/{id}/observe`           |
//! | GET    | `/api/sessions/{id}`                   |
//! | GET    | `/api/graphs/{id}`                     |
//! | GET    | `/api/graphs/{id}/successors?state=..` |
//!
//! Failures answer with a 4xx status and `{"code", "message"}`. Reals in
//! responses carry 9 significant digits.

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tower_http::services::ServeDir;

use super::{CreateSessionRequest, SessionService};
use crate::error::Error;
use crate::numfmt::{self, REPORT_DIGITS};

pub struct ApiError {
    status: StatusCode,
    code: String,
    message: String,
}

impl From<Error> for ApiError {
    fn from(err: Error) -> Self {
        let status = match err {
            Error::UnknownSession(_) | Error::UnknownGraph(_) | Error::UnknownDictionary(_) => {
                StatusCode::NOT_FOUND
            }
            Error::Io(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError {
            status,
            code: err.code().to_string(),
            message: err.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "code": self.code, "message": self.message });
        (self.status, json_body(body.to_string())).into_response()
    }
}

fn json_body(text: String) -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/json")], text)
}

fn canonical<T: Serialize>(value: &T) -> Response {
    json_body(numfmt::to_canonical_line(value, REPORT_DIGITS)).into_response()
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError {
        status: StatusCode::BAD_REQUEST,
        code: "bad_request".into(),
        message: e.to_string(),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObserveRequest {
    label: String,
    duration_s: f64,
}

#[derive(Deserialize)]
struct SuccessorsQuery {
    state: String,
}

type Shared = State<Arc<SessionService>>;

async fn create_session(State(svc): Shared, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateSessionRequest = parse_body(&body)?;
    let created = svc.create_session(request)?;
    let mut response = canonical(&created);
    *response.status_mut() = StatusCode::CREATED;
    Ok(response)
}

async fn observe(
    State(svc): Shared,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let request: ObserveRequest = parse_body(&body)?;
    Ok(canonical(&svc.observe_step(
        &id,
        &request.label,
        request.duration_s,
    )?))
}

async fn get_session(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(canonical(&svc.get_session(&id)?))
}

async fn get_graph(State(svc): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_body(svc.get_graph(&id)?).into_response())
}

async fn get_successors(
    State(svc): Shared,
    Path(id): Path<String>,
    Query(query): Query<SuccessorsQuery>,
) -> Result<Response, ApiError> {
    Ok(canonical(&svc.get_successors(&id, &query.state)?))
}

/// Builds the API router. When `console_dir` is given its files are served
/// under `/`.
pub fn router(service: Arc<SessionService>, console_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/sessions", post(create_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/observe", post(observe))
        .route("/api/graphs/{id}", get(get_graph))
        .route("/api/graphs/{id}/successors", get(get_successors))
        .with_state(service);
    match console_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves the router on `addr` until the process is stopped.
pub async fn serve(
    service: Arc<SessionService>,
    console_dir: Option<PathBuf>,
    addr: std::net::SocketAddr,
) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(service, console_dir)).await
}
