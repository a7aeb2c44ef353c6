//! HTTP surface. Handlers hold no state of their own; everything goes
//! through the workspace's store and orchestrators.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use reelmind_core::orchestrator::WorkflowRecord;
use reelmind_core::store::{ArtifactKind, ArtifactRef};
use reelmind_core::validate::ValidationReport;
use reelmind_core::{Error, Result};

use crate::ops;
use crate::view::{as_report, error_json, WorkflowView};
use crate::workspace::{default_project_id, Workspace};

/// An [`Error`] rendered as a response.
#[derive(Debug)]
pub struct ApiError(pub Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

pub fn status_of(e: &Error) -> StatusCode {
    match e {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::Conflict(_) => StatusCode::CONFLICT,
        Error::Validation(_)
        | Error::Parse { .. }
        | Error::Precondition(_)
        | Error::EmptyMedia
        | Error::MediaProbe { .. }
        | Error::Definition(_)
        | Error::HashMismatch(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Provider(_) => StatusCode::BAD_GATEWAY,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = status_of(&self.0);
        if status == StatusCode::UNPROCESSABLE_ENTITY {
            (status, Json(as_report(&self.0))).into_response()
        } else {
            (status, Json(error_json(&self.0))).into_response()
        }
    }
}

type ApiResult<T> = std::result::Result<T, ApiError>;

pub fn router(ws: Arc<Workspace>) -> Router {
    Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{id}/index", post(index))
        .route("/projects/{id}/qa", post(qa))
        .route("/projects/{id}/edit", post(edit))
        .route("/projects/{id}/artifacts/{kind}", get(artifact))
        .route("/workflows/{id}", get(workflow))
        .with_state(ws)
}

/// Binds `addr` and serves until the process is stopped.
pub fn serve_blocking(ws: Arc<Workspace>, addr: SocketAddr) -> Result<()> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(ws)).await?;
        Ok(())
    })
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(Error::Store(format!("handler task failed: {e}"))))?
        .map_err(ApiError)
}

/// Parses a JSON body; an empty body means all defaults.
fn body<T: DeserializeOwned + Default>(bytes: &Bytes) -> ApiResult<T> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(bytes).map_err(|e| {
        let mut r = ValidationReport::default();
        r.push("body", e.to_string());
        ApiError(Error::Validation(r))
    })
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IngestBody {
    project_id: Option<String>,
    paths: Vec<PathBuf>,
}

async fn create_project(State(ws): State<Arc<Workspace>>, raw: Bytes) -> ApiResult<impl IntoResponse> {
    let b: IngestBody = body(&raw)?;
    let project = blocking(move || {
        let id = match b.project_id {
            Some(id) => id,
            None => default_project_id(&b.paths)?,
        };
        ws.ingest(&id, &b.paths)
    })
    .await?;
    Ok((StatusCode::CREATED, Json(project)))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct WaitQuery {
    /// Respond only once the workflow has finished.
    wait: bool,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct IndexBody {
    refine: bool,
}

impl Default for IndexBody {
    fn default() -> Self {
        Self { refine: true }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct QaBody {
    question: String,
}

#[derive(Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EditBody {
    prompt: String,
    variants: usize,
}

impl Default for EditBody {
    fn default() -> Self {
        Self {
            prompt: String::new(),
            variants: 1,
        }
    }
}

fn accepted(ids: &[String]) -> Response {
    let uris: Vec<String> = ids.iter().map(|id| format!("/workflows/{id}")).collect();
    let body = json!({
        "workflow_id": ids.first(),
        "workflow_ids": ids,
        "status_uri": uris.first(),
        "status_uris": uris,
    });
    (StatusCode::ACCEPTED, Json(body)).into_response()
}

async fn launched(ws: Arc<Workspace>, ids: Vec<String>, wait: bool) -> ApiResult<Response> {
    if !wait {
        return Ok(accepted(&ids));
    }
    let views = blocking(move || {
        let records: Vec<WorkflowRecord> = ops::wait_all(&ws, &ids)?;
        Ok(records.iter().map(|r| WorkflowView::new(ws.store(), r)).collect::<Vec<_>>())
    })
    .await?;
    Ok(match <[WorkflowView; 1]>::try_from(views) {
        Ok([one]) => Json(one).into_response(),
        Err(many) => Json(json!({ "workflows": many })).into_response(),
    })
}

async fn index(
    State(ws): State<Arc<Workspace>>,
    Path(project): Path<String>,
    Query(q): Query<WaitQuery>,
    raw: Bytes,
) -> ApiResult<Response> {
    let b: IndexBody = body(&raw)?;
    let w = ws.clone();
    let id = blocking(move || ops::launch(&w, &project, "comprehend", ops::index_params(b.refine))).await?;
    launched(ws, vec![id], q.wait).await
}

async fn qa(
    State(ws): State<Arc<Workspace>>,
    Path(project): Path<String>,
    Query(q): Query<WaitQuery>,
    raw: Bytes,
) -> ApiResult<Response> {
    let b: QaBody = body(&raw)?;
    let w = ws.clone();
    let id = blocking(move || ops::launch(&w, &project, "qa", ops::qa_params(&b.question))).await?;
    launched(ws, vec![id], q.wait).await
}

async fn edit(
    State(ws): State<Arc<Workspace>>,
    Path(project): Path<String>,
    Query(q): Query<WaitQuery>,
    raw: Bytes,
) -> ApiResult<Response> {
    let b: EditBody = body(&raw)?;
    if !(1..=16).contains(&b.variants) {
        let mut r = ValidationReport::default();
        r.push("variants", "variants must lie in [1, 16]");
        return Err(ApiError(Error::Validation(r)));
    }
    let w = ws.clone();
    let ids = blocking(move || ops::launch_edit(&w, &project, &b.prompt, b.variants)).await?;
    launched(ws, ids, q.wait).await
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct VersionQuery {
    hash: Option<String>,
}

fn content_type(uri: &str) -> &'static str {
    match uri.rsplit('.').next() {
        Some("json") => "application/json",
        Some("wav") => "audio/wav",
        Some("mp4") => "video/mp4",
        _ => "application/octet-stream",
    }
}

async fn artifact(
    State(ws): State<Arc<Workspace>>,
    Path((project, kind)): Path<(String, String)>,
    Query(v): Query<VersionQuery>,
    headers: HeaderMap,
) -> ApiResult<Response> {
    let (r, bytes): (ArtifactRef, Vec<u8>) = blocking(move || {
        let kind = ArtifactKind::new(&kind).map_err(|_| Error::NotFound(format!("artifact kind {kind:?}")))?;
        ws.project(&project)?;
        let r = match v.hash {
            None => ws.store().latest(&project, &kind)?,
            Some(h) => ws
                .store()
                .versions(&project, &kind)?
                .into_iter()
                .find(|r| r.hash == h)
                .ok_or_else(|| Error::NotFound(format!("{kind} version {h} in project {project}")))?,
        };
        let bytes = ws.store().get_artifact(&r)?;
        Ok((r, bytes))
    })
    .await?;
    let etag = format!("\"{}\"", r.hash);
    let etag_value = HeaderValue::from_str(&etag).map_err(|e| ApiError(Error::Store(e.to_string())))?;
    let matches = headers
        .get(header::IF_NONE_MATCH)
        .and_then(|h| h.to_str().ok())
        .is_some_and(|h| h.split(',').any(|t| t.trim() == etag || t.trim() == "*"));
    if matches {
        return Ok((StatusCode::NOT_MODIFIED, [(header::ETAG, etag_value)]).into_response());
    }
    Ok((
        StatusCode::OK,
        [
            (header::ETAG, etag_value),
            (header::CONTENT_TYPE, HeaderValue::from_static(content_type(&r.uri))),
        ],
        bytes,
    )
        .into_response())
}

async fn workflow(State(ws): State<Arc<Workspace>>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let view = blocking(move || {
        let record = ws.record(&id)?;
        Ok(WorkflowView::new(ws.store(), &record))
    })
    .await?;
    Ok(Json(serde_json::to_value(view).map_err(|e| ApiError(Error::Store(e.to_string())))?))
}
