mod common;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use tower::ServiceExt;

use reelmind::http::router;
use reelmind::{ProviderSource, Workspace};
use reelmind_core::gateway::{PromptKind, ScriptedProvider};
use reelmind_core::store::ArtifactKind;
use reelmind_core::testkit::Story;
use reelmind_core::time::Timestamp;

struct Resp {
    status: StatusCode,
    headers: axum::http::HeaderMap,
    bytes: Vec<u8>,
}

impl Resp {
    fn json(&self) -> Value {
        serde_json::from_slice(&self.bytes).unwrap()
    }
}

async fn send(app: &Router, req: Request<Body>) -> Resp {
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    let headers = res.headers().clone();
    let bytes = res.into_body().collect().await.unwrap().to_bytes().to_vec();
    Resp { status, headers, bytes }
}

fn post(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

async fn project(app: &Router, dir: &std::path::Path) {
    let media = common::fixture(dir);
    let r = send(app, post("/projects", json!({ "paths": [media] }))).await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", String::from_utf8_lossy(&r.bytes));
    assert_eq!(r.json()["project_id"], "demo");
}

async fn indexed() -> (tempfile::TempDir, Arc<Workspace>, Router) {
    let dir = tempfile::tempdir().unwrap();
    let ws = common::workspace(dir.path());
    let app = router(ws.clone());
    project(&app, dir.path()).await;
    let r = send(&app, post("/projects/demo/index?wait=true", json!({}))).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json()["status"], "completed");
    (dir, ws, app)
}

#[tokio::test(flavor = "multi_thread")]
async fn artifact_bytes_and_etag_match_the_store() {
    let (_dir, ws, app) = indexed().await;
    let r = send(&app, get("/projects/demo/artifacts/index")).await;
    assert_eq!(r.status, StatusCode::OK);
    let stored = ws.store().latest("demo", &ArtifactKind::index()).unwrap();
    assert_eq!(r.bytes, ws.store().get_artifact(&stored).unwrap());

    let digest = hex::encode(Sha256::digest(&r.bytes));
    let etag = r.headers[header::ETAG].to_str().unwrap().to_string();
    assert_eq!(etag, format!("\"{digest}\""));
    assert_eq!(r.headers[header::CONTENT_TYPE], "application/json");

    let again = Request::get("/projects/demo/artifacts/index")
        .header(header::IF_NONE_MATCH, &etag)
        .body(Body::empty())
        .unwrap();
    let r = send(&app, again).await;
    assert_eq!(r.status, StatusCode::NOT_MODIFIED);
    assert!(r.bytes.is_empty());

    let pinned = send(&app, get(&format!("/projects/demo/artifacts/index?hash={digest}"))).await;
    assert_eq!(pinned.status, StatusCode::OK);
    let missing = send(&app, get(&format!("/projects/demo/artifacts/index?hash={}", "0".repeat(64)))).await;
    assert_eq!(missing.status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn edit_reports_render_download() {
    let (_dir, _ws, app) = indexed().await;
    let r = send(&app, post("/projects/demo/edit?wait=true", json!({ "prompt": "a tense recap" }))).await;
    assert_eq!(r.status, StatusCode::OK);
    let v = r.json();
    assert_eq!(v["status"], "completed");
    assert_eq!(v["percent_complete"], 100);
    let uri = v["download_uri"].as_str().unwrap();
    let render = send(&app, get(uri)).await;
    assert_eq!(render.status, StatusCode::OK);
    assert!(!render.bytes.is_empty());

    let two = send(&app, post("/projects/demo/edit?wait=true", json!({ "prompt": "a tense recap", "variants": 2 }))).await;
    assert_eq!(two.status, StatusCode::OK);
    assert_eq!(two.json()["workflows"].as_array().unwrap().len(), 2);
}

#[tokio::test(flavor = "multi_thread")]
async fn invalid_requests_are_rejected() {
    let (_dir, _ws, app) = indexed().await;
    let empty = send(&app, post("/projects/demo/edit", json!({ "prompt": "  " }))).await;
    assert_eq!(empty.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(empty.json()["violations"][0]["path"], "params.prompt");

    let variants = send(&app, post("/projects/demo/edit", json!({ "prompt": "x", "variants": 17 }))).await;
    assert_eq!(variants.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(variants.json()["violations"][0]["path"], "variants");

    let malformed = Request::post("/projects/demo/qa").body(Body::from("{not json")).unwrap();
    let malformed = send(&app, malformed).await;
    assert_eq!(malformed.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(malformed.json()["violations"][0]["path"], "body");

    assert_eq!(send(&app, get("/workflows/wf0000000000000000")).await.status, StatusCode::NOT_FOUND);
    assert_eq!(send(&app, post("/projects/nope/qa", json!({ "question": "why?" }))).await.status, StatusCode::NOT_FOUND);
    assert_eq!(send(&app, get("/projects/demo/artifacts/plan")).await.status, StatusCode::NOT_FOUND);
    assert_eq!(send(&app, get("/projects/demo/artifacts/Bad%20Kind")).await.status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread")]
async fn qa_before_index_is_a_precondition_failure() {
    let dir = tempfile::tempdir().unwrap();
    let app = router(common::workspace(dir.path()));
    project(&app, dir.path()).await;
    let r = send(&app, post("/projects/demo/qa?wait=true", json!({ "question": "why?" }))).await;
    assert_eq!(r.status, StatusCode::UNPROCESSABLE_ENTITY);
    assert!(!r.json()["violations"].as_array().unwrap().is_empty());
}

async fn poll(app: &Router, uri: &str) -> Value {
    for _ in 0..2000 {
        let v = send(app, get(uri)).await.json();
        if v["status"] != "running" {
            return v;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("workflow at {uri} never finished");
}

#[tokio::test(flavor = "multi_thread")]
async fn duplicate_running_workflow_conflicts() {
    let dir = tempfile::tempdir().unwrap();
    let open = Arc::new(AtomicBool::new(true));
    let gate = open.clone();
    let story = Story::noir().responder(Timestamp::from_secs(common::SECS));
    let provider = ScriptedProvider::with_responder(Arc::new(move |req| {
        if req.kind == PromptKind::QaRoute {
            while !gate.load(Ordering::SeqCst) {
                std::thread::sleep(Duration::from_millis(2));
            }
        }
        story(req)
    }));
    let settings = common::settings(dir.path(), ProviderSource::Remote(Arc::new(provider)));
    let app = router(Arc::new(Workspace::open(settings).unwrap()));
    project(&app, dir.path()).await;
    let r = send(&app, post("/projects/demo/index?wait=true", json!({}))).await;
    assert_eq!(r.json()["status"], "completed");

    open.store(false, Ordering::SeqCst);
    let question = json!({ "question": "When did the protagonist express doubt?" });
    let first = send(&app, post("/projects/demo/qa", question.clone())).await;
    assert_eq!(first.status, StatusCode::ACCEPTED);
    let status_uri = first.json()["status_uri"].as_str().unwrap().to_string();
    assert_eq!(send(&app, get(&status_uri)).await.json()["status"], "running");

    let second = send(&app, post("/projects/demo/qa", question.clone())).await;
    assert_eq!(second.status, StatusCode::CONFLICT);
    let other = send(&app, post("/projects/demo/qa", json!({ "question": "Who is the detective?" }))).await;
    assert_eq!(other.status, StatusCode::ACCEPTED);

    open.store(true, Ordering::SeqCst);
    let done = poll(&app, &status_uri).await;
    assert_eq!(done["status"], "completed");
    assert!(!done["output"]["cited_timestamps"].as_array().unwrap().is_empty());
    assert_eq!(poll(&app, other.json()["status_uri"].as_str().unwrap()).await["status"], "completed");

    let again = send(&app, post("/projects/demo/qa", question)).await;
    assert_eq!(again.status, StatusCode::ACCEPTED);
}
