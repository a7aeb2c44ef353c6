//! Driving the CLI and the HTTP API through the same steps must leave the
//! same artifacts behind.

mod common;

use std::collections::BTreeMap;
use std::path::Path;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use reelmind_core::store::ArtifactStore;

const QUESTION: &str = "When did the protagonist express doubt?";
const PROMPT: &str = "Summarize the key points of this keynote";

/// Every stored version as (kind, hash), with workflow ids blanked out of
/// scratch kinds. Workflow records are excluded since they hold ids.
fn inventory(root: &Path) -> BTreeMap<String, Vec<String>> {
    let store = ArtifactStore::open_fs(root.join("store")).unwrap();
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for latest in store.list_kinds("demo").unwrap() {
        let kind = latest.kind.as_str().to_string();
        if kind.starts_with("workflow-") {
            continue;
        }
        let normalized = blank_workflow_ids(&kind);
        for v in store.versions("demo", &latest.kind).unwrap() {
            out.entry(normalized.clone()).or_default().push(v.hash);
        }
    }
    for hashes in out.values_mut() {
        hashes.sort();
    }
    out
}

fn blank_workflow_ids(kind: &str) -> String {
    kind.split('-')
        .map(|part| {
            let hex = part.strip_prefix("wf").filter(|h| h.len() == 16 && h.bytes().all(|b| b.is_ascii_hexdigit()));
            if hex.is_some() {
                "wf*"
            } else {
                part
            }
        })
        .collect::<Vec<_>>()
        .join("-")
}

fn via_cli(root: &Path) {
    let media = common::fixture(root);
    for args in [
        vec!["ingest", media.to_str().unwrap()],
        vec!["index", "demo"],
        vec!["ask", "demo", QUESTION],
        vec!["edit", "demo", PROMPT],
    ] {
        let out = common::cli(root, &args);
        assert_eq!(out.code, 0, "{args:?}: {}", out.stderr);
    }
}

async fn via_http(root: &Path) {
    let app = reelmind::http::router(common::workspace(root));
    let media = common::fixture(root);
    let steps = [
        ("/projects", json!({ "paths": [media] })),
        ("/projects/demo/index?wait=true", json!({ "refine": true })),
        ("/projects/demo/qa?wait=true", json!({ "question": QUESTION })),
        ("/projects/demo/edit?wait=true", json!({ "prompt": PROMPT })),
    ];
    for (uri, body) in steps {
        let req = Request::post(uri)
            .header(header::CONTENT_TYPE, "application/json")
            .body(Body::from(body.to_string()))
            .unwrap();
        let res = app.clone().oneshot(req).await.unwrap();
        let status = res.status();
        let bytes = res.into_body().collect().await.unwrap().to_bytes();
        assert!(status == StatusCode::OK || status == StatusCode::CREATED, "{uri}: {status}");
        let v: Value = serde_json::from_slice(&bytes).unwrap();
        if uri.contains("wait") {
            assert_eq!(v["status"], "completed", "{uri}");
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn cli_and_http_persist_identical_artifacts() {
    let cli_dir = tempfile::tempdir().unwrap();
    let http_dir = tempfile::tempdir().unwrap();
    let cli_root = cli_dir.path().to_path_buf();
    tokio::task::spawn_blocking(move || via_cli(&cli_root)).await.unwrap();
    via_http(http_dir.path()).await;

    let a = inventory(cli_dir.path());
    let b = inventory(http_dir.path());
    for kind in ["project", "index", "plan", "render"] {
        assert!(a.contains_key(kind), "missing {kind}: {:?}", a.keys());
    }
    assert_eq!(a, b);
}

#[test]
fn workflow_ids_are_blanked() {
    assert_eq!(blank_workflow_ids("activity-wf0123456789abcdef-plan"), "activity-wf*-plan");
    assert_eq!(blank_workflow_ids("activity-wfshort-plan"), "activity-wfshort-plan");
}
