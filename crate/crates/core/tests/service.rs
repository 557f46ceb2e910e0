mod common;

use std::fs;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use semcube::ingest::{ingest, load_snapshot, open_index, IngestError, SNAPSHOT_FILE};
use semcube::service::{router, Engine};
use semcube::EngineConfig;
use serde_json::{json, Value};
use tower::ServiceExt;

/// Copies a bundled fixture into a temporary directory and loads its config.
fn staged(name: &str) -> (tempfile::TempDir, EngineConfig) {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&common::fixture_dir(name), dir.path());
    let config = EngineConfig::load(&dir.path().join("config.toml")).unwrap();
    (dir, config)
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for entry in fs::read_dir(from).unwrap() {
        let path = entry.unwrap().path();
        let target = to.join(path.file_name().unwrap());
        if path.is_dir() {
            copy_dir(&path, &target);
        } else {
            fs::copy(&path, &target).unwrap();
        }
    }
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn call_json(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, body).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

fn tof_app() -> (tempfile::TempDir, axum::Router, Arc<Engine>) {
    let (dir, config) = staged("tof");
    ingest(&config).unwrap();
    let engine = Arc::new(Engine::from_config(open_index(&config).unwrap(), &config));
    (dir, router(engine.clone()), engine)
}

#[test]
fn ingest_is_deterministic() {
    let (_dir, config) = staged("tof");
    let summary = ingest(&config).unwrap();
    assert_eq!(summary.documents, 30);
    assert_eq!(summary.dropped_cuis, 1);
    let first = fs::read(config.index.join(SNAPSHOT_FILE)).unwrap();
    ingest(&config).unwrap();
    assert_eq!(fs::read(config.index.join(SNAPSHOT_FILE)).unwrap(), first);
    let facts = fs::read_to_string(config.index.join("facts.jsonl")).unwrap();
    assert_eq!(facts.lines().count(), 30);
    let line: Value = serde_json::from_str(facts.lines().next().unwrap()).unwrap();
    assert!(line.get("doc_id").is_some() && line.get("assignments").is_some() && line.get("rank").is_some());
}

#[test]
fn directory_corpus_with_manifest() {
    let (_dir, config) = staged("epilepsy");
    ingest(&config).unwrap();
    let snapshot = load_snapshot(&config.index).unwrap();
    assert_eq!(snapshot.documents.len(), 12);
    let proteins = snapshot.documents.iter().filter(|d| d.object_type == "protein").count();
    assert_eq!(proteins, 6);
}

#[test]
fn malformed_document_aborts_ingest() {
    let (dir, config) = staged("tof");
    let mut corpus = fs::read_to_string(&config.corpus).unwrap();
    corpus.push_str(&json!({"doc_id": "pmid-bad", "object_type": "pubmed", "iexml": "<s><e id=\"nope\">x</e></s>"}).to_string());
    corpus.push('\n');
    fs::write(&config.corpus, corpus).unwrap();
    let err = ingest(&config).unwrap_err();
    assert!(err.to_string().contains("pmid-bad"), "{err}");
    assert!(!config.index.join(SNAPSHOT_FILE).exists());
    drop(dir);
}

#[test]
fn snapshot_version_is_checked() {
    let (_dir, config) = staged("tof");
    ingest(&config).unwrap();
    let path = config.index.join(SNAPSHOT_FILE);
    let mut v: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    v["format_version"] = json!(99);
    fs::write(&path, v.to_string()).unwrap();
    assert!(matches!(open_index(&config), Err(IngestError::VersionMismatch { found: 99, .. })));
}

#[test]
fn tampered_snapshot_is_rejected() {
    let (_dir, config) = staged("tof");
    ingest(&config).unwrap();
    let path = config.index.join(SNAPSHOT_FILE);
    let mut v: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let cats = v["dimensions"][0]["categories"].as_array_mut().unwrap();
    cats.swap(0, 1);
    fs::write(&path, v.to_string()).unwrap();
    assert!(matches!(open_index(&config), Err(IngestError::Inconsistent(_))));
}

#[test]
fn concurrent_ingest_is_refused() {
    let (_dir, config) = staged("tof");
    fs::create_dir_all(&config.index).unwrap();
    fs::write(config.index.join(".ingest.lock"), "").unwrap();
    assert!(matches!(ingest(&config), Err(IngestError::Locked(_))));
}

#[tokio::test]
async fn tree_lists_every_dimension_and_category() {
    let (_dir, app, engine) = tof_app();
    let (status, body) = call_json(&app, "GET", "/tree", None).await;
    assert_eq!(status, StatusCode::OK);
    let dims = body["dimensions"].as_array().unwrap();
    assert_eq!(dims.len(), engine.index().dimensions().len());
    for (d, dim) in dims.iter().zip(engine.index().dimensions()) {
        assert_eq!(d["id"], json!(dim.id));
        assert_eq!(d["categories"].as_array().unwrap().len(), dim.categories.len());
        assert!(d["categories"][0]["concepts"][0]["label"].is_string());
        assert_eq!(d["categories"][0]["index"], json!(0));
    }
}

#[tokio::test]
async fn map_lifecycle() {
    let (dir, app, engine) = tof_app();
    let snapshot_before = fs::read(dir.path().join("index").join(SNAPSHOT_FILE)).unwrap();
    let layers = json!([
        {"dimension": "Individual.Health_Procedures", "category": 1},
        {"dimension": "Individual.Finding", "category": 1}
    ]);
    let (status, created) = call(&app, "POST", "/maps", Some(json!({ "layers": layers }))).await;
    assert_eq!(status, StatusCode::CREATED);
    let map: Value = serde_json::from_slice(&created).unwrap();
    let id = map["map_id"].as_str().unwrap().to_string();
    assert_eq!(map["layers"].as_array().unwrap().len(), 2);
    assert_eq!(map["bridges"][0]["layer_pair"], json!([0, 1]));
    assert_eq!(map["measure"], json!("interest_factor"));

    // read-after-write, and export matches the GET body byte for byte
    let (status, got) = call(&app, "GET", &format!("/maps/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(got, created);
    assert_eq!(engine.export_map(&id).unwrap().into_bytes(), got);

    let (status, body) = call_json(&app, "POST", &format!("/maps/{id}/drill-down"), Some(json!({"concept": "HP0100"}))).await;
    assert_eq!(status, StatusCode::OK);
    let procs: Vec<&str> =
        body["layers"][0]["balls"].as_array().unwrap().iter().map(|b| b["concept"].as_str().unwrap()).collect();
    assert_eq!(procs, ["HP0110", "HP0120", "HP0130", "HP0140", "HP0200", "HP0300"]);
    assert_eq!(body["layers"][0]["balls"][0]["state"], json!("expanded-child"));
    let (_, exported) = call(&app, "GET", &format!("/maps/{id}"), None).await;
    assert_eq!(serde_json::from_slice::<Value>(&exported).unwrap(), body);

    let (status, body) = call_json(&app, "POST", &format!("/maps/{id}/drill-down"), Some(json!({"concept": "HP0130"}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"]["code"], json!("leaf"));
    assert_eq!(body["error"]["context"]["concept"], json!("HP0130"));

    let (status, body) = call_json(&app, "POST", &format!("/maps/{id}/roll-up"), Some(json!({"concept": "HP0130"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["layers"][0]["balls"][0]["concept"], json!("HP0100"));

    let (status, body) = call_json(&app, "POST", &format!("/maps/{id}/remove"), Some(json!({"concept": "HP0300"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["layers"][0]["balls"].as_array().unwrap().len(), 2);
    let (status, body) = call_json(&app, "GET", &format!("/maps/{id}/concepts/HP0300/objects"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], json!("unknown_ball"));

    let (status, body) = call_json(&app, "GET", &format!("/maps/{id}/concepts/HP0100/objects?type=pubmed&limit=3"), None).await;
    assert_eq!(status, StatusCode::OK);
    let items = body["items"].as_array().unwrap();
    assert_eq!(items.len(), 3);
    assert!(items[0]["link"].as_str().unwrap().starts_with("https://pubmed.ncbi.nlm.nih.gov/pmid-"));
    let (_, body) = call_json(&app, "GET", &format!("/maps/{id}/concepts/HP0100/objects?type=patient"), None).await;
    assert_eq!(body["items"], json!([]));

    assert_eq!(fs::read(dir.path().join("index").join(SNAPSHOT_FILE)).unwrap(), snapshot_before);
}

#[tokio::test]
async fn request_errors() {
    let (_dir, app, _) = tof_app();
    let (status, body) = call_json(&app, "GET", "/maps/map-404", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], json!("unknown_map"));
    assert_eq!(body["error"]["context"]["map_id"], json!("map-404"));

    let (status, body) = call_json(&app, "POST", "/maps", Some(json!({"layers": "nope"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], json!("bad_request"));

    let (status, body) = call_json(&app, "POST", "/maps", Some(json!({"layers": [{"dimension": "Nope", "category": 0}]}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], json!("unknown_dimension"));

    let (status, body) =
        call_json(&app, "POST", "/maps", Some(json!({"layers": [{"dimension": "Individual.Finding", "category": 9}]}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"]["code"], json!("unknown_category"));

    let (status, body) = call_json(&app, "POST", "/maps", Some(json!({"layers": [{"dimension": "Individual.Finding"}]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], json!("missing_source"));

    let (status, body) = call_json(&app, "GET", "/maps/map-1/bridges/objects", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["code"], json!("bad_request"));
}

#[tokio::test]
async fn idle_maps_expire() {
    let (_dir, config) = staged("tof");
    ingest(&config).unwrap();
    let engine = Arc::new(Engine::from_config(open_index(&config).unwrap(), &config).with_ttl(Duration::ZERO));
    let app = router(engine);
    let (status, body) =
        call_json(&app, "POST", "/maps", Some(json!({"layers": [{"dimension": "Individual.Finding", "category": 0}]}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let (status, _) = call_json(&app, "GET", &format!("/maps/{}", body["map_id"].as_str().unwrap()), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}
