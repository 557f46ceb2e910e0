//! Drives the HTTP API in process: browse the tree, create a map, edit it
//! and fetch the objects behind a bridge. `semcube serve` exposes the same
//! router on a TCP port.

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use semcube::{build_snapshot, load_corpus, load_taxonomy, router, Engine, EngineConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn send(app: &axum::Router, method: &str, uri: &str, body: Option<Value>) -> Value {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let value: Value = serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap();
    println!("{method} {uri} -> {status}");
    value
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = EngineConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/tof/config.toml"))?;
    let ontology = load_taxonomy(std::io::BufReader::new(std::fs::File::open(&config.taxonomy)?))?;
    let (snapshot, _) = build_snapshot(&ontology, &load_corpus(&config.corpus)?, &config.group_map, config.alpha)?;
    let app = router(Arc::new(Engine::from_config(snapshot.into_index()?, &config)));

    let tree = send(&app, "GET", "/tree", None).await;
    for d in tree["dimensions"].as_array().unwrap() {
        println!("  {} with {} categories", d["id"], d["categories"].as_array().unwrap().len());
    }

    let layers = json!([
        {"dimension": "Individual.Health_Procedures", "category": 2},
        {"dimension": "Individual.Finding", "category": 1}
    ]);
    let map = send(&app, "POST", "/maps", Some(json!({"layers": layers, "measure": "interest_factor", "delta": 1.0}))).await;
    let id = map["map_id"].as_str().unwrap().to_string();
    println!("{}", serde_json::to_string_pretty(&map["bridges"])?);

    let edited = send(&app, "POST", &format!("/maps/{id}/drill-down"), Some(json!({"concept": "HP0120"}))).await;
    let balls: Vec<&str> =
        edited["layers"][0]["balls"].as_array().unwrap().iter().map(|b| b["concept"].as_str().unwrap()).collect();
    println!("  procedures now {balls:?}");

    let err = send(&app, "POST", &format!("/maps/{id}/drill-down"), Some(json!({"concept": "HP0130"}))).await;
    println!("  {}", err["error"]);

    // HP0121 stays hidden: it also sits under the visible HP0140
    let objects = send(&app, "GET", &format!("/maps/{id}/bridges/objects?from=HP0122&to=FN0400&limit=3"), None).await;
    for o in objects["items"].as_array().into_iter().flatten() {
        println!("  {} {:.4} {}", o["doc_id"], o["relevance"], o["link"]);
    }
    Ok(())
}
