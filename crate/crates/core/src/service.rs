//! HTTP service over a loaded corpus index.
//!
//! [`Engine`] holds the read-only index and the live maps; its methods are
//! plain functions returning response bodies or [`ApiError`]s, and
//! [`router`] wires them to routes.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::EngineConfig;
use crate::cube::{Aggregator, ContingencyMode, CorpusIndex, CubeError, Measure, Scorer};
use crate::map::{
    drill_through_bridge, drill_through_concept, keywords, ConceptMap, LayerRequest, MapError, MapSettings, RankedObject,
};

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub context: Value,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>, context: Value) -> Self {
        ApiError { status, code, message: message.into(), context }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message, Value::Null)
    }

    fn unknown_map(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_map", format!("no map `{id}`"), json!({ "map_id": id }))
    }

    pub fn body(&self) -> Value {
        json!({ "error": { "code": self.code, "message": self.message, "context": self.context } })
    }
}

impl From<MapError> for ApiError {
    fn from(e: MapError) -> Self {
        use StatusCode as S;
        let message = e.to_string();
        let (status, code, context) = match &e {
            MapError::UnknownLayer(i) => (S::NOT_FOUND, "unknown_layer", json!({ "layer": i })),
            MapError::UnknownBall(c) => (S::NOT_FOUND, "unknown_ball", json!({ "concept": c })),
            MapError::Leaf(c) => (S::CONFLICT, "leaf", json!({ "concept": c })),
            MapError::NothingToExpand(c) => (S::CONFLICT, "nothing_to_expand", json!({ "concept": c })),
            MapError::NotExpanded(c) => (S::CONFLICT, "not_expanded", json!({ "concept": c })),
            MapError::UnknownCategory { dimension, level } => {
                (S::NOT_FOUND, "unknown_category", json!({ "dimension": dimension, "category": level }))
            }
            MapError::EmptyQuery => (S::BAD_REQUEST, "empty_query", Value::Null),
            MapError::MissingSource => (S::BAD_REQUEST, "missing_source", Value::Null),
            MapError::MissingDimension => (S::BAD_REQUEST, "missing_dimension", Value::Null),
            MapError::Cube(CubeError::NoSuchDimension(d)) => (S::NOT_FOUND, "unknown_dimension", json!({ "dimension": d })),
            MapError::Cube(CubeError::NotInDimension { concept, dimension }) => {
                (S::NOT_FOUND, "unknown_concept", json!({ "concept": concept, "dimension": dimension }))
            }
            MapError::Cube(_) => (S::CONFLICT, "invalid_operation", Value::Null),
        };
        ApiError::new(status, code, message, context)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body())).into_response()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeConcept {
    pub id: String,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeCategory {
    pub index: usize,
    pub concepts: Vec<TreeConcept>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDimension {
    pub id: String,
    pub name: String,
    pub categories: Vec<TreeCategory>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub dimensions: Vec<TreeDimension>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CreateMap {
    pub layers: Vec<LayerRequest>,
    #[serde(default)]
    pub query: Option<String>,
    #[serde(default)]
    pub measure: Option<Measure>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub scorer: Option<Scorer>,
    #[serde(default)]
    pub aggregator: Option<Aggregator>,
    #[serde(default)]
    pub contingency: Option<ContingencyMode>,
}

/// Body of the map editing endpoints. `layer` disambiguates a concept shown
/// in several layers; by default the first layer showing it is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptRequest {
    pub concept: String,
    #[serde(default)]
    pub layer: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapOp {
    DrillDown,
    RollUp,
    KeepOnly,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectItem {
    pub doc_id: String,
    pub object_type: String,
    pub relevance: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub link: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objects {
    pub items: Vec<ObjectItem>,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct ObjectsQuery {
    #[serde(rename = "type")]
    pub object_type: Option<String>,
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BridgeObjectsQuery {
    pub from: String,
    pub to: String,
    pub limit: Option<usize>,
}

struct MapEntry {
    map: ConceptMap,
    touched: Instant,
}

/// Read-only index plus the server-side map store.
pub struct Engine {
    index: Arc<CorpusIndex>,
    defaults: MapSettings,
    links: BTreeMap<String, String>,
    ttl: Duration,
    maps: Mutex<HashMap<String, Arc<Mutex<MapEntry>>>>,
    next_id: AtomicU64,
}

impl Engine {
    pub fn new(index: CorpusIndex, defaults: MapSettings) -> Self {
        Engine {
            index: Arc::new(index),
            defaults,
            links: BTreeMap::new(),
            ttl: Duration::from_secs(30 * 60),
            maps: Mutex::new(HashMap::new()),
            next_id: AtomicU64::new(1),
        }
    }

    pub fn from_config(index: CorpusIndex, config: &EngineConfig) -> Self {
        let mut engine = Engine::new(index, config.map_settings());
        engine.links = config.links.clone();
        engine.ttl = config.map_ttl();
        engine
    }

    pub fn with_ttl(mut self, ttl: Duration) -> Self {
        self.ttl = ttl;
        self
    }

    pub fn with_links(mut self, links: BTreeMap<String, String>) -> Self {
        self.links = links;
        self
    }

    pub fn index(&self) -> &CorpusIndex {
        &self.index
    }

    pub fn tree(&self) -> Tree {
        let ontology = self.index.ontology();
        let label = |id: &str| ontology.concept(id).map_or_else(|_| id.to_string(), |c| c.preferred_label.clone());
        Tree {
            dimensions: self
                .index
                .dimensions()
                .iter()
                .map(|d| TreeDimension {
                    id: d.id.clone(),
                    name: d.name.clone(),
                    categories: d
                        .categories
                        .iter()
                        .map(|c| TreeCategory {
                            index: c.level,
                            concepts: c.concepts.iter().map(|id| TreeConcept { id: id.clone(), label: label(id) }).collect(),
                        })
                        .collect(),
                })
                .collect(),
        }
    }

    /// Builds a map with the request's settings, falling back to the engine defaults.
    pub fn build_map(&self, map_id: &str, req: &CreateMap) -> Result<ConceptMap, ApiError> {
        let d = &self.defaults;
        let settings = MapSettings {
            measure: req.measure.unwrap_or(d.measure),
            delta: req.delta.unwrap_or(d.delta),
            contingency: req.contingency.unwrap_or(d.contingency),
            scorer: req.scorer.unwrap_or(d.scorer),
            aggregator: req.aggregator.unwrap_or(d.aggregator),
            query: req.query.as_deref().map(keywords).filter(|k| !k.is_empty()),
        };
        if !settings.delta.is_finite() {
            return Err(ApiError::bad_request("delta must be finite"));
        }
        Ok(ConceptMap::build(&self.index, map_id, &req.layers, settings)?)
    }

    pub fn create_map(&self, req: &CreateMap) -> Result<ConceptMap, ApiError> {
        let id = format!("map-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let map = self.build_map(&id, req)?;
        let entry = MapEntry { map: map.clone(), touched: Instant::now() };
        let mut maps = self.maps.lock().expect("map store poisoned");
        self.expire(&mut maps);
        maps.insert(id, Arc::new(Mutex::new(entry)));
        Ok(map)
    }

    fn expire(&self, maps: &mut HashMap<String, Arc<Mutex<MapEntry>>>) {
        let now = Instant::now();
        maps.retain(|_, e| e.lock().is_ok_and(|e| now.duration_since(e.touched) < self.ttl));
    }

    fn entry(&self, id: &str) -> Result<Arc<Mutex<MapEntry>>, ApiError> {
        let mut maps = self.maps.lock().expect("map store poisoned");
        self.expire(&mut maps);
        maps.get(id).cloned().ok_or_else(|| ApiError::unknown_map(id))
    }

    fn with_map<T>(&self, id: &str, f: impl FnOnce(&mut ConceptMap) -> Result<T, ApiError>) -> Result<T, ApiError> {
        let entry = self.entry(id)?;
        let mut entry = entry.lock().expect("map poisoned");
        entry.touched = Instant::now();
        // edit a copy so a failed operation leaves the map untouched
        let mut map = entry.map.clone();
        let out = f(&mut map)?;
        entry.map = map;
        Ok(out)
    }

    pub fn get_map(&self, id: &str) -> Result<ConceptMap, ApiError> {
        self.with_map(id, |m| Ok(m.clone()))
    }

    /// Full JSON document of a map, identical to the `GET /maps/{id}` body.
    pub fn export_map(&self, id: &str) -> Result<String, ApiError> {
        let map = self.get_map(id)?;
        Ok(serde_json::to_string(&map).expect("maps serialize"))
    }

    pub fn edit_map(&self, id: &str, op: MapOp, req: &ConceptRequest) -> Result<ConceptMap, ApiError> {
        let index = &self.index;
        self.with_map(id, |map| {
            let layer = match req.layer {
                Some(l) => l,
                None => map.layer_of(&req.concept).ok_or_else(|| MapError::UnknownBall(req.concept.clone()))?,
            };
            match op {
                MapOp::DrillDown => map.drill_down(index, layer, &req.concept)?,
                MapOp::RollUp => map.roll_up(index, layer, &req.concept)?,
                MapOp::KeepOnly => map.keep_only(layer, &req.concept)?,
                MapOp::Remove => map.remove_concept(layer, &req.concept)?,
            }
            Ok(map.clone())
        })
    }

    fn objects(&self, ranked: Vec<RankedObject>, object_type: Option<&str>, limit: Option<usize>) -> Objects {
        let items = ranked
            .into_iter()
            .filter(|o| object_type.is_none_or(|t| o.object_type == t))
            .take(limit.unwrap_or(usize::MAX))
            .map(|o| {
                let link = self.links.get(&o.object_type).map(|t| t.replace("{doc_id}", &o.doc_id));
                ObjectItem { doc_id: o.doc_id, object_type: o.object_type, relevance: o.relevance, link }
            })
            .collect();
        Objects { items }
    }

    /// Documents behind a visible ball.
    pub fn concept_objects(&self, id: &str, concept: &str, q: &ObjectsQuery) -> Result<Objects, ApiError> {
        self.with_map(id, |map| {
            map.layer_of(concept).ok_or_else(|| MapError::UnknownBall(concept.to_string()))?;
            Ok(())
        })?;
        let ranked = drill_through_concept(&self.index, concept);
        Ok(self.objects(ranked, q.object_type.as_deref(), q.limit))
    }

    /// Documents behind a bridge between two visible balls.
    pub fn bridge_objects(&self, id: &str, q: &BridgeObjectsQuery) -> Result<Objects, ApiError> {
        self.with_map(id, |map| {
            for c in [&q.from, &q.to] {
                map.layer_of(c).ok_or_else(|| MapError::UnknownBall(c.clone()))?;
            }
            Ok(())
        })?;
        let ranked = drill_through_bridge(&self.index, &q.from, &q.to);
        Ok(self.objects(ranked, None, q.limit))
    }
}

type Shared = State<Arc<Engine>>;

fn json_text(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

async fn tree(State(e): Shared) -> Json<Tree> {
    Json(e.tree())
}

async fn create_map(State(e): Shared, body: axum::body::Bytes) -> Result<Response, ApiError> {
    let map = e.create_map(&parse_body(&body)?)?;
    Ok((StatusCode::CREATED, json_text(serde_json::to_string(&map).expect("maps serialize"))).into_response())
}

async fn get_map(State(e): Shared, Path(id): Path<String>) -> Result<Response, ApiError> {
    Ok(json_text(e.export_map(&id)?))
}

fn edit(e: &Engine, id: &str, op: MapOp, body: &[u8]) -> Result<Json<ConceptMap>, ApiError> {
    Ok(Json(e.edit_map(id, op, &parse_body(body)?)?))
}

async fn drill_down(State(e): Shared, Path(id): Path<String>, body: axum::body::Bytes) -> Result<Json<ConceptMap>, ApiError> {
    edit(&e, &id, MapOp::DrillDown, &body)
}

async fn roll_up(State(e): Shared, Path(id): Path<String>, body: axum::body::Bytes) -> Result<Json<ConceptMap>, ApiError> {
    edit(&e, &id, MapOp::RollUp, &body)
}

async fn keep_only(State(e): Shared, Path(id): Path<String>, body: axum::body::Bytes) -> Result<Json<ConceptMap>, ApiError> {
    edit(&e, &id, MapOp::KeepOnly, &body)
}

async fn remove(State(e): Shared, Path(id): Path<String>, body: axum::body::Bytes) -> Result<Json<ConceptMap>, ApiError> {
    edit(&e, &id, MapOp::Remove, &body)
}

async fn concept_objects(
    State(e): Shared,
    Path((id, concept)): Path<(String, String)>,
    query: Result<Query<ObjectsQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<Objects>, ApiError> {
    let Query(q) = query.map_err(|r| ApiError::bad_request(r.body_text()))?;
    Ok(Json(e.concept_objects(&id, &concept, &q)?))
}

async fn bridge_objects(
    State(e): Shared,
    Path(id): Path<String>,
    query: Result<Query<BridgeObjectsQuery>, axum::extract::rejection::QueryRejection>,
) -> Result<Json<Objects>, ApiError> {
    let Query(q) = query.map_err(|r| ApiError::bad_request(r.body_text()))?;
    Ok(Json(e.bridge_objects(&id, &q)?))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route", Value::Null)
}

pub fn router(engine: Arc<Engine>) -> Router {
    Router::new()
        .route("/tree", get(tree))
        .route("/maps", post(create_map))
        .route("/maps/{id}", get(get_map))
        .route("/maps/{id}/drill-down", post(drill_down))
        .route("/maps/{id}/roll-up", post(roll_up))
        .route("/maps/{id}/keep-only", post(keep_only))
        .route("/maps/{id}/remove", post(remove))
        .route("/maps/{id}/concepts/{cid}/objects", get(concept_objects))
        .route("/maps/{id}/bridges/objects", get(bridge_objects))
        .fallback(fallback)
        .with_state(engine)
}

/// Serves `engine` on `0.0.0.0:port` until interrupted.
pub async fn serve(engine: Arc<Engine>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
