//! Conceptual maps: layered concept balls joined by semantic bridges.
//!
//! A map is an ordered list of layers, each showing concepts of one
//! dimension sized by their relevance in the collection. Bridges only join
//! adjacent layers. Maps are edited in place by drill-down (replace a ball by
//! its children), roll-up (undo a drill-down), keep-only and remove.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cube::{sort_bridges, Aggregator, Bridge, BridgeSpec, ContingencyMode, CorpusIndex, CubeError, Measure, Scorer};
use crate::schema::Dimension;
use crate::taxonomy::match_lexicon;

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("map has no layer {0}")]
    UnknownLayer(usize),
    #[error("`{0}` is not a visible ball")]
    UnknownBall(String),
    #[error("`{0}` has no children to expand")]
    Leaf(String),
    #[error("every child of `{0}` is already covered by a visible ball")]
    NothingToExpand(String),
    #[error("`{0}` was not produced by a drill-down")]
    NotExpanded(String),
    #[error("dimension `{dimension}` has no category {level}")]
    UnknownCategory { dimension: String, level: usize },
    #[error("a query layer needs at least one keyword")]
    EmptyQuery,
    #[error("a layer needs a category or a query")]
    MissingSource,
    #[error("a layer defined by category needs a dimension")]
    MissingDimension,
    #[error(transparent)]
    Cube(#[from] CubeError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BallState {
    Normal,
    ExpandedChild,
    QueryMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub concept: String,
    pub label: String,
    pub relevance: f64,
    pub state: BallState,
    #[serde(skip)]
    expanded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSource {
    Category(usize),
    Query(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
struct Expansion {
    parent: Ball,
    position: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapLayer {
    pub dimension: String,
    pub source: LayerSource,
    pub balls: Vec<Ball>,
    #[serde(skip)]
    expansions: Vec<Expansion>,
}

impl MapLayer {
    pub fn position(&self, concept: &str) -> Option<usize> {
        self.balls.iter().position(|b| b.concept == concept)
    }

    pub fn concepts(&self) -> Vec<String> {
        self.balls.iter().map(|b| b.concept.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeItem {
    pub from: String,
    pub to: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerBridges {
    pub layer_pair: [usize; 2],
    pub items: Vec<BridgeItem>,
}

/// Scoring settings of a map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSettings {
    pub measure: Measure,
    pub delta: f64,
    pub contingency: ContingencyMode,
    pub scorer: Scorer,
    pub aggregator: Aggregator,
    /// Free-text query marking the balls that contain a match.
    pub query: Option<Vec<String>>,
}

impl Default for MapSettings {
    fn default() -> Self {
        MapSettings {
            measure: Measure::InterestFactor,
            delta: 1.0,
            contingency: ContingencyMode::Standard,
            scorer: Scorer::Hits,
            aggregator: Aggregator::Sum,
            query: None,
        }
    }
}

impl MapSettings {
    pub fn bridge_spec(&self) -> BridgeSpec {
        BridgeSpec { measure: self.measure, delta: self.delta, mode: self.contingency }
    }
}

/// How to build one layer. A query without a dimension yields one layer per
/// dimension with at least one match.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LayerRequest {
    #[serde(default)]
    pub dimension: Option<String>,
    #[serde(default)]
    pub category: Option<usize>,
    #[serde(default)]
    pub query: Option<String>,
}

impl LayerRequest {
    pub fn category(dimension: &str, level: usize) -> Self {
        LayerRequest { dimension: Some(dimension.into()), category: Some(level), query: None }
    }

    pub fn query(dimension: Option<&str>, query: &str) -> Self {
        LayerRequest { dimension: dimension.map(Into::into), category: None, query: Some(query.into()) }
    }
}

/// Splits free text into keywords.
pub fn keywords(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMap {
    pub map_id: String,
    pub layers: Vec<MapLayer>,
    pub bridges: Vec<LayerBridges>,
    #[serde(flatten)]
    pub settings: MapSettings,
}

fn ball(index: &CorpusIndex, dim: &Dimension, concept: &str, settings: &MapSettings) -> Result<Ball, MapError> {
    let relevance = index.concept_relevance(concept, &dim.id, settings.aggregator, settings.scorer)?;
    let label = index.ontology().concept(concept).map_or_else(|_| concept.to_string(), |c| c.preferred_label.clone());
    Ok(Ball { concept: concept.to_string(), label, relevance, state: BallState::Normal, expanded: false })
}

/// Layer showing every concept of a dimension category.
pub fn define_layer(index: &CorpusIndex, dimension: &str, level: usize, settings: &MapSettings) -> Result<MapLayer, MapError> {
    let dim = index.dimension(dimension)?;
    let category = dim.category(level).ok_or_else(|| MapError::UnknownCategory { dimension: dimension.to_string(), level })?;
    let balls = category.concepts.iter().map(|c| ball(index, dim, c, settings)).collect::<Result<_, _>>()?;
    Ok(MapLayer { dimension: dim.id.clone(), source: LayerSource::Category(level), balls, expansions: Vec::new() })
}

/// Layer showing the most specific concepts of a dimension matching `keywords`.
pub fn define_layer_by_query(
    index: &CorpusIndex,
    dimension: &str,
    keywords: &[String],
    settings: &MapSettings,
) -> Result<MapLayer, MapError> {
    if keywords.is_empty() {
        return Err(MapError::EmptyQuery);
    }
    let dim = index.dimension(dimension)?;
    let matching: Vec<&str> = dim.fragment.concepts().filter(|c| match_lexicon(c, keywords)).map(|c| c.id.as_str()).collect();
    let most_specific =
        matching.iter().filter(|&&c| !matching.iter().any(|&m| m != c && dim.fragment.is_descendant(m, c).unwrap_or(false)));
    let mut balls = Vec::new();
    for c in most_specific {
        let mut b = ball(index, dim, c, settings)?;
        b.state = BallState::QueryMatch;
        balls.push(b);
    }
    Ok(MapLayer { dimension: dim.id.clone(), source: LayerSource::Query(keywords.to_vec()), balls, expansions: Vec::new() })
}

/// Concepts of the dimension below (or equal to) `q` whose lexicon matches.
pub fn contains(index: &CorpusIndex, dimension: &str, q: &str, keywords: &[String]) -> Result<Vec<String>, MapError> {
    let dim = index.dimension(dimension)?;
    let below = dim
        .descendants_of(q)
        .map_err(|_| CubeError::NotInDimension { concept: q.to_string(), dimension: dimension.to_string() })?;
    Ok(below
        .into_iter()
        .filter(|c| dim.fragment.concept(c).is_ok_and(|c| match_lexicon(c, keywords)))
        .map(str::to_string)
        .collect())
}

fn pair_bridges(
    index: &CorpusIndex,
    upper: (&str, &[String]),
    lower: (&str, &[String]),
    spec: &BridgeSpec,
) -> Result<Vec<BridgeItem>, MapError> {
    if upper.0 == lower.0 || upper.1.is_empty() || lower.1.is_empty() {
        return Ok(Vec::new());
    }
    let cube = index.cube_for(upper.0, upper.1, lower.0, lower.1)?;
    Ok(cube.bridges(spec).into_iter().map(BridgeItem::from).collect())
}

impl From<Bridge> for BridgeItem {
    fn from(b: Bridge) -> Self {
        BridgeItem { from: b.from, to: b.to, score: b.score }
    }
}

fn sort_items(items: &mut Vec<BridgeItem>, measure: Measure) {
    let mut bridges: Vec<Bridge> = items.drain(..).map(|i| Bridge { from: i.from, to: i.to, measure, score: i.score }).collect();
    sort_bridges(&mut bridges);
    items.extend(bridges.into_iter().map(BridgeItem::from));
}

impl ConceptMap {
    /// Builds a map from layer requests, computing every bridge.
    pub fn build(index: &CorpusIndex, map_id: &str, requests: &[LayerRequest], settings: MapSettings) -> Result<Self, MapError> {
        let mut layers = Vec::new();
        for req in requests {
            match (&req.dimension, req.category, &req.query) {
                (Some(dim), Some(level), _) => layers.push(define_layer(index, dim, level, &settings)?),
                (dim, None, Some(q)) => {
                    let kw = keywords(q);
                    match dim {
                        Some(dim) => layers.push(define_layer_by_query(index, dim, &kw, &settings)?),
                        None => {
                            for d in index.dimensions() {
                                let layer = define_layer_by_query(index, &d.id, &kw, &settings)?;
                                if !layer.balls.is_empty() {
                                    layers.push(layer);
                                }
                            }
                        }
                    }
                }
                (None, Some(_), _) => return Err(MapError::MissingDimension),
                (_, None, None) => return Err(MapError::MissingSource),
            }
        }
        let mut map = ConceptMap { map_id: map_id.to_string(), layers, bridges: Vec::new(), settings };
        map.bridges = map.fresh_bridges(index)?;
        map.refresh_states(index);
        Ok(map)
    }

    /// Bridges recomputed from scratch for the current balls.
    pub fn fresh_bridges(&self, index: &CorpusIndex) -> Result<Vec<LayerBridges>, MapError> {
        let spec = self.settings.bridge_spec();
        (0..self.layers.len().saturating_sub(1))
            .map(|i| {
                let (a, b) = (&self.layers[i], &self.layers[i + 1]);
                let items = pair_bridges(index, (&a.dimension, &a.concepts()), (&b.dimension, &b.concepts()), &spec)?;
                Ok(LayerBridges { layer_pair: [i, i + 1], items })
            })
            .collect()
    }

    pub fn layer(&self, i: usize) -> Result<&MapLayer, MapError> {
        self.layers.get(i).ok_or(MapError::UnknownLayer(i))
    }

    /// First layer showing `concept`.
    pub fn layer_of(&self, concept: &str) -> Option<usize> {
        self.layers.iter().position(|l| l.position(concept).is_some())
    }

    fn locate(&self, layer: usize, concept: &str) -> Result<usize, MapError> {
        self.layer(layer)?.position(concept).ok_or_else(|| MapError::UnknownBall(concept.to_string()))
    }

    /// Replaces a ball by its direct children in the dimension.
    ///
    /// Children comparable to another visible ball (shown already, below a
    /// visible ball, or above one through another path) are not added, nor
    /// are children below a sibling, so a layer never holds a concept next to
    /// its ancestor.
    pub fn drill_down(&mut self, index: &CorpusIndex, layer: usize, concept: &str) -> Result<(), MapError> {
        let pos = self.locate(layer, concept)?;
        let dim = index.dimension(&self.layers[layer].dimension)?;
        let children = dim.children_of(concept).map_err(|_| MapError::UnknownBall(concept.to_string()))?;
        if children.is_empty() {
            return Err(MapError::Leaf(concept.to_string()));
        }
        let others: Vec<&str> =
            self.layers[layer].balls.iter().filter(|b| b.concept != concept).map(|b| b.concept.as_str()).collect();
        let below = |a: &str, b: &str| dim.fragment.is_descendant(a, b).unwrap_or(false);
        let fresh: Vec<&str> = children
            .iter()
            .copied()
            .filter(|c| !children.iter().any(|s| s != c && below(c, s)))
            .filter(|c| !others.iter().any(|o| below(c, o) || below(o, c)))
            .collect();
        if fresh.is_empty() {
            return Err(MapError::NothingToExpand(concept.to_string()));
        }
        let mut new_balls = Vec::with_capacity(fresh.len());
        for c in &fresh {
            let mut b = ball(index, dim, c, &self.settings)?;
            b.expanded = true;
            new_balls.push(b);
        }
        let added: Vec<String> = new_balls.iter().map(|b| b.concept.clone()).collect();

        let l = &mut self.layers[layer];
        let parent = l.balls.splice(pos..=pos, new_balls).next().expect("ball at pos");
        l.expansions.push(Expansion { parent, position: pos });

        self.prune_bridges();
        self.add_bridges(index, layer, &added)?;
        self.refresh_states(index);
        Ok(())
    }

    /// Undoes the latest drill-down that produced or expanded `concept`.
    pub fn roll_up(&mut self, index: &CorpusIndex, layer: usize, concept: &str) -> Result<(), MapError> {
        let dim = index.dimension(&self.layer(layer)?.dimension)?;
        let below = |a: &str, b: &str| dim.fragment.is_descendant(a, b).unwrap_or(false);
        let l = &self.layers[layer];
        let k = l
            .expansions
            .iter()
            .rposition(|e| e.parent.concept == concept || below(concept, &e.parent.concept) && l.position(concept).is_some())
            .ok_or_else(|| MapError::NotExpanded(concept.to_string()))?;

        let l = &mut self.layers[layer];
        let entry = l.expansions[k].clone();
        let parent_id = entry.parent.concept.clone();
        l.balls.retain(|b| !below(&b.concept, &parent_id));
        l.expansions.retain(|e| !below(&e.parent.concept, &parent_id));
        let covered = l.balls.iter().any(|b| below(&parent_id, &b.concept));
        if !covered {
            let at = entry.position.min(l.balls.len());
            l.balls.insert(at, entry.parent);
        }

        self.prune_bridges();
        if !covered {
            self.add_bridges(index, layer, &[parent_id])?;
        }
        self.refresh_states(index);
        Ok(())
    }

    /// Keeps only `concept` in its layer; adjacent layers keep only the balls
    /// bridged to it.
    pub fn keep_only(&mut self, layer: usize, concept: &str) -> Result<(), MapError> {
        self.locate(layer, concept)?;
        if self.layers[layer].balls.len() == 1 {
            return Ok(());
        }
        let linked = |pair: usize, upper: bool| -> HashSet<String> {
            self.bridges[pair]
                .items
                .iter()
                .filter_map(|b| match upper {
                    true if b.to == concept => Some(b.from.clone()),
                    false if b.from == concept => Some(b.to.clone()),
                    _ => None,
                })
                .collect()
        };
        let above = (layer > 0).then(|| linked(layer - 1, true));
        let below = (layer + 1 < self.layers.len()).then(|| linked(layer, false));

        self.layers[layer].balls.retain(|b| b.concept == concept);
        if let Some(keep) = above {
            self.layers[layer - 1].balls.retain(|b| keep.contains(&b.concept));
        }
        if let Some(keep) = below {
            self.layers[layer + 1].balls.retain(|b| keep.contains(&b.concept));
        }
        self.prune_bridges();
        Ok(())
    }

    pub fn remove_concept(&mut self, layer: usize, concept: &str) -> Result<(), MapError> {
        let pos = self.locate(layer, concept)?;
        self.layers[layer].balls.remove(pos);
        self.prune_bridges();
        Ok(())
    }

    fn prune_bridges(&mut self) {
        for lb in &mut self.bridges {
            let [a, b] = lb.layer_pair;
            let upper: HashSet<&str> = self.layers[a].balls.iter().map(|b| b.concept.as_str()).collect();
            let lower: HashSet<&str> = self.layers[b].balls.iter().map(|b| b.concept.as_str()).collect();
            lb.items.retain(|i| upper.contains(i.from.as_str()) && lower.contains(i.to.as_str()));
        }
    }

    fn add_bridges(&mut self, index: &CorpusIndex, layer: usize, added: &[String]) -> Result<(), MapError> {
        let spec = self.settings.bridge_spec();
        let dim = self.layers[layer].dimension.clone();
        if layer > 0 {
            let up = &self.layers[layer - 1];
            let items = pair_bridges(index, (&up.dimension, &up.concepts()), (&dim, added), &spec)?;
            let lb = &mut self.bridges[layer - 1];
            lb.items.extend(items);
            sort_items(&mut lb.items, spec.measure);
        }
        if layer + 1 < self.layers.len() {
            let down = &self.layers[layer + 1];
            let items = pair_bridges(index, (&dim, added), (&down.dimension, &down.concepts()), &spec)?;
            let lb = &mut self.bridges[layer];
            lb.items.extend(items);
            sort_items(&mut lb.items, spec.measure);
        }
        Ok(())
    }

    /// Recomputes ball states from the map query and expansion flags.
    pub fn refresh_states(&mut self, index: &CorpusIndex) {
        let query = self.settings.query.clone().filter(|q| !q.is_empty());
        for layer in &mut self.layers {
            let layer_query = match &layer.source {
                LayerSource::Query(kw) => Some(kw.clone()),
                LayerSource::Category(_) => None,
            };
            for b in &mut layer.balls {
                let hit = |kw: &Vec<String>| contains(index, &layer.dimension, &b.concept, kw).is_ok_and(|v| !v.is_empty());
                b.state = if query.as_ref().is_some_and(hit) || layer_query.as_ref().is_some_and(hit) {
                    BallState::QueryMatch
                } else if b.expanded {
                    BallState::ExpandedChild
                } else {
                    BallState::Normal
                };
            }
        }
    }

    /// Sets or clears the free-text query and re-marks the balls.
    pub fn set_query(&mut self, index: &CorpusIndex, query: Option<&str>) {
        self.settings.query = query.map(keywords).filter(|k| !k.is_empty());
        self.refresh_states(index);
    }
}

/// A document returned by drill-through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedObject {
    pub doc_id: String,
    pub object_type: String,
    pub relevance: f64,
}

fn rank_objects(index: &CorpusIndex, scored: Vec<(usize, f64)>) -> Vec<RankedObject> {
    let mut out: Vec<RankedObject> = scored
        .into_iter()
        .map(|(d, relevance)| {
            let meta = &index.documents()[d];
            RankedObject { doc_id: meta.doc_id.clone(), object_type: meta.object_type.clone(), relevance }
        })
        .collect();
    out.sort_by(|a, b| b.relevance.total_cmp(&a.relevance).then_with(|| a.doc_id.cmp(&b.doc_id)));
    out
}

/// Documents whose fact falls under `concept`, ranked by their summed
/// smoothed scores over the annotated concepts `⪯ concept`.
pub fn drill_through_concept(index: &CorpusIndex, concept: &str) -> Vec<RankedObject> {
    let Some(dim) = index.dimension_of(concept) else { return Vec::new() };
    let scored =
        index.postings(concept, &dim.id).iter().map(|&d| (d as usize, index.document_relevance(d as usize, concept))).collect();
    rank_objects(index, scored)
}

/// Documents relevant to both ends of a bridge, ranked by the product of
/// their relevance to each end.
pub fn drill_through_bridge(index: &CorpusIndex, from: &str, to: &str) -> Vec<RankedObject> {
    let (Some(da), Some(db)) = (index.dimension_of(from), index.dimension_of(to)) else { return Vec::new() };
    let b: HashSet<u32> = index.postings(to, &db.id).iter().copied().collect();
    let scored = index
        .postings(from, &da.id)
        .iter()
        .filter(|d| b.contains(d))
        .map(|&d| {
            let d = d as usize;
            (d, index.document_relevance(d, from) * index.document_relevance(d, to))
        })
        .filter(|&(_, r)| r > 0.0)
        .collect();
    rank_objects(index, scored)
}
