//! Semantic OLAP over annotated document collections.

pub mod config;
pub mod cube;
pub mod facts;
pub mod iexml;
pub mod ingest;
pub mod interval;
pub mod map;
pub mod schema;
pub mod service;
pub mod taxonomy;

pub use config::{ConfigError, EngineConfig};
pub use cube::{
    index_corpus, measure_score, Aggregator, Bridge, BridgeSpec, ContingencyCell, ContingencyMode, CorpusIndex, Cube, CubeError,
    DocumentMeta, Measure, Scorer,
};
pub use facts::{
    build_affinity, build_fact, normalize_laplacian, rank_concepts, AffinityMatrix, DocumentFact, FactBuilder, RankError,
    RankVector,
};
pub use iexml::{parse_iexml, sentence_cooccurrences, AnnotatedDocument, EntityMention, ParseError, Reading};
pub use ingest::{build_snapshot, ingest, load_corpus, load_snapshot, open_index, IndexSnapshot, IngestError, IngestSummary};
pub use interval::{Interval, IntervalList};
pub use map::{
    contains, define_layer, define_layer_by_query, drill_through_bridge, drill_through_concept, Ball, BallState, BridgeItem,
    ConceptMap, LayerBridges, LayerRequest, LayerSource, MapError, MapLayer, MapSettings, RankedObject,
};
pub use schema::{build_categories, build_dimensions, validate_schema, Category, Dimension, GroupMap, SchemaError, Violation};
pub use service::{router, ApiError, Engine};
pub use taxonomy::{load_taxonomy, match_lexicon, Concept, ConceptDescriptor, Ontology, TaxonomyError};
