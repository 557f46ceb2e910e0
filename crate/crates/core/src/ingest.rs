//! Corpus ingestion and index snapshots.
//!
//! A corpus is either a JSON-lines file of `{"doc_id", "object_type", "iexml"}`
//! records, or a directory of IeXML files (doc id = file stem) with an
//! optional `manifest.json` mapping doc ids to object types.
//!
//! Ingestion writes `snapshot.json` and `facts.jsonl` into the index
//! directory. Files are written to a temporary name and renamed, so a failed
//! run never leaves a partial index behind.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::cube::{CorpusIndex, CubeError, DocumentMeta};
use crate::facts::{DocumentFact, FactBuilder, RankError};
use crate::iexml::{parse_iexml, AnnotatedDocument, ParseError};
use crate::schema::{build_dimensions, validate_schema, Category, GroupMap, SchemaError};
use crate::taxonomy::{load_taxonomy, Concept, ConceptDescriptor, Ontology, TaxonomyError};

pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_FILE: &str = "snapshot.json";
pub const FACTS_FILE: &str = "facts.jsonl";
const LOCK_FILE: &str = ".ingest.lock";
const MANIFEST_FILE: &str = "manifest.json";
const DEFAULT_OBJECT_TYPE: &str = "document";

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("taxonomy {path}: {source}")]
    Taxonomy { path: PathBuf, source: TaxonomyError },
    #[error("corpus {path} line {line}: {message}")]
    CorpusRecord { path: PathBuf, line: usize, message: String },
    #[error("corpus manifest {path}: {source}")]
    Manifest { path: PathBuf, source: serde_json::Error },
    #[error("duplicate document id `{0}`")]
    DuplicateDocument(String),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("document `{doc_id}`: {source}")]
    Rank { doc_id: String, source: RankError },
    #[error(transparent)]
    Cube(#[from] CubeError),
    #[error("index directory {0} is locked by another ingest")]
    Locked(PathBuf),
    #[error("snapshot {path}: {source}")]
    Snapshot { path: PathBuf, source: serde_json::Error },
    #[error("snapshot format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("inconsistent snapshot: {0}")]
    Inconsistent(String),
}

type Result<T, E = IngestError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CorpusRecord {
    doc_id: String,
    #[serde(default)]
    object_type: Option<String>,
    iexml: String,
}

/// Loads and parses every document of a corpus file or directory.
pub fn load_corpus(path: &Path) -> Result<Vec<AnnotatedDocument>> {
    let docs = if path.is_dir() { load_corpus_dir(path)? } else { load_corpus_jsonl(path)? };
    let mut seen = BTreeSet::new();
    for d in &docs {
        if !seen.insert(d.doc_id.as_str()) {
            return Err(IngestError::DuplicateDocument(d.doc_id.clone()));
        }
    }
    Ok(docs)
}

fn load_corpus_jsonl(path: &Path) -> Result<Vec<AnnotatedDocument>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CorpusRecord = serde_json::from_str(&line).map_err(|e| IngestError::CorpusRecord {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        let object_type = rec.object_type.as_deref().unwrap_or(DEFAULT_OBJECT_TYPE);
        docs.push(parse_iexml(&rec.doc_id, object_type, &rec.iexml)?);
    }
    Ok(docs)
}

fn load_corpus_dir(dir: &Path) -> Result<Vec<AnnotatedDocument>> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: BTreeMap<String, String> = match fs::read_to_string(&manifest_path) {
        Ok(text) => serde_json::from_str(&text).map_err(|source| IngestError::Manifest { path: manifest_path, source })?,
        Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
        Err(e) => return Err(io_err(&manifest_path)(e)),
    };
    let mut files: Vec<PathBuf> =
        fs::read_dir(dir).map_err(io_err(dir))?.map(|e| e.map(|e| e.path()).map_err(io_err(dir))).collect::<Result<_>>()?;
    files.retain(|p| p.is_file() && p.extension().is_some_and(|e| e == "xml" || e == "iexml"));
    files.sort();

    let mut docs = Vec::with_capacity(files.len());
    for path in files {
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let doc_id = path.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let object_type = manifest.get(&doc_id).map_or(DEFAULT_OBJECT_TYPE, String::as_str);
        docs.push(parse_iexml(&doc_id, object_type, &text)?);
    }
    Ok(docs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRecord {
    pub id: String,
    pub groups: Vec<String>,
    pub members: Vec<String>,
    pub categories: Vec<Category>,
}

/// Everything needed to serve a collection without re-reading the inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSnapshot {
    pub format_version: u32,
    pub alpha: f64,
    pub group_map: GroupMap,
    pub concepts: Vec<Concept>,
    pub descriptors: Vec<ConceptDescriptor>,
    /// Annotated concepts known to the taxonomy, sorted.
    pub signature: Vec<String>,
    pub dimensions: Vec<DimensionRecord>,
    pub documents: Vec<DocumentMeta>,
    pub facts: Vec<DocumentFact>,
    /// Documents whose ranking needed the iterative fallback.
    pub flagged: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub documents: usize,
    pub concepts: usize,
    pub signature: usize,
    /// Distinct unknown concept ids dropped, summed over documents.
    pub dropped_cuis: usize,
    pub flagged: Vec<String>,
    /// Dimension id → number of member concepts.
    pub dimensions: BTreeMap<String, usize>,
}

fn read_taxonomy(path: &Path) -> Result<Ontology> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    load_taxonomy(BufReader::new(file)).map_err(|source| IngestError::Taxonomy { path: path.to_path_buf(), source })
}

/// Runs the whole pipeline in memory.
pub fn build_snapshot(
    ontology: &Ontology,
    docs: &[AnnotatedDocument],
    group_map: &GroupMap,
    alpha: f64,
) -> Result<(IndexSnapshot, IngestSummary)> {
    let signature: BTreeSet<&str> =
        docs.iter().flat_map(|d| d.frequencies.keys()).map(String::as_str).filter(|c| ontology.contains(c)).collect();
    let dimensions = build_dimensions(ontology, signature.iter().copied(), group_map)?;
    let builder = FactBuilder::new(ontology, &dimensions).with_alpha(alpha);

    let mut facts = Vec::with_capacity(docs.len());
    let mut flagged = Vec::new();
    let mut dropped = 0;
    for doc in docs {
        let out = builder.build(doc).map_err(|source| IngestError::Rank { doc_id: doc.doc_id.clone(), source })?;
        if out.fallback {
            flagged.push(doc.doc_id.clone());
        }
        dropped += out.dropped;
        facts.push(out.fact);
    }

    let summary = IngestSummary {
        documents: docs.len(),
        concepts: ontology.len(),
        signature: signature.len(),
        dropped_cuis: dropped,
        flagged: flagged.clone(),
        dimensions: dimensions.iter().map(|d| (d.id.clone(), d.members.len())).collect(),
    };
    let snapshot = IndexSnapshot {
        format_version: SNAPSHOT_VERSION,
        alpha,
        group_map: group_map.clone(),
        concepts: ontology.concepts().cloned().collect(),
        descriptors: ontology.descriptors().to_vec(),
        signature: signature.iter().map(|s| s.to_string()).collect(),
        dimensions: dimensions
            .iter()
            .map(|d| DimensionRecord {
                id: d.id.clone(),
                groups: d.groups.clone(),
                members: d.members.iter().cloned().collect(),
                categories: d.categories.clone(),
            })
            .collect(),
        documents: docs.iter().map(|d| DocumentMeta { doc_id: d.doc_id.clone(), object_type: d.object_type.clone() }).collect(),
        facts,
        flagged,
    };
    Ok((snapshot, summary))
}

struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(LockGuard(path)),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(IngestError::Locked(dir.to_path_buf())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn snapshot_err(path: &Path) -> impl FnOnce(serde_json::Error) -> IngestError + '_ {
    move |source| IngestError::Snapshot { path: path.to_path_buf(), source }
}

/// Ingests the configured corpus and persists the snapshot.
pub fn ingest(config: &EngineConfig) -> Result<IngestSummary> {
    let ontology = read_taxonomy(&config.taxonomy)?;
    let docs = load_corpus(&config.corpus)?;
    info!("loaded {} concepts and {} documents", ontology.len(), docs.len());
    let (snapshot, summary) = build_snapshot(&ontology, &docs, &config.group_map, config.alpha)?;
    // catch anything that would make the snapshot unloadable before writing it
    snapshot.clone().into_index()?;

    let dir = &config.index;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let _lock = LockGuard::acquire(dir)?;
    let snapshot_path = dir.join(SNAPSHOT_FILE);
    let facts_path = dir.join(FACTS_FILE);
    let mut facts = Vec::new();
    for f in &snapshot.facts {
        serde_json::to_writer(&mut facts, f).map_err(snapshot_err(&facts_path))?;
        facts.push(b'\n');
    }
    let body = serde_json::to_vec_pretty(&snapshot).map_err(snapshot_err(&snapshot_path))?;
    write_atomic(&facts_path, &facts)?;
    write_atomic(&snapshot_path, &body)?;
    Ok(summary)
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Reads `snapshot.json` from an index directory, checking its version first.
pub fn load_snapshot(index_dir: &Path) -> Result<IndexSnapshot> {
    let path = index_dir.join(SNAPSHOT_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let probe: VersionProbe = serde_json::from_str(&text).map_err(snapshot_err(&path))?;
    if probe.format_version != SNAPSHOT_VERSION {
        return Err(IngestError::VersionMismatch { found: probe.format_version, expected: SNAPSHOT_VERSION });
    }
    serde_json::from_str(&text).map_err(snapshot_err(&path))
}

/// Loads the configured index ready for querying.
pub fn open_index(config: &EngineConfig) -> Result<CorpusIndex> {
    load_snapshot(&config.index)?.into_index()
}

impl IndexSnapshot {
    /// Rebuilds the corpus index, checking that the stored schema matches a
    /// fresh build and passes every schema constraint.
    pub fn into_index(self) -> Result<CorpusIndex> {
        let inconsistent = |m: String| IngestError::Inconsistent(m);
        let ontology = Ontology::from_concepts(self.concepts).map_err(|e| inconsistent(e.to_string()))?;
        if ontology.descriptors() != self.descriptors.as_slice() {
            return Err(inconsistent("stored descriptors differ from the taxonomy".into()));
        }
        let dimensions = build_dimensions(&ontology, self.signature.iter().map(String::as_str), &self.group_map)?;
        let rebuilt: Vec<_> = dimensions.iter().map(|d| (d.id.as_str(), d.groups.as_slice(), d.categories.as_slice())).collect();
        let stored: Vec<_> =
            self.dimensions.iter().map(|d| (d.id.as_str(), d.groups.as_slice(), d.categories.as_slice())).collect();
        if rebuilt != stored {
            return Err(inconsistent("stored dimensions differ from a rebuild".into()));
        }
        let violations = validate_schema(&dimensions);
        if let Some(v) = violations.first() {
            return Err(inconsistent(v.to_string()));
        }
        if self.facts.len() != self.documents.len() {
            return Err(inconsistent(format!("{} facts for {} documents", self.facts.len(), self.documents.len())));
        }
        for f in &self.facts {
            if let Some((c, _)) = f.rank.iter().find(|(c, _)| !ontology.contains(c)) {
                return Err(inconsistent(format!("fact `{}` ranks unknown concept `{c}`", f.doc_id)));
            }
        }
        Ok(CorpusIndex::new(self.facts, self.documents, ontology, dimensions)?)
    }
}
