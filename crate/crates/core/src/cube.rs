//! Corpus index, concept relevance, contingency cubes and semantic bridges.
//!
//! Postings are descendant-closed: a document is listed under every
//! ancestor (within the dimension) of the concept its fact assigns. All
//! counts below are read off those postings:
//!
//! ```text
//! n_i  = |{d : fact(d)[D_i] ⪯ c_i}|
//! n_j  = |{d : fact(d)[D_j] ⪯ c_j}|
//! n_ij = |{d : fact(d)[D_i] ⪯ c_i ∧ fact(d)[D_j] ⪯ c_j}|
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::facts::DocumentFact;
use crate::schema::{Category, Dimension};
use crate::taxonomy::Ontology;

#[derive(Debug, Error, PartialEq)]
pub enum CubeError {
    #[error("fact `{doc_id}` references unknown dimension `{dimension}`")]
    UnknownDimension { doc_id: String, dimension: String },
    #[error("fact `{doc_id}` assigns `{concept}` which is not a member of dimension `{dimension}`")]
    ForeignConcept { doc_id: String, dimension: String, concept: String },
    #[error("no dimension named `{0}`")]
    NoSuchDimension(String),
    #[error("`{concept}` is not a member of dimension `{dimension}`")]
    NotInDimension { concept: String, dimension: String },
    #[error("a cube needs two distinct dimensions, got `{0}` twice")]
    SameDimension(String),
    #[error("zero marginal for ({c_i}, {c_j})")]
    ZeroMarginal { c_i: String, c_j: String },
}

/// Aggregation applied over the descendants of a concept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregator {
    #[default]
    Sum,
    Avg,
    Max,
}

/// Per-concept score evaluated against the collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scorer {
    /// Number of documents whose fact assigns the concept.
    #[default]
    Hits,
    /// Sum of the documents' smoothed scores for the concept they are assigned.
    ScoreSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    InterestFactor,
    LogLikelihoodRatio,
    MutualInformation,
    F1,
}

impl Measure {
    pub fn name(self) -> &'static str {
        match self {
            Measure::InterestFactor => "interest_factor",
            Measure::LogLikelihoodRatio => "log_likelihood_ratio",
            Measure::MutualInformation => "mutual_information",
            Measure::F1 => "f1",
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "interest_factor" => Ok(Measure::InterestFactor),
            "log_likelihood_ratio" => Ok(Measure::LogLikelihoodRatio),
            "mutual_information" => Ok(Measure::MutualInformation),
            "f1" => Ok(Measure::F1),
            other => Err(format!("unknown measure `{other}`")),
        }
    }
}

/// How the bottom-right cell of the 2×2 table is completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum ContingencyMode {
    /// `N - n_i - n_j + n_ij`
    #[default]
    #[serde(rename = "standard")]
    Standard,
    /// `N - n_i - n_j`, saturating at zero.
    #[serde(rename = "truncated", alias = "paper-literal")]
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ContingencyCell<'a> {
    pub c_i: &'a str,
    pub c_j: &'a str,
    pub n_ij: usize,
    pub n_i: usize,
    pub n_j: usize,
}

impl ContingencyCell<'_> {
    /// The 2×2 table `[[n_ij, n_j - n_ij], [n_i - n_ij, rest]]`.
    pub fn table(&self, n_col: usize, mode: ContingencyMode) -> [[usize; 2]; 2] {
        let rest = match mode {
            ContingencyMode::Standard => (n_col + self.n_ij).saturating_sub(self.n_i + self.n_j),
            ContingencyMode::Truncated => n_col.saturating_sub(self.n_i + self.n_j),
        };
        [[self.n_ij, self.n_j.saturating_sub(self.n_ij)], [self.n_i.saturating_sub(self.n_ij), rest]]
    }
}

/// Scores a cell with the requested interestingness measure.
pub fn measure_score(
    cell: &ContingencyCell<'_>,
    n_col: usize,
    measure: Measure,
    mode: ContingencyMode,
) -> Result<f64, CubeError> {
    if cell.n_i == 0 || cell.n_j == 0 {
        return Err(CubeError::ZeroMarginal { c_i: cell.c_i.to_string(), c_j: cell.c_j.to_string() });
    }
    let (n_ij, n_i, n_j, n) = (cell.n_ij as f64, cell.n_i as f64, cell.n_j as f64, n_col as f64);
    Ok(match measure {
        Measure::InterestFactor => n_ij * n / (n_i * n_j),
        Measure::F1 => 2.0 * n_ij / (n_i + n_j),
        Measure::MutualInformation => {
            if cell.n_ij == 0 {
                f64::NEG_INFINITY
            } else {
                (n_ij * n / (n_i * n_j)).log2()
            }
        }
        Measure::LogLikelihoodRatio => g_squared(cell.table(n_col, mode)),
    })
}

/// `G² = 2 Σ O ln(O / E)` with expectations from the table's own margins.
fn g_squared(table: [[usize; 2]; 2]) -> f64 {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    let total = (rows[0] + rows[1]) as f64;
    if total == 0.0 {
        return 0.0;
    }
    let mut g = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            let o = table[r][c] as f64;
            if o > 0.0 {
                let e = rows[r] as f64 * cols[c] as f64 / total;
                g += o * (o / e).ln();
            }
        }
    }
    (2.0 * g).max(0.0)
}

/// Scoring parameters for bridges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeSpec {
    pub measure: Measure,
    pub delta: f64,
    #[serde(default)]
    pub mode: ContingencyMode,
}

impl Default for BridgeSpec {
    fn default() -> Self {
        BridgeSpec { measure: Measure::InterestFactor, delta: 1.0, mode: ContingencyMode::Standard }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bridge {
    pub from: String,
    pub to: String,
    pub measure: Measure,
    pub score: f64,
}

/// Sorts bridges by descending score, then by endpoint ids.
pub fn sort_bridges(bridges: &mut [Bridge]) {
    bridges.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.from.cmp(&b.from)).then_with(|| a.to.cmp(&b.to)));
}

/// Contingency counts for every pair of two concept lists.
#[derive(Debug, Clone, PartialEq)]
pub struct Cube {
    pub dimension_i: String,
    pub dimension_j: String,
    pub n_col: usize,
    /// `(c_i, n_i)` in request order.
    pub rows: Vec<(String, usize)>,
    /// `(c_j, n_j)` in request order.
    pub cols: Vec<(String, usize)>,
    /// `(row, col, n_ij)` for every pair with `n_ij > 0`.
    pub nonzero: Vec<(usize, usize, usize)>,
}

impl Cube {
    pub fn cells(&self) -> impl Iterator<Item = ContingencyCell<'_>> {
        self.nonzero.iter().map(|&(r, c, n_ij)| ContingencyCell {
            c_i: &self.rows[r].0,
            c_j: &self.cols[c].0,
            n_ij,
            n_i: self.rows[r].1,
            n_j: self.cols[c].1,
        })
    }

    /// Any pair, including the ones with `n_ij = 0` that are not stored.
    pub fn cell(&self, c_i: &str, c_j: &str) -> Option<ContingencyCell<'_>> {
        let r = self.rows.iter().position(|(c, _)| c == c_i)?;
        let c = self.cols.iter().position(|(x, _)| x == c_j)?;
        let n_ij = self.nonzero.iter().find(|&&(a, b, _)| a == r && b == c).map_or(0, |x| x.2);
        Some(ContingencyCell { c_i: &self.rows[r].0, c_j: &self.cols[c].0, n_ij, n_i: self.rows[r].1, n_j: self.cols[c].1 })
    }

    /// Stored cells scoring strictly above `spec.delta`, best first.
    pub fn bridges(&self, spec: &BridgeSpec) -> Vec<Bridge> {
        let mut out: Vec<Bridge> = self
            .cells()
            .filter_map(|cell| {
                let score = measure_score(&cell, self.n_col, spec.measure, spec.mode).ok()?;
                (score > spec.delta).then(|| Bridge {
                    from: cell.c_i.to_string(),
                    to: cell.c_j.to_string(),
                    measure: spec.measure,
                    score,
                })
            })
            .collect();
        sort_bridges(&mut out);
        out
    }

    /// Tab-separated `c_i c_j n_ij n_i n_j score` rows of the stored cells.
    pub fn to_tsv(&self, measure: Measure, mode: ContingencyMode) -> String {
        let mut out = String::from("c_i\tc_j\tn_ij\tn_i\tn_j\tscore\n");
        for cell in self.cells() {
            let score = measure_score(&cell, self.n_col, measure, mode).unwrap_or(f64::NAN);
            let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", cell.c_i, cell.c_j, cell.n_ij, cell.n_i, cell.n_j, score);
        }
        out
    }
}

/// One document of the indexed collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentMeta {
    pub doc_id: String,
    pub object_type: String,
}

type CubeKey = (String, usize, String, usize);

/// Immutable collection index over document facts.
#[derive(Debug)]
pub struct CorpusIndex {
    ontology: Ontology,
    dimensions: Vec<Dimension>,
    facts: Vec<DocumentFact>,
    documents: Vec<DocumentMeta>,
    // per dimension: concept -> ascending doc positions with fact ⪯ concept
    postings: Vec<HashMap<String, Vec<u32>>>,
    // per dimension: concept -> doc positions whose fact is exactly the concept
    assigned: Vec<HashMap<String, Vec<u32>>>,
    concept_dimension: HashMap<String, usize>,
    cube_cache: RwLock<HashMap<CubeKey, Arc<Cube>>>,
}

/// Indexes `facts`; every document gets the object type `"document"`.
pub fn index_corpus(facts: Vec<DocumentFact>, ontology: Ontology, dimensions: Vec<Dimension>) -> Result<CorpusIndex, CubeError> {
    let metas = facts.iter().map(|f| DocumentMeta { doc_id: f.doc_id.clone(), object_type: "document".into() }).collect();
    CorpusIndex::new(facts, metas, ontology, dimensions)
}

impl CorpusIndex {
    pub fn new(
        facts: Vec<DocumentFact>,
        documents: Vec<DocumentMeta>,
        ontology: Ontology,
        dimensions: Vec<Dimension>,
    ) -> Result<Self, CubeError> {
        assert_eq!(facts.len(), documents.len(), "one meta record per fact");
        let dim_pos: HashMap<&str, usize> = dimensions.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
        let mut postings: Vec<HashMap<String, Vec<u32>>> = vec![HashMap::new(); dimensions.len()];
        let mut assigned: Vec<HashMap<String, Vec<u32>>> = vec![HashMap::new(); dimensions.len()];

        for (d, fact) in facts.iter().enumerate() {
            for (dim_id, concept) in &fact.assignments {
                let &k = dim_pos
                    .get(dim_id.as_str())
                    .ok_or_else(|| CubeError::UnknownDimension { doc_id: fact.doc_id.clone(), dimension: dim_id.clone() })?;
                let Some(concept) = concept else { continue };
                let dim = &dimensions[k];
                let ancestors = dim.fragment.ancestors_of(concept).map_err(|_| CubeError::ForeignConcept {
                    doc_id: fact.doc_id.clone(),
                    dimension: dim_id.clone(),
                    concept: concept.clone(),
                })?;
                for a in ancestors {
                    postings[k].entry(a.to_string()).or_default().push(d as u32);
                }
                assigned[k].entry(concept.clone()).or_default().push(d as u32);
            }
        }

        let concept_dimension =
            dimensions.iter().enumerate().flat_map(|(k, d)| d.members.iter().map(move |m| (m.clone(), k))).collect();
        Ok(CorpusIndex {
            ontology,
            dimensions,
            facts,
            documents,
            postings,
            assigned,
            concept_dimension,
            cube_cache: RwLock::new(HashMap::new()),
        })
    }

    pub fn n_col(&self) -> usize {
        self.facts.len()
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn dimensions(&self) -> &[Dimension] {
        &self.dimensions
    }

    pub fn dimension(&self, id: &str) -> Result<&Dimension, CubeError> {
        self.dimensions.iter().find(|d| d.id == id).ok_or_else(|| CubeError::NoSuchDimension(id.to_string()))
    }

    /// The dimension a concept belongs to, if any.
    pub fn dimension_of(&self, concept: &str) -> Option<&Dimension> {
        self.concept_dimension.get(concept).map(|&k| &self.dimensions[k])
    }

    pub fn facts(&self) -> &[DocumentFact] {
        &self.facts
    }

    pub fn documents(&self) -> &[DocumentMeta] {
        &self.documents
    }

    fn dim_pos(&self, id: &str) -> Result<usize, CubeError> {
        self.dimensions.iter().position(|d| d.id == id).ok_or_else(|| CubeError::NoSuchDimension(id.to_string()))
    }

    /// Positions of the documents whose fact in `dimension` is `⪯ concept`.
    pub fn postings(&self, concept: &str, dimension: &str) -> &[u32] {
        self.dim_pos(dimension).ok().and_then(|k| self.postings[k].get(concept)).map_or(&[], Vec::as_slice)
    }

    /// Number of documents whose fact in `dimension` is `⪯ concept`.
    pub fn hits(&self, concept: &str, dimension: &str) -> usize {
        self.postings(concept, dimension).len()
    }

    /// Number of documents whose fact in `dimension` is exactly `concept`.
    pub fn exact_hits(&self, concept: &str, dimension: &str) -> usize {
        self.assigned_docs(concept, dimension).len()
    }

    fn assigned_docs(&self, concept: &str, dimension: &str) -> &[u32] {
        self.dim_pos(dimension).ok().and_then(|k| self.assigned[k].get(concept)).map_or(&[], Vec::as_slice)
    }

    /// Smoothed score mass of the documents assigned exactly `concept`.
    pub fn exact_score(&self, concept: &str, dimension: &str) -> f64 {
        self.assigned_docs(concept, dimension).iter().map(|&d| self.facts[d as usize].rank.get(concept).unwrap_or(0.0)).sum()
    }

    /// Smoothed score mass of the documents whose fact is `⪯ concept`, each
    /// contributing its score for the concept it is assigned.
    pub fn score_sum(&self, concept: &str, dimension: &str) -> f64 {
        let Ok(k) = self.dim_pos(dimension) else { return 0.0 };
        let dim = &self.dimensions[k];
        self.postings(concept, dimension)
            .iter()
            .map(|&d| {
                let fact = &self.facts[d as usize];
                fact.assignment(&dim.id).and_then(|c| fact.rank.get(c)).unwrap_or(0.0)
            })
            .sum()
    }

    /// Aggregates `scorer` over every descendant of `concept` in `dimension`.
    pub fn concept_relevance(
        &self,
        concept: &str,
        dimension: &str,
        aggregator: Aggregator,
        scorer: Scorer,
    ) -> Result<f64, CubeError> {
        let dim = self.dimension(dimension)?;
        let descendants = dim
            .descendants_of(concept)
            .map_err(|_| CubeError::NotInDimension { concept: concept.to_string(), dimension: dimension.to_string() })?;
        let values = descendants.iter().map(|c| match scorer {
            Scorer::Hits => self.exact_hits(c, dimension) as f64,
            Scorer::ScoreSum => self.exact_score(c, dimension),
        });
        Ok(match aggregator {
            Aggregator::Sum => values.sum(),
            Aggregator::Max => values.fold(0.0, f64::max),
            Aggregator::Avg => {
                let n = descendants.len() as f64;
                values.sum::<f64>() / n
            }
        })
    }

    /// Contingency counts between two concept lists of distinct dimensions.
    pub fn cube_for(
        &self,
        dimension_i: &str,
        concepts_i: &[String],
        dimension_j: &str,
        concepts_j: &[String],
    ) -> Result<Cube, CubeError> {
        if dimension_i == dimension_j {
            return Err(CubeError::SameDimension(dimension_i.to_string()));
        }
        self.dim_pos(dimension_i)?;
        self.dim_pos(dimension_j)?;
        let rows: Vec<(String, usize)> = concepts_i.iter().map(|c| (c.clone(), self.hits(c, dimension_i))).collect();
        let cols: Vec<(String, usize)> = concepts_j.iter().map(|c| (c.clone(), self.hits(c, dimension_j))).collect();
        let mut nonzero = Vec::new();
        for (r, (ci, ni)) in rows.iter().enumerate() {
            if *ni == 0 {
                continue;
            }
            let a = self.postings(ci, dimension_i);
            for (c, (cj, nj)) in cols.iter().enumerate() {
                if *nj == 0 {
                    continue;
                }
                let n_ij = intersection_len(a, self.postings(cj, dimension_j));
                if n_ij > 0 {
                    nonzero.push((r, c, n_ij));
                }
            }
        }
        Ok(Cube {
            dimension_i: dimension_i.to_string(),
            dimension_j: dimension_j.to_string(),
            n_col: self.n_col(),
            rows,
            cols,
            nonzero,
        })
    }

    /// Cube between two categories, computed once and cached.
    pub fn build_cube(&self, l_i: &Category, l_j: &Category) -> Result<Arc<Cube>, CubeError> {
        let key = (l_i.dimension_id.clone(), l_i.level, l_j.dimension_id.clone(), l_j.level);
        if let Some(c) = self.cube_cache.read().expect("cube cache poisoned").get(&key) {
            return Ok(Arc::clone(c));
        }
        let cube = Arc::new(self.cube_for(&l_i.dimension_id, &l_i.concepts, &l_j.dimension_id, &l_j.concepts)?);
        self.cube_cache.write().expect("cube cache poisoned").entry(key).or_insert_with(|| Arc::clone(&cube));
        Ok(cube)
    }

    /// Bridges between two categories.
    pub fn bridges(&self, l_i: &Category, l_j: &Category, spec: &BridgeSpec) -> Result<Vec<Bridge>, CubeError> {
        Ok(self.build_cube(l_i, l_j)?.bridges(spec))
    }

    /// Drill-through relevance of a document for a concept: the sum of its
    /// smoothed scores over the annotated concepts `⪯ concept`.
    pub fn document_relevance(&self, doc: usize, concept: &str) -> f64 {
        let Ok(target) = self.ontology.index_of(concept) else { return 0.0 };
        self.facts[doc]
            .rank
            .iter()
            .filter(|(c, _)| self.ontology.index_of(c).is_ok_and(|i| self.ontology.is_descendant_at(i, target)))
            .map(|(_, r)| r)
            .sum()
    }

    /// Per-dimension assignment counts; handy for summaries.
    pub fn assignment_counts(&self) -> BTreeMap<String, usize> {
        self.dimensions.iter().enumerate().map(|(k, d)| (d.id.clone(), self.assigned[k].values().map(Vec::len).sum())).collect()
    }
}

fn intersection_len(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
