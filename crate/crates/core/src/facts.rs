//! Per-document fact normalization.
//!
//! The distinct concepts of a document form an affinity graph (sentence
//! co-occurrence and taxonomic links), which is normalized as
//! `S = D^-1/2 · M · D^-1/2` and used to smooth the concept frequencies:
//!
//! ```text
//! R = (1 - α) · (I - αS)^-1 · Y
//! ```
//!
//! The fact of the document keeps, for every dimension, the annotated concept
//! of that dimension with the highest smoothed score.

use std::collections::{BTreeMap, BTreeSet};

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iexml::{sentence_cooccurrences, AnnotatedDocument};
use crate::schema::Dimension;
use crate::taxonomy::Ontology;

pub const DEFAULT_ALPHA: f64 = 0.9;

/// Residual above which the direct solve is rejected.
pub const SOLVE_TOLERANCE: f64 = 1e-8;

/// Iterations of the propagation fallback.
pub const FALLBACK_ITERATIONS: usize = 10_000;

/// Relative score gap below which two concepts are considered tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum RankError {
    #[error("alpha must lie in [0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("dimension mismatch: S is {rows}x{cols}, Y has {len} entries")]
    DimensionMismatch { rows: usize, cols: usize, len: usize },
    #[error("affinity row {0} sums to zero")]
    ZeroRowSum(usize),
    #[error("degenerate document: ranking did not converge")]
    Degenerate,
}

/// Concept affinity matrix of one document.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix {
    pub concepts: Vec<String>,
    pub values: DMatrix<f64>,
}

impl AffinityMatrix {
    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.concepts.iter().position(|c| c == a)?;
        let j = self.concepts.iter().position(|c| c == b)?;
        Some(self.values[(i, j)])
    }
}

/// Smoothed concept scores of one document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankVector(pub BTreeMap<String, f64>);

impl RankVector {
    pub fn get(&self, concept: &str) -> Option<f64> {
        self.0.get(concept).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.0.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentFact {
    pub doc_id: String,
    /// Dimension id → selected concept, `None` when the document has no
    /// concept of that dimension.
    pub assignments: BTreeMap<String, Option<String>>,
    pub rank: RankVector,
}

impl DocumentFact {
    pub fn assignment(&self, dimension: &str) -> Option<&str> {
        self.assignments.get(dimension).and_then(|c| c.as_deref())
    }
}

/// Builds the affinity matrix over the document concepts known to `ontology`.
///
/// Returns the matrix and the number of distinct unknown concepts dropped.
/// Each cell takes the largest value of the rules that apply:
/// 1 on the diagonal, 1 for concepts sharing a sentence, and for a concept
/// `a ⪯ b`, 0.5 at `(a, b)` and 1 at `(b, a)`.
pub fn build_affinity(doc: &AnnotatedDocument, ontology: &Ontology) -> (AffinityMatrix, usize) {
    let mut unknown = BTreeSet::new();
    let mut concepts = Vec::new();
    for cui in doc.frequencies.keys() {
        if ontology.contains(cui) {
            concepts.push(cui.clone());
        } else {
            unknown.insert(cui.as_str());
        }
    }
    if !unknown.is_empty() {
        warn!("document {}: dropping {} unknown concept(s)", doc.doc_id, unknown.len());
    }

    let n = concepts.len();
    let mut m = DMatrix::<f64>::identity(n, n);
    let pos: BTreeMap<&str, usize> = concepts.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    for (a, b) in sentence_cooccurrences(doc) {
        if let (Some(&i), Some(&j)) = (pos.get(a.as_str()), pos.get(b.as_str())) {
            m[(i, j)] = 1.0;
            m[(j, i)] = 1.0;
        }
    }
    let idx: Vec<usize> = concepts.iter().map(|c| ontology.index_of(c).expect("filtered")).collect();
    for i in 0..n {
        for j in 0..n {
            if i != j && ontology.is_descendant_at(idx[i], idx[j]) {
                m[(i, j)] = m[(i, j)].max(0.5);
                m[(j, i)] = 1.0;
            }
        }
    }
    (AffinityMatrix { concepts, values: m }, unknown.len())
}

/// `S = D^-1/2 · M · D^-1/2` with `D` the diagonal of row sums of `M`.
pub fn normalize_laplacian(m: &DMatrix<f64>) -> Result<DMatrix<f64>, RankError> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "affinity matrix must be square");
    let mut degree = Vec::with_capacity(n);
    for (i, row) in m.row_iter().enumerate() {
        let sum: f64 = row.iter().sum();
        if sum <= 0.0 {
            return Err(RankError::ZeroRowSum(i));
        }
        degree.push(sum);
    }
    Ok(DMatrix::from_fn(n, n, |i, j| m[(i, j)] / (degree[i] * degree[j]).sqrt()))
}

/// Outcome of [`rank_concepts`].
#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    pub scores: DVector<f64>,
    /// Set when the direct solve was rejected and the propagation fallback ran.
    pub fallback: bool,
}

/// Solves `R = (1 - α)(I - αS)^-1 Y` directly, falling back to iterating
/// `F ← αSF + (1 - α)Y` when the system is singular or the solve residual
/// exceeds [`SOLVE_TOLERANCE`].
pub fn rank_concepts(s: &DMatrix<f64>, y: &DVector<f64>, alpha: f64) -> Result<Ranking, RankError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(RankError::InvalidAlpha(alpha));
    }
    let n = y.len();
    if s.nrows() != n || s.ncols() != n {
        return Err(RankError::DimensionMismatch { rows: s.nrows(), cols: s.ncols(), len: n });
    }
    if n == 0 {
        return Ok(Ranking { scores: DVector::zeros(0), fallback: false });
    }

    let system = DMatrix::<f64>::identity(n, n) - s * alpha;
    if let Some(x) = system.clone().lu().solve(y) {
        let residual = (&system * &x - y).amax();
        if x.iter().all(|v| v.is_finite()) && residual <= SOLVE_TOLERANCE {
            return Ok(Ranking { scores: x * (1.0 - alpha), fallback: false });
        }
    }

    let base = y * (1.0 - alpha);
    let mut f = y.clone();
    for _ in 0..FALLBACK_ITERATIONS {
        f = s * &f * alpha + &base;
    }
    if f.iter().all(|v| v.is_finite()) {
        Ok(Ranking { scores: f, fallback: true })
    } else {
        Err(RankError::Degenerate)
    }
}

/// Ranking of one document together with ingestion diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentRank {
    pub rank: RankVector,
    pub fallback: bool,
    pub dropped: usize,
}

/// Full ranking pipeline for one document; frequencies are scaled to unit sum.
pub fn rank_document(doc: &AnnotatedDocument, ontology: &Ontology, alpha: f64) -> Result<DocumentRank, RankError> {
    let (affinity, dropped) = build_affinity(doc, ontology);
    let s = normalize_laplacian(&affinity.values)?;
    let mut y = DVector::from_iterator(affinity.len(), affinity.concepts.iter().map(|c| f64::from(doc.frequencies[c])));
    let total = y.sum();
    if total > 0.0 {
        y /= total;
    }
    let ranking = rank_concepts(&s, &y, alpha)?;
    let rank = RankVector(affinity.concepts.into_iter().zip(ranking.scores.iter().copied()).collect());
    Ok(DocumentRank { rank, fallback: ranking.fallback, dropped })
}

/// Selects the top-scored annotated concept of every dimension.
///
/// Scores within [`TIE_TOLERANCE`] (relative) are ties, resolved by the
/// smaller pre-order index in `ontology`.
pub fn build_fact(doc_id: &str, rank: RankVector, dimensions: &[Dimension], ontology: &Ontology) -> DocumentFact {
    let mut assignments = BTreeMap::new();
    for dim in dimensions {
        let mut best: Option<(&str, f64, u32)> = None;
        for (concept, score) in rank.iter().filter(|(c, _)| dim.contains(c)) {
            let pre = ontology.descriptor(concept).map_or(u32::MAX, |d| d.pre_index);
            let better = match best {
                None => true,
                Some((_, top, top_pre)) => {
                    let gap = TIE_TOLERANCE * top.abs().max(score.abs()).max(f64::MIN_POSITIVE);
                    if (score - top).abs() <= gap {
                        pre < top_pre
                    } else {
                        score > top
                    }
                }
            };
            if better {
                best = Some((concept, score, pre));
            }
        }
        assignments.insert(dim.id.clone(), best.map(|(c, _, _)| c.to_string()));
    }
    DocumentFact { doc_id: doc_id.to_string(), assignments, rank }
}

/// Ranking plus fact selection with fixed parameters.
#[derive(Debug, Clone, Copy)]
pub struct FactBuilder<'a> {
    pub ontology: &'a Ontology,
    pub dimensions: &'a [Dimension],
    pub alpha: f64,
}

/// A built fact with its ingestion diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct FactOutcome {
    pub fact: DocumentFact,
    pub fallback: bool,
    pub dropped: usize,
}

impl<'a> FactBuilder<'a> {
    pub fn new(ontology: &'a Ontology, dimensions: &'a [Dimension]) -> Self {
        FactBuilder { ontology, dimensions, alpha: DEFAULT_ALPHA }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn build(&self, doc: &AnnotatedDocument) -> Result<FactOutcome, RankError> {
        let ranked = rank_document(doc, self.ontology, self.alpha)?;
        Ok(FactOutcome {
            fact: build_fact(&doc.doc_id, ranked.rank, self.dimensions, self.ontology),
            fallback: ranked.fallback,
            dropped: ranked.dropped,
        })
    }
}
