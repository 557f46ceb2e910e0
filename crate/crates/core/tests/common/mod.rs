//! Shared generators and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use semcube::facts::{DocumentFact, RankVector};
use semcube::iexml::parse_iexml;
use semcube::ingest::build_snapshot;
use semcube::schema::{build_dimensions, GroupMap};
use semcube::{
    build_affinity, load_corpus, load_taxonomy, normalize_laplacian, rank_concepts, AnnotatedDocument, Concept, CorpusIndex,
    EngineConfig, Ontology,
};

pub mod walk;

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn concept(id: &str, parents: &[String], group: &str) -> Concept {
    Concept {
        id: id.to_string(),
        preferred_label: format!("concept {id}"),
        lex: vec![],
        semtypes: vec![],
        parents: parents.to_vec(),
        group: group.to_string(),
    }
}

/// Random DAG on `n` nodes. Edges only go from a later node to an earlier
/// one, so it is acyclic; records come out shuffled.
pub fn random_dag(rng: &mut StdRng, n: usize, max_parents: usize) -> Vec<Concept> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut parents = BTreeSet::new();
        if i > 0 && rng.random_bool(0.85) {
            let k = rng.random_range(1..=max_parents);
            for _ in 0..k {
                parents.insert(format!("n{:03}", rng.random_range(0..i)));
            }
        }
        let parents: Vec<String> = parents.into_iter().collect();
        out.push(concept(&format!("n{i:03}"), &parents, "G"));
    }
    out.shuffle(rng);
    out
}

/// Reachability computed by depth-first search over parent links.
pub struct Reach {
    parents: HashMap<String, Vec<String>>,
}

impl Reach {
    pub fn new(concepts: &[Concept]) -> Self {
        Reach { parents: concepts.iter().map(|c| (c.id.clone(), c.parents.clone())).collect() }
    }

    /// `id` and everything above it.
    pub fn ancestors(&self, id: &str) -> BTreeSet<String> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![id.to_string()];
        while let Some(c) = stack.pop() {
            if seen.insert(c.clone()) {
                stack.extend(self.parents[&c].iter().cloned());
            }
        }
        seen
    }

    /// `id` and everything below it.
    pub fn descendants(&self, id: &str) -> BTreeSet<String> {
        self.parents.keys().filter(|c| self.ancestors(c).contains(id)).cloned().collect()
    }

    pub fn is_below(&self, a: &str, b: &str) -> bool {
        self.ancestors(a).contains(b)
    }
}

pub fn fixture_dir(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Runs the ingest pipeline on a bundled fixture without touching disk.
pub fn fixture_index(name: &str) -> (EngineConfig, CorpusIndex) {
    let config = EngineConfig::load(&fixture_dir(name).join("config.toml")).unwrap();
    let ontology = load_taxonomy(std::io::BufReader::new(std::fs::File::open(&config.taxonomy).unwrap())).unwrap();
    let docs = load_corpus(&config.corpus).unwrap();
    let (snapshot, _) = build_snapshot(&ontology, &docs, &config.group_map, config.alpha).unwrap();
    (config.clone(), snapshot.into_index().unwrap())
}

/// A random two-dimension collection with random facts.
pub struct Synthetic {
    pub concepts: Vec<Concept>,
    pub facts: Vec<DocumentFact>,
    pub index: CorpusIndex,
}

/// Two forests (groups `GX`, `GY`) of `per_dim` concepts each and `docs`
/// documents with a random concept per dimension (or none, rarely).
pub fn synthetic_collection(rng: &mut StdRng, per_dim: usize, docs: usize) -> Synthetic {
    let mut concepts = Vec::new();
    for (prefix, group) in [("x", "GX"), ("y", "GY")] {
        for i in 0..per_dim {
            let mut parents = BTreeSet::new();
            if i > 0 && rng.random_bool(0.8) {
                for _ in 0..rng.random_range(1..=2) {
                    parents.insert(format!("{prefix}{:02}", rng.random_range(0..i)));
                }
            }
            let parents: Vec<String> = parents.into_iter().collect();
            concepts.push(concept(&format!("{prefix}{i:02}"), &parents, group));
        }
    }
    let ontology = Ontology::from_concepts(concepts.clone()).unwrap();
    let gm: GroupMap = [("GX", "X"), ("GY", "Y")].iter().map(|(g, d)| (g.to_string(), d.to_string())).collect();
    let all: Vec<&str> = concepts.iter().map(|c| c.id.as_str()).collect();
    let dimensions = build_dimensions(&ontology, all.iter().copied(), &gm).unwrap();

    let mut facts = Vec::with_capacity(docs);
    for d in 0..docs {
        let mut assignments = BTreeMap::new();
        let mut rank = BTreeMap::new();
        for (prefix, dim) in [("x", "X"), ("y", "Y")] {
            let pick = rng.random_bool(0.95).then(|| format!("{prefix}{:02}", rng.random_range(0..per_dim)));
            if let Some(c) = &pick {
                rank.insert(c.clone(), rng.random_range(0.05..1.0));
                // an extra annotated concept that lost the argmax
                let other = format!("{prefix}{:02}", rng.random_range(0..per_dim));
                rank.entry(other).or_insert_with(|| rng.random_range(0.0..0.05));
            }
            assignments.insert(dim.to_string(), pick);
        }
        facts.push(DocumentFact { doc_id: format!("doc{d:03}"), assignments, rank: RankVector(rank) });
    }
    let index = semcube::index_corpus(facts.clone(), ontology, dimensions).unwrap();
    Synthetic { concepts, facts, index }
}

/// Counts of one cube cell by looping over every document.
pub fn brute_cell(s: &Synthetic, reach: &Reach, c_i: &str, c_j: &str) -> (usize, usize, usize) {
    let (mut n_ij, mut n_i, mut n_j) = (0, 0, 0);
    for f in &s.facts {
        let a = f.assignment("X").is_some_and(|x| reach.is_below(x, c_i));
        let b = f.assignment("Y").is_some_and(|y| reach.is_below(y, c_j));
        n_i += a as usize;
        n_j += b as usize;
        n_ij += (a && b) as usize;
    }
    (n_ij, n_i, n_j)
}

/// `F ← αSF + (1 - α)Y`, `iterations` times, starting from `Y`.
pub fn propagate(s: &[Vec<f64>], y: &[f64], alpha: f64, iterations: usize) -> Vec<f64> {
    let n = y.len();
    let mut f = y.to_vec();
    for _ in 0..iterations {
        let mut next = vec![0.0; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += s[i][j] * f[j];
            }
            next[i] = alpha * acc + (1.0 - alpha) * y[i];
        }
        f = next;
    }
    f
}

/// A document over `concepts` with up to `max` distinct known concepts plus
/// an occasional unknown one, spread over a few sentences.
pub fn random_document(r: &mut StdRng, concepts: &[Concept], max: usize) -> AnnotatedDocument {
    let sentences = r.random_range(1..=4);
    let picks = r.random_range(1..=max.min(concepts.len()));
    let mut text = String::new();
    for s in 0..sentences {
        text.push_str("<s>");
        for _ in 0..=picks / sentences {
            let id = if r.random_bool(0.03) { "UNKNOWN".to_string() } else { concepts[r.random_range(0..picks)].id.clone() };
            text.push_str(&format!("<e id=\"SYN:{id}:T001\">m{s}</e> "));
        }
        text.push_str("</s>");
    }
    parse_iexml("doc", "t", &text).unwrap()
}

/// Builds the affinity matrix of a random document and compares every cell
/// with the rules applied one at a time.
pub fn check_affinity(seed: u64) -> Result<(), String> {
    let mut r = rng(seed);
    let concepts = random_dag(&mut r, 25, 2);
    let reach = Reach::new(&concepts);
    let o = Ontology::from_concepts(concepts.clone()).unwrap();
    let doc = random_document(&mut r, &concepts, 20);
    let (m, dropped) = build_affinity(&doc, &o);

    let known: BTreeSet<&str> = doc.frequencies.keys().map(String::as_str).filter(|c| o.contains(c)).collect();
    if m.concepts.iter().map(String::as_str).collect::<BTreeSet<_>>() != known {
        return Err("matrix concepts differ from the known annotated concepts".into());
    }
    if dropped != doc.frequencies.len() - known.len() {
        return Err(format!("dropped {dropped} unknown concepts"));
    }
    let mut sentences: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    for (s, rd) in doc.readings() {
        sentences.entry(s).or_default().insert(rd.cui.as_str());
    }
    let together = |a: &str, b: &str| sentences.values().any(|s| s.contains(a) && s.contains(b));
    for a in &known {
        for b in &known {
            let mut expected: f64 = 0.0;
            if a == b {
                expected = 1.0;
            }
            if a != b && together(a, b) {
                expected = expected.max(1.0);
            }
            if a != b && reach.is_below(a, b) {
                expected = expected.max(0.5);
            }
            if a != b && reach.is_below(b, a) {
                expected = expected.max(1.0);
            }
            let got = m.get(a, b).unwrap();
            if got != expected {
                return Err(format!("cell ({a}, {b}) is {got}, expected {expected}"));
            }
        }
    }
    Ok(())
}

/// Up to four dimensions, each a random DAG whose concepts draw their group
/// from the two groups mapped to that dimension.
pub fn random_schema(r: &mut StdRng) -> (Vec<Concept>, GroupMap) {
    let dims = r.random_range(1..=4);
    let mut concepts = Vec::new();
    let mut gm = GroupMap::new();
    for d in 0..dims {
        let groups = [format!("g{d}a"), format!("g{d}b")];
        for g in &groups {
            gm.insert(g.clone(), format!("D{d}"));
        }
        let n = r.random_range(1..40);
        for i in 0..n {
            let mut parents = BTreeSet::new();
            if i > 0 && r.random_bool(0.8) {
                for _ in 0..r.random_range(1..=3) {
                    parents.insert(format!("d{d}c{:02}", r.random_range(0..i)));
                }
            }
            let parents: Vec<String> = parents.into_iter().collect();
            let group = &groups[r.random_range(0..2)];
            concepts.push(concept(&format!("d{d}c{i:02}"), &parents, group));
        }
    }
    (concepts, gm)
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Largest gap between the closed-form ranking of a random document and
/// 1000 rounds of plain propagation.
pub fn propagation_gap(seed: u64, alpha: f64) -> f64 {
    let mut r = rng(seed);
    let concepts = random_dag(&mut r, 30, 2);
    let o = Ontology::from_concepts(concepts.clone()).unwrap();
    let doc = random_document(&mut r, &concepts, 20);
    let (m, _) = build_affinity(&doc, &o);
    let s = normalize_laplacian(&m.values).unwrap();
    let total: f64 = m.concepts.iter().map(|c| f64::from(doc.frequencies[c])).sum();
    let y: Vec<f64> = m.concepts.iter().map(|c| f64::from(doc.frequencies[c]) / total).collect();
    let closed = rank_concepts(&s, &DVector::from_vec(y.clone()), alpha).unwrap();
    assert!(!closed.fallback);
    let iterated = propagate(&to_rows(&s), &y, alpha, 1000);
    closed.scores.iter().zip(&iterated).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// Collection where `x1`/`y1` are exactly independent: N = 10, n_i = 5,
/// n_j = 4, n_ij = 2.
pub fn independent_index() -> semcube::CorpusIndex {
    let o = Ontology::from_concepts(vec![
        concept("x0", &[], "GX"),
        concept("x1", &["x0".into()], "GX"),
        concept("x2", &["x0".into()], "GX"),
        concept("y0", &[], "GY"),
        concept("y1", &["y0".into()], "GY"),
        concept("y2", &["y0".into()], "GY"),
    ])
    .unwrap();
    let gm: GroupMap = [("GX", "X"), ("GY", "Y")].iter().map(|(g, d)| (g.to_string(), d.to_string())).collect();
    let dims = build_dimensions(&o, ["x1", "x2", "y1", "y2"], &gm).unwrap();
    let pairs = [
        ("x1", "y1"),
        ("x1", "y1"),
        ("x1", "y2"),
        ("x1", "y2"),
        ("x1", "y2"),
        ("x2", "y1"),
        ("x2", "y1"),
        ("x2", "y2"),
        ("x2", "y2"),
        ("x2", "y2"),
    ];
    let facts = pairs
        .iter()
        .enumerate()
        .map(|(i, (x, y))| DocumentFact {
            doc_id: format!("d{i}"),
            assignments: BTreeMap::from([("X".into(), Some(x.to_string())), ("Y".into(), Some(y.to_string()))]),
            rank: RankVector(BTreeMap::from([(x.to_string(), 0.5), (y.to_string(), 0.5)])),
        })
        .collect();
    semcube::index_corpus(facts, o, dims).unwrap()
}
