//! Reference taxonomy with ancestor/descendant interval labeling.
//!
//! Every concept carries a [`ConceptDescriptor`] holding two labeling schemes:
//! a pre-order index over a spanning tree with the merged intervals of its
//! descendants, and a pre-order index over the edge-reversed spanning tree
//! with the merged intervals of its ancestors. Taxonomic queries
//! (`a ⪯ b`, descendant and ancestor sets) are answered with interval
//! membership only.
//!
//! The spanning tree is chosen deterministically: a concept with several
//! parents hangs under its lexicographically smallest parent id, and siblings
//! are visited in topological order. Topological order is Kahn's algorithm
//! with ready concepts released in input-record order, so the file order of a
//! taxonomy decides sibling order.
//!
//! When the input has several roots a virtual root (pre-index `0`) joins them.
//! It never appears in any query result.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interval::{Interval, IntervalList};

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("taxonomy record at line {line}: {source}")]
    Record {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("reading taxonomy: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate concept id `{0}`")]
    DuplicateId(String),
    #[error("concept `{child}` references undefined parent `{parent}`")]
    DanglingParent { child: String, parent: String },
    #[error("cycle detected: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
}

pub type Result<T, E = TaxonomyError> = std::result::Result<T, E>;

/// One taxonomy record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Concept {
    pub id: String,
    #[serde(rename = "preferred")]
    pub preferred_label: String,
    pub lex: Vec<String>,
    pub semtypes: Vec<String>,
    pub parents: Vec<String>,
    pub group: String,
}

impl Concept {
    /// All lexical forms: the preferred label followed by `lex`.
    pub fn lexical_forms(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.preferred_label.as_str()).chain(self.lex.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptDescriptor {
    pub concept_id: String,
    pub pre_index: u32,
    pub anc_index: u32,
    pub desc_intervals: IntervalList,
    pub anc_intervals: IntervalList,
    pub topo_order: u32,
}

/// An immutable, labeled taxonomy.
#[derive(Debug, Clone)]
pub struct Ontology {
    concepts: Vec<Concept>,
    position: HashMap<String, usize>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    descriptors: Vec<ConceptDescriptor>,
    by_pre: Vec<usize>,
    by_anc: Vec<usize>,
    virtual_root: bool,
}

/// Reads line-delimited taxonomy records and builds the labeled ontology.
pub fn load_taxonomy<R: BufRead>(reader: R) -> Result<Ontology> {
    let mut concepts = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let concept: Concept = serde_json::from_str(&line).map_err(|source| TaxonomyError::Record { line: n + 1, source })?;
        concepts.push(concept);
    }
    Ontology::from_concepts(concepts)
}

impl Ontology {
    /// Builds an ontology from concepts; record order fixes sibling order.
    pub fn from_concepts(concepts: Vec<Concept>) -> Result<Self> {
        let mut position = HashMap::with_capacity(concepts.len());
        for (i, c) in concepts.iter().enumerate() {
            if position.insert(c.id.clone(), i).is_some() {
                return Err(TaxonomyError::DuplicateId(c.id.clone()));
            }
        }

        let n = concepts.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for (i, c) in concepts.iter().enumerate() {
            for p in &c.parents {
                let &pi =
                    position.get(p).ok_or_else(|| TaxonomyError::DanglingParent { child: c.id.clone(), parent: p.clone() })?;
                if !parents[i].contains(&pi) {
                    parents[i].push(pi);
                    children[pi].push(i);
                }
            }
        }

        let mut ontology = Ontology {
            concepts,
            position,
            parents,
            children,
            descriptors: Vec::new(),
            by_pre: Vec::new(),
            by_anc: Vec::new(),
            virtual_root: false,
        };
        ontology.descriptors = ontology.build_labeling()?;
        let mut by_pre = vec![0; n];
        let mut by_anc = vec![0; n];
        for (i, d) in ontology.descriptors.iter().enumerate() {
            by_pre[d.pre_index as usize - 1] = i;
            by_anc[d.anc_index as usize - 1] = i;
        }
        ontology.by_pre = by_pre;
        ontology.by_anc = by_anc;
        Ok(ontology)
    }

    fn topological_order(&self) -> Result<Vec<usize>> {
        let n = self.concepts.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| indegree[i] == 0).map(Reverse).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(i)) = ready.pop() {
            order.push(i);
            for &c in &self.children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(Reverse(c));
                }
            }
        }
        if order.len() < n {
            return Err(TaxonomyError::Cycle(self.find_cycle(&indegree)));
        }
        Ok(order)
    }

    // Every concept left with a positive indegree has a parent that is also left,
    // so walking up through such parents must revisit a concept.
    fn find_cycle(&self, indegree: &[usize]) -> Vec<String> {
        let start = indegree.iter().position(|&d| d > 0).expect("cycle requires a blocked concept");
        let mut seen = HashMap::new();
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            if let Some(&at) = seen.get(&cur) {
                let mut cycle: Vec<String> = path[at..].iter().map(|&i: &usize| self.concepts[i].id.clone()).collect();
                cycle.reverse();
                cycle.push(cycle[0].clone());
                return cycle;
            }
            seen.insert(cur, path.len());
            path.push(cur);
            cur = *self.parents[cur].iter().find(|&&p| indegree[p] > 0).expect("blocked concept has a blocked parent");
        }
    }

    /// Computes the descriptors of every concept.
    fn build_labeling(&mut self) -> Result<Vec<ConceptDescriptor>> {
        let n = self.concepts.len();
        let topo = self.topological_order()?;
        let mut topo_rank = vec![0u32; n];
        for (rank, &i) in topo.iter().enumerate() {
            topo_rank[i] = rank as u32 + 1;
        }
        for list in &mut self.children {
            list.sort_by_key(|&c| topo_rank[c]);
        }
        for list in &mut self.parents {
            list.sort_by_key(|&p| topo_rank[p]);
        }

        // forward spanning tree
        let id = |i: usize| self.concepts[i].id.as_str();
        let tree_parent: Vec<Option<usize>> =
            self.parents.iter().map(|ps| ps.iter().copied().min_by(|&a, &b| id(a).cmp(id(b)))).collect();
        let mut tree_children = vec![Vec::new(); n];
        for &i in &topo {
            if let Some(p) = tree_parent[i] {
                tree_children[p].push(i);
            }
        }
        let roots: Vec<usize> = topo.iter().copied().filter(|&i| self.parents[i].is_empty()).collect();
        self.virtual_root = roots.len() > 1;

        let mut pre_index = vec![0u32; n];
        let mut next = 1u32;
        let mut stack: Vec<usize> = roots.iter().rev().copied().collect();
        while let Some(i) = stack.pop() {
            pre_index[i] = next;
            next += 1;
            stack.extend(tree_children[i].iter().rev());
        }

        // reversed spanning tree: a concept hangs under its smallest-id child,
        // leaves hang under a virtual sink
        let tree_child: Vec<Option<usize>> =
            self.children.iter().map(|cs| cs.iter().copied().min_by(|&a, &b| id(a).cmp(id(b)))).collect();
        let mut rev_children = vec![Vec::new(); n];
        for (i, c) in tree_child.iter().enumerate() {
            if let Some(c) = *c {
                rev_children[c].push(i);
            }
        }
        for list in &mut rev_children {
            list.sort_by(|&a, &b| id(a).cmp(id(b)));
        }
        let mut leaves: Vec<usize> = (0..n).filter(|&i| self.children[i].is_empty()).collect();
        leaves.sort_by(|&a, &b| id(a).cmp(id(b)));

        let mut anc_index = vec![0u32; n];
        let mut next = 1u32;
        let mut stack: Vec<usize> = leaves.iter().rev().copied().collect();
        while let Some(i) = stack.pop() {
            anc_index[i] = next;
            next += 1;
            stack.extend(rev_children[i].iter().rev());
        }

        let mut desc = vec![IntervalList::new(); n];
        for &i in topo.iter().rev() {
            let merged = IntervalList::merged(
                std::iter::once(Interval::point(pre_index[i]))
                    .chain(self.children[i].iter().flat_map(|&c| desc[c].intervals().iter().copied())),
            );
            desc[i] = merged;
        }
        let mut anc = vec![IntervalList::new(); n];
        for &i in &topo {
            let merged = IntervalList::merged(
                std::iter::once(Interval::point(anc_index[i]))
                    .chain(self.parents[i].iter().flat_map(|&p| anc[p].intervals().iter().copied())),
            );
            anc[i] = merged;
        }

        Ok(desc
            .into_iter()
            .zip(anc)
            .enumerate()
            .map(|(i, (desc_intervals, anc_intervals))| ConceptDescriptor {
                concept_id: self.concepts[i].id.clone(),
                pre_index: pre_index[i],
                anc_index: anc_index[i],
                desc_intervals,
                anc_intervals,
                topo_order: topo_rank[i],
            })
            .collect())
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn has_virtual_root(&self) -> bool {
        self.virtual_root
    }

    pub fn contains(&self, id: &str) -> bool {
        self.position.contains_key(id)
    }

    pub fn concept(&self, id: &str) -> Result<&Concept> {
        self.index_of(id).map(|i| &self.concepts[i])
    }

    /// Concepts in input order.
    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.iter()
    }

    pub fn descriptor(&self, id: &str) -> Result<&ConceptDescriptor> {
        self.index_of(id).map(|i| &self.descriptors[i])
    }

    pub fn descriptors(&self) -> &[ConceptDescriptor] {
        &self.descriptors
    }

    /// Concept ids with no parent, in topological order.
    pub fn roots(&self) -> Vec<&str> {
        let mut roots: Vec<usize> = (0..self.len()).filter(|&i| self.parents[i].is_empty()).collect();
        roots.sort_by_key(|&i| self.descriptors[i].topo_order);
        roots.into_iter().map(|i| self.concepts[i].id.as_str()).collect()
    }

    /// `a ⪯ b`: `a` is `b` or one of its descendants.
    pub fn is_descendant(&self, a: &str, b: &str) -> Result<bool> {
        Ok(self.is_descendant_at(self.index_of(a)?, self.index_of(b)?))
    }

    /// Descendants of `id` including itself, in pre-order.
    pub fn descendants_of(&self, id: &str) -> Result<Vec<&str>> {
        let i = self.index_of(id)?;
        Ok(self.descriptors[i].desc_intervals.points().map(|p| self.concepts[self.by_pre[p as usize - 1]].id.as_str()).collect())
    }

    /// Ancestors of `id` including itself, in reversed-tree pre-order.
    pub fn ancestors_of(&self, id: &str) -> Result<Vec<&str>> {
        let i = self.index_of(id)?;
        Ok(self.descriptors[i].anc_intervals.points().map(|p| self.concepts[self.by_anc[p as usize - 1]].id.as_str()).collect())
    }

    /// Direct children sorted by topological order.
    pub fn children_of(&self, id: &str) -> Result<Vec<&str>> {
        let i = self.index_of(id)?;
        Ok(self.children[i].iter().map(|&c| self.concepts[c].id.as_str()).collect())
    }

    pub fn parents_of(&self, id: &str) -> Result<Vec<&str>> {
        let i = self.index_of(id)?;
        Ok(self.parents[i].iter().map(|&p| self.concepts[p].id.as_str()).collect())
    }

    /// Sub-ontology induced on `signature` and all ancestors of its members.
    pub fn extract_fragment<'a, I>(&self, signature: I) -> Result<Ontology>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut keep: HashSet<usize> = HashSet::new();
        for id in signature {
            let i = self.index_of(id)?;
            for p in self.descriptors[i].anc_intervals.points() {
                keep.insert(self.by_anc[p as usize - 1]);
            }
        }
        let kept_ids: HashSet<&str> = keep.iter().map(|&i| self.concepts[i].id.as_str()).collect();
        let concepts = (0..self.len())
            .filter(|i| keep.contains(i))
            .map(|i| {
                let mut c = self.concepts[i].clone();
                c.parents.retain(|p| kept_ids.contains(p.as_str()));
                c
            })
            .collect();
        Ontology::from_concepts(concepts)
    }

    /// Keyword match against the lexical forms of `id`; see [`match_lexicon`].
    pub fn match_lexicon<S: AsRef<str>>(&self, id: &str, keywords: &[S]) -> Result<bool> {
        Ok(match_lexicon(self.concept(id)?, keywords))
    }

    /// Tab-separated descriptor table ordered by pre-index.
    pub fn descriptor_table(&self) -> String {
        let mut out = String::new();
        for &i in &self.by_pre {
            let d = &self.descriptors[i];
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                d.concept_id, d.pre_index, d.anc_index, d.desc_intervals, d.anc_intervals, d.topo_order
            );
        }
        out
    }

    pub(crate) fn index_of(&self, id: &str) -> Result<usize> {
        self.position.get(id).copied().ok_or_else(|| TaxonomyError::UnknownConcept(id.to_string()))
    }

    pub(crate) fn is_descendant_at(&self, a: usize, b: usize) -> bool {
        self.descriptors[b].desc_intervals.contains(self.descriptors[a].pre_index)
    }

    pub(crate) fn id_at(&self, i: usize) -> &str {
        &self.concepts[i].id
    }
}

/// True when a single lexical form of `concept` contains every keyword.
///
/// Matching is case-insensitive and each keyword must be a substring of one
/// whitespace-delimited token of that form. Keywords containing whitespace
/// are split into their tokens. An empty keyword list always matches.
pub fn match_lexicon<S: AsRef<str>>(concept: &Concept, keywords: &[S]) -> bool {
    let wanted: Vec<String> =
        keywords.iter().flat_map(|k| k.as_ref().split_whitespace().map(str::to_lowercase).collect::<Vec<_>>()).collect();
    if wanted.is_empty() {
        return true;
    }
    concept.lexical_forms().any(|form| {
        let tokens: Vec<String> = form.split_whitespace().map(str::to_lowercase).collect();
        wanted.iter().all(|k| tokens.iter().any(|t| t.contains(k.as_str())))
    })
}
