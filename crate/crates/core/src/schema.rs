//! Multidimensional schema: dimensions and their antichain categories.
//!
//! A dimension is the ontology fragment carved by the corpus concepts of the
//! semantic groups mapped to it. Dimensions must not share concepts, so any
//! ancestor belonging to another dimension's group is a hard error.
//!
//! Categories stratify a dimension: a concept starts at its minimal depth
//! from the fragment roots and is pushed one level down while an ancestor
//! sits on its level. Several fragment roots share the structural virtual
//! root of the fragment, which serves as the common super-concept.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::{Ontology, TaxonomyError};

/// Semantic group name → dimension name.
pub type GroupMap = BTreeMap<String, String>;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error(
        "partition violation: `{concept}` (group {group}, dimension {dimension}) has ancestor `{ancestor}` in group {ancestor_group}"
    )]
    PartitionViolation { concept: String, group: String, dimension: String, ancestor: String, ancestor_group: String },
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub dimension_id: String,
    pub level: usize,
    /// Members in topological order.
    pub concepts: Vec<String>,
}

impl Category {
    pub fn contains(&self, id: &str) -> bool {
        self.concepts.iter().any(|c| c == id)
    }
}

#[derive(Debug, Clone)]
pub struct Dimension {
    pub id: String,
    pub name: String,
    pub groups: Vec<String>,
    pub members: BTreeSet<String>,
    pub fragment: Ontology,
    pub categories: Vec<Category>,
}

impl Dimension {
    pub fn contains(&self, id: &str) -> bool {
        self.members.contains(id)
    }

    pub fn category(&self, level: usize) -> Option<&Category> {
        self.categories.get(level)
    }

    /// Direct children of `id` inside this dimension.
    pub fn children_of(&self, id: &str) -> Result<Vec<&str>, TaxonomyError> {
        self.fragment.children_of(id)
    }

    pub fn descendants_of(&self, id: &str) -> Result<Vec<&str>, TaxonomyError> {
        self.fragment.descendants_of(id)
    }
}

/// Builds one dimension per distinct dimension name in `group_map`.
///
/// Dimensions come out sorted by name and always exist, even when no corpus
/// concept falls into them.
pub fn build_dimensions<'a, I>(ontology: &Ontology, signature: I, group_map: &GroupMap) -> Result<Vec<Dimension>, SchemaError>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut names: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for (group, dim) in group_map {
        names.entry(dim.as_str()).or_default().push(group.clone());
    }
    let mut per_dim: BTreeMap<&str, BTreeSet<&str>> = names.keys().map(|&n| (n, BTreeSet::new())).collect();
    for id in signature {
        let concept = ontology.concept(id)?;
        if let Some(dim) = group_map.get(&concept.group) {
            per_dim.get_mut(dim.as_str()).expect("every mapped dimension is present").insert(concept.id.as_str());
        }
    }

    let mut dimensions = Vec::with_capacity(names.len());
    for (name, groups) in names {
        let signature = &per_dim[name];
        let fragment = ontology.extract_fragment(signature.iter().copied())?;
        for c in fragment.concepts() {
            if group_map.get(&c.group).map(String::as_str) == Some(name) {
                continue;
            }
            // find a signature concept of this dimension that drags `c` in
            let culprit = signature
                .iter()
                .find(|s| fragment.is_descendant(s, &c.id).unwrap_or(false))
                .expect("fragment concepts are ancestors of the signature");
            return Err(SchemaError::PartitionViolation {
                concept: culprit.to_string(),
                group: ontology.concept(culprit)?.group.clone(),
                dimension: name.to_string(),
                ancestor: c.id.clone(),
                ancestor_group: c.group.clone(),
            });
        }
        let members = fragment.concepts().map(|c| c.id.clone()).collect();
        let categories = stratify(name, &fragment);
        dimensions.push(Dimension { id: name.to_string(), name: name.to_string(), groups, members, fragment, categories });
    }
    Ok(dimensions)
}

/// Recomputes the categories of `dimension` from its fragment.
pub fn build_categories(dimension: &Dimension) -> Vec<Category> {
    stratify(&dimension.id, &dimension.fragment)
}

fn stratify(dimension_id: &str, fragment: &Ontology) -> Vec<Category> {
    let n = fragment.len();
    if n == 0 {
        return Vec::new();
    }
    let mut depth = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for root in fragment.roots() {
        let i = fragment.index_of(root).expect("root exists");
        depth[i] = 0;
        queue.push_back(i);
    }
    while let Some(i) = queue.pop_front() {
        for c in fragment.children_of(fragment.id_at(i)).expect("known concept") {
            let c = fragment.index_of(c).expect("known concept");
            if depth[c] == usize::MAX {
                depth[c] = depth[i] + 1;
                queue.push_back(c);
            }
        }
    }

    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &d) in depth.iter().enumerate() {
        buckets.entry(d).or_default().push(i);
    }
    let topo = |i: usize| fragment.descriptors()[i].topo_order;

    let mut levels: Vec<Vec<usize>> = Vec::new();
    let mut carry: Vec<usize> = Vec::new();
    let mut level = 0usize;
    while !carry.is_empty() || buckets.range(level..).next().is_some() {
        let mut candidates = std::mem::take(&mut carry);
        if let Some(b) = buckets.remove(&level) {
            candidates.extend(b);
        }
        candidates.sort_by_key(|&i| topo(i));
        let mut kept: Vec<usize> = Vec::new();
        for c in candidates {
            if kept.iter().any(|&k| fragment.is_descendant_at(c, k) || fragment.is_descendant_at(k, c)) {
                carry.push(c);
            } else {
                kept.push(c);
            }
        }
        if !kept.is_empty() {
            levels.push(kept);
        }
        level += 1;
    }

    levels
        .into_iter()
        .enumerate()
        .map(|(level, members)| Category {
            dimension_id: dimension_id.to_string(),
            level,
            concepts: members.into_iter().map(|i| fragment.id_at(i).to_string()).collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Two comparable concepts share a category.
    Antichain { dimension: String, level: usize, a: String, b: String },
    /// A concept belongs to several dimensions.
    Partition { concept: String, dimensions: Vec<String> },
    /// A member of the dimension is in no category.
    Uncovered { dimension: String, concept: String },
    /// A concept is listed in more than one category of a dimension.
    Duplicated { dimension: String, concept: String },
    /// A category lists a concept that is not a member of its dimension.
    Foreign { dimension: String, level: usize, concept: String },
    /// A category of a single-rooted dimension has a member outside that root.
    NoCommonSuperConcept { dimension: String, level: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Antichain { dimension, level, a, b } => {
                write!(f, "{dimension} level {level}: `{a}` and `{b}` are comparable")
            }
            Violation::Partition { concept, dimensions } => {
                write!(f, "`{concept}` belongs to dimensions {}", dimensions.join(", "))
            }
            Violation::Uncovered { dimension, concept } => write!(f, "{dimension}: `{concept}` is in no category"),
            Violation::Duplicated { dimension, concept } => {
                write!(f, "{dimension}: `{concept}` is in several categories")
            }
            Violation::Foreign { dimension, level, concept } => {
                write!(f, "{dimension} level {level}: `{concept}` is not a member")
            }
            Violation::NoCommonSuperConcept { dimension, level } => {
                write!(f, "{dimension} level {level}: no common super-concept")
            }
        }
    }
}

/// Re-checks every schema constraint by brute force over concept pairs.
pub fn validate_schema(dimensions: &[Dimension]) -> Vec<Violation> {
    let mut violations = Vec::new();

    let mut owners: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for d in dimensions {
        for m in &d.members {
            owners.entry(m.as_str()).or_default().push(d.id.clone());
        }
    }
    for (concept, dims) in owners {
        if dims.len() > 1 {
            violations.push(Violation::Partition { concept: concept.to_string(), dimensions: dims });
        }
    }

    for d in dimensions {
        let comparable =
            |a: &str, b: &str| d.fragment.is_descendant(a, b).unwrap_or(false) || d.fragment.is_descendant(b, a).unwrap_or(false);
        let roots = d.fragment.roots();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        for cat in &d.categories {
            for (i, a) in cat.concepts.iter().enumerate() {
                *seen.entry(a.as_str()).or_default() += 1;
                if !d.members.contains(a) {
                    violations.push(Violation::Foreign { dimension: d.id.clone(), level: cat.level, concept: a.clone() });
                }
                for b in &cat.concepts[i + 1..] {
                    if comparable(a, b) {
                        violations.push(Violation::Antichain {
                            dimension: d.id.clone(),
                            level: cat.level,
                            a: a.clone(),
                            b: b.clone(),
                        });
                    }
                }
            }
            if let [root] = roots.as_slice() {
                if cat.concepts.iter().any(|c| d.members.contains(c) && !d.fragment.is_descendant(c, root).unwrap_or(false)) {
                    violations.push(Violation::NoCommonSuperConcept { dimension: d.id.clone(), level: cat.level });
                }
            }
        }
        for m in &d.members {
            match seen.get(m.as_str()) {
                None => violations.push(Violation::Uncovered { dimension: d.id.clone(), concept: m.clone() }),
                Some(&k) if k > 1 => violations.push(Violation::Duplicated { dimension: d.id.clone(), concept: m.clone() }),
                _ => {}
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::Concept;

    fn rec(id: &str, parents: &[&str], group: &str) -> Concept {
        Concept {
            id: id.into(),
            preferred_label: id.into(),
            lex: vec![],
            semtypes: vec![],
            parents: parents.iter().map(|s| s.to_string()).collect(),
            group: group.into(),
        }
    }

    fn diamond() -> Ontology {
        Ontology::from_concepts(vec![
            rec("A", &[], "G"),
            rec("B", &["A"], "G"),
            rec("C", &["A"], "G"),
            rec("D", &["B", "C"], "G"),
        ])
        .unwrap()
    }

    fn gm(pairs: &[(&str, &str)]) -> GroupMap {
        pairs.iter().map(|(g, d)| (g.to_string(), d.to_string())).collect()
    }

    fn levels(d: &Dimension) -> Vec<Vec<&str>> {
        d.categories.iter().map(|c| c.concepts.iter().map(String::as_str).collect()).collect()
    }

    #[test]
    fn diamond_dimension() {
        let o = diamond();
        let dims = build_dimensions(&o, ["D"], &gm(&[("G", "Dim")])).unwrap();
        assert_eq!(dims.len(), 1);
        assert_eq!(dims[0].members, BTreeSet::from(["A", "B", "C", "D"].map(String::from)));
        assert_eq!(levels(&dims[0]), vec![vec!["A"], vec!["B", "C"], vec!["D"]]);
        assert!(validate_schema(&dims).is_empty());
    }

    #[test]
    fn chain_and_single() {
        let o = Ontology::from_concepts(vec![rec("A", &[], "G"), rec("B", &["A"], "G"), rec("C", &["B"], "G")]).unwrap();
        let dims = build_dimensions(&o, ["C"], &gm(&[("G", "X")])).unwrap();
        assert_eq!(levels(&dims[0]), vec![vec!["A"], vec!["B"], vec!["C"]]);
        let dims = build_dimensions(&o, ["A"], &gm(&[("G", "X")])).unwrap();
        assert_eq!(levels(&dims[0]), vec![vec!["A"]]);
    }

    #[test]
    fn shortcut_edge_defers_descendant() {
        // C hangs under both A (depth 1) and B (depth 1 -> C would share level with B)
        let o = Ontology::from_concepts(vec![rec("A", &[], "G"), rec("B", &["A"], "G"), rec("C", &["A", "B"], "G")]).unwrap();
        let dims = build_dimensions(&o, ["C"], &gm(&[("G", "X")])).unwrap();
        assert_eq!(levels(&dims[0]), vec![vec!["A"], vec!["B"], vec!["C"]]);
        assert!(validate_schema(&dims).is_empty());
    }

    #[test]
    fn empty_signature() {
        let o = diamond();
        let dims = build_dimensions(&o, std::iter::empty(), &gm(&[("G", "Dim"), ("H", "Other")])).unwrap();
        assert_eq!(dims.len(), 2);
        assert!(dims.iter().all(|d| d.members.is_empty() && d.categories.is_empty()));
    }

    #[test]
    fn partition_violation() {
        let o = Ontology::from_concepts(vec![rec("Body", &[], "Organ"), rec("Flu", &["Body"], "Disease")]).unwrap();
        let err = build_dimensions(&o, ["Flu"], &gm(&[("Disease", "Disease"), ("Organ", "Organ")])).unwrap_err();
        match err {
            SchemaError::PartitionViolation { group, ancestor_group, .. } => {
                assert_eq!(group, "Disease");
                assert_eq!(ancestor_group, "Organ");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn hand_built_level_is_caught() {
        let o = diamond();
        let mut dims = build_dimensions(&o, ["D"], &gm(&[("G", "Dim")])).unwrap();
        let cat = |level: usize, cs: &[&str]| Category {
            dimension_id: "Dim".into(),
            level,
            concepts: cs.iter().map(|s| s.to_string()).collect(),
        };
        dims[0].categories = vec![cat(0, &["A"]), cat(1, &["B", "D"]), cat(2, &["C"])];
        let v = validate_schema(&dims);
        assert_eq!(v, vec![Violation::Antichain { dimension: "Dim".into(), level: 1, a: "B".into(), b: "D".into() }]);
    }

    #[test]
    fn shared_concept_is_a_partition_violation() {
        let o = diamond();
        let a = build_dimensions(&o, ["B"], &gm(&[("G", "One")])).unwrap().remove(0);
        let mut b = a.clone();
        b.id = "Two".into();
        b.members = BTreeSet::from(["B".to_string()]);
        b.categories = vec![Category { dimension_id: "Two".into(), level: 0, concepts: vec!["B".into()] }];
        let v = validate_schema(&[a, b]);
        assert_eq!(v, vec![Violation::Partition { concept: "B".into(), dimensions: vec!["One".into(), "Two".into()] }]);
    }
}
