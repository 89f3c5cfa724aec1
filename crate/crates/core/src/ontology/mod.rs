//! Two-layer safety ontology: generic concepts, rail-domain specializations
//! and the leaf instances that make up the controlled vocabulary.
//!
//! The concept hierarchy is a DAG (a concept may have several parents). An
//! [`Ontology`] is immutable once built; changes produce a new snapshot.

mod format;
mod tree;

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::xml::FormatError;

pub use format::{load_ontology, parse_ontology, LoadOptions, LoadedOntology};
pub use tree::TreeNode;

/// Kebab-case concept identifier matching `[a-z0-9][a-z0-9-]*`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ConceptId(String);

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid concept id `{0}`: expected [a-z0-9][a-z0-9-]*")]
pub struct InvalidConceptId(pub String);

impl ConceptId {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidConceptId> {
        let value = value.into();
        if Self::is_valid(&value) {
            Ok(Self(value))
        } else {
            Err(InvalidConceptId(value))
        }
    }

    pub fn is_valid(value: &str) -> bool {
        let mut chars = value.chars();
        match chars.next() {
            Some(c) if c.is_ascii_lowercase() || c.is_ascii_digit() => {}
            _ => return false,
        }
        chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
    }

    /// Unchecked construction for loaders that validate later in bulk.
    pub(crate) fn raw(value: impl Into<String>) -> Self {
        Self(value.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ConceptId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for ConceptId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl FromStr for ConceptId {
    type Err = InvalidConceptId;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::new(s)
    }
}

impl TryFrom<String> for ConceptId {
    type Error = InvalidConceptId;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<ConceptId> for String {
    fn from(id: ConceptId) -> Self {
        id.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Layer {
    Generic,
    Domain,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Generic => "generic",
            Layer::Domain => "domain",
        }
    }
}

impl FromStr for Layer {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generic" => Ok(Layer::Generic),
            "domain" => Ok(Layer::Domain),
            other => Err(format!("unknown layer `{other}` (expected generic or domain)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: ConceptId,
    pub label: String,
    #[serde(default)]
    pub alt_labels: Vec<String>,
    #[serde(default)]
    pub definition: String,
    pub layer: Layer,
    #[serde(default)]
    pub parents: Vec<ConceptId>,
    /// Opt-out from the rule that domain concepts sit below the generic layer.
    #[serde(default)]
    pub root: bool,
}

impl Concept {
    pub fn new(id: ConceptId, label: impl Into<String>, layer: Layer) -> Self {
        Self {
            id,
            label: label.into(),
            alt_labels: Vec::new(),
            definition: String::new(),
            layer,
            parents: Vec::new(),
            root: false,
        }
    }

    pub fn with_parents(mut self, parents: impl IntoIterator<Item = ConceptId>) -> Self {
        self.parents = parents.into_iter().collect();
        self
    }

    /// Case-insensitive match against the label and alternative labels.
    pub fn matches_label(&self, term: &str) -> bool {
        labels_match(&self.label, &self.alt_labels, term)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instance {
    pub id: String,
    pub label: String,
    #[serde(default)]
    pub alt_labels: Vec<String>,
    pub concept: ConceptId,
    #[serde(default)]
    pub note: Option<String>,
    /// Set on seed entries whose transcription from the source table is doubtful.
    #[serde(default)]
    pub uncertain: bool,
}

impl Instance {
    pub fn new(id: impl Into<String>, label: impl Into<String>, concept: ConceptId) -> Self {
        Self {
            id: id.into(),
            label: label.into(),
            alt_labels: Vec::new(),
            concept,
            note: None,
            uncertain: false,
        }
    }

    pub fn matches_label(&self, term: &str) -> bool {
        labels_match(&self.label, &self.alt_labels, term)
    }
}

fn labels_match(label: &str, alt: &[String], term: &str) -> bool {
    let term = term.to_lowercase();
    label.to_lowercase() == term || alt.iter().any(|a| a.to_lowercase() == term)
}

/// A consistency problem found while building an ontology.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    InvalidConceptId(String),
    DuplicateConcept(String),
    DuplicateInstance(String),
    EmptyInstanceId,
    DanglingParent { concept: String, parent: String },
    UnknownInstanceConcept { instance: String, concept: String },
    Cycle(Vec<String>),
    GenericUnderDomain { concept: String, parent: String },
    Unanchored(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::InvalidConceptId(id) => {
                write!(f, "invalid concept id `{id}` (expected [a-z0-9][a-z0-9-]*)")
            }
            Violation::DuplicateConcept(id) => write!(f, "duplicate concept id `{id}`"),
            Violation::DuplicateInstance(id) => write!(f, "duplicate instance id `{id}`"),
            Violation::EmptyInstanceId => f.write_str("instance with empty id"),
            Violation::DanglingParent { concept, parent } => {
                write!(f, "concept `{concept}` names undeclared parent `{parent}`")
            }
            Violation::UnknownInstanceConcept { instance, concept } => {
                write!(f, "instance `{instance}` belongs to undeclared concept `{concept}`")
            }
            Violation::Cycle(members) => {
                write!(f, "parent cycle among {{{}}}", members.join(", "))
            }
            Violation::GenericUnderDomain { concept, parent } => write!(
                f,
                "generic concept `{concept}` has domain-layer parent `{parent}`"
            ),
            Violation::Unanchored(id) => write!(
                f,
                "domain concept `{id}` has no generic ancestor and no root marker"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum OntologyError {
    #[error("ontology parse error at {0}")]
    Parse(#[from] FormatError),
    #[error("ontology is inconsistent: {}", join_violations(.0))]
    Consistency(Vec<Violation>),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("reading ontology: {0}")]
    Io(#[from] std::io::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Immutable, validated ontology snapshot.
#[derive(Debug, Clone, Serialize)]
pub struct Ontology {
    version: String,
    concepts: BTreeMap<ConceptId, Concept>,
    instances: BTreeMap<String, Instance>,
    #[serde(skip)]
    children: BTreeMap<ConceptId, Vec<ConceptId>>,
    #[serde(skip)]
    direct_instances: BTreeMap<ConceptId, Vec<String>>,
}

impl PartialEq for Ontology {
    fn eq(&self, other: &Self) -> bool {
        self.version == other.version
            && self.concepts == other.concepts
            && self.instances == other.instances
    }
}

impl Eq for Ontology {}

impl Ontology {
    /// Validates and indexes the given concepts and instances. Every
    /// violation is collected before failing.
    pub fn build(
        version: impl Into<String>,
        concepts: Vec<Concept>,
        instances: Vec<Instance>,
    ) -> Result<Self, OntologyError> {
        let mut violations = Vec::new();
        let mut concept_map: BTreeMap<ConceptId, Concept> = BTreeMap::new();
        for mut c in concepts {
            if !ConceptId::is_valid(c.id.as_str()) {
                violations.push(Violation::InvalidConceptId(c.id.to_string()));
            }
            c.parents.sort();
            c.parents.dedup();
            if concept_map.contains_key(&c.id) {
                violations.push(Violation::DuplicateConcept(c.id.to_string()));
                continue;
            }
            concept_map.insert(c.id.clone(), c);
        }

        for c in concept_map.values() {
            for p in &c.parents {
                match concept_map.get(p) {
                    None => violations.push(Violation::DanglingParent {
                        concept: c.id.to_string(),
                        parent: p.to_string(),
                    }),
                    Some(parent) => {
                        if c.layer == Layer::Generic && parent.layer == Layer::Domain {
                            violations.push(Violation::GenericUnderDomain {
                                concept: c.id.to_string(),
                                parent: p.to_string(),
                            });
                        }
                    }
                }
            }
        }

        let cycles = find_cycles(&concept_map);
        let acyclic = cycles.is_empty();
        violations.extend(cycles.into_iter().map(Violation::Cycle));

        let mut instance_map: BTreeMap<String, Instance> = BTreeMap::new();
        for i in instances {
            if i.id.is_empty() {
                violations.push(Violation::EmptyInstanceId);
                continue;
            }
            if !concept_map.contains_key(&i.concept) {
                violations.push(Violation::UnknownInstanceConcept {
                    instance: i.id.clone(),
                    concept: i.concept.to_string(),
                });
            }
            if instance_map.contains_key(&i.id) {
                violations.push(Violation::DuplicateInstance(i.id.clone()));
                continue;
            }
            instance_map.insert(i.id.clone(), i);
        }

        if acyclic {
            for c in concept_map.values() {
                if c.layer == Layer::Domain && !c.root && !has_generic_ancestor(&concept_map, &c.id) {
                    violations.push(Violation::Unanchored(c.id.to_string()));
                }
            }
        }

        if !violations.is_empty() {
            violations.sort();
            violations.dedup();
            return Err(OntologyError::Consistency(violations));
        }

        let mut children: BTreeMap<ConceptId, Vec<ConceptId>> = BTreeMap::new();
        for c in concept_map.values() {
            for p in &c.parents {
                children.entry(p.clone()).or_default().push(c.id.clone());
            }
        }
        for list in children.values_mut() {
            list.sort();
        }
        let mut direct_instances: BTreeMap<ConceptId, Vec<String>> = BTreeMap::new();
        for i in instance_map.values() {
            direct_instances
                .entry(i.concept.clone())
                .or_default()
                .push(i.id.clone());
        }

        Ok(Self {
            version: version.into(),
            concepts: concept_map,
            instances: instance_map,
            children,
            direct_instances,
        })
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    pub fn instances(&self) -> impl Iterator<Item = &Instance> {
        self.instances.values()
    }

    pub fn concept(&self, id: &str) -> Option<&Concept> {
        self.concepts.get(id)
    }

    pub fn instance(&self, id: &str) -> Option<&Instance> {
        self.instances.get(id)
    }

    pub fn contains_concept(&self, id: &str) -> bool {
        self.concepts.contains_key(id)
    }

    fn require(&self, id: &str) -> Result<&Concept, OntologyError> {
        self.concepts
            .get(id)
            .ok_or_else(|| OntologyError::UnknownConcept(id.to_owned()))
    }

    /// Reflexive-transitive subsumption: true iff `ancestor` is reachable from
    /// `concept` by following parent links zero or more times.
    pub fn is_subconcept(&self, concept: &str, ancestor: &str) -> Result<bool, OntologyError> {
        self.require(concept)?;
        self.require(ancestor)?;
        if concept == ancestor {
            return Ok(true);
        }
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([concept]);
        while let Some(id) = queue.pop_front() {
            for p in &self.concepts[id].parents {
                if p.as_str() == ancestor {
                    return Ok(true);
                }
                if seen.insert(p.as_str()) {
                    queue.push_back(p.as_str());
                }
            }
        }
        Ok(false)
    }

    /// Strict ancestors of `concept`, sorted by id.
    pub fn ancestors(&self, concept: &str) -> Result<Vec<ConceptId>, OntologyError> {
        self.require(concept)?;
        Ok(self.closure(concept, |id| &self.concepts[id].parents))
    }

    /// Strict descendants of `concept`, sorted by id, each listed once.
    pub fn descendants(&self, concept: &str) -> Result<Vec<ConceptId>, OntologyError> {
        self.require(concept)?;
        Ok(self.closure(concept, |id| {
            self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
        }))
    }

    fn closure<'a>(
        &'a self,
        start: &str,
        next: impl Fn(&str) -> &'a [ConceptId],
    ) -> Vec<ConceptId> {
        let mut seen: BTreeSet<&ConceptId> = BTreeSet::new();
        let mut queue: VecDeque<&str> = VecDeque::from([start]);
        while let Some(id) = queue.pop_front() {
            for n in next(id) {
                if n.as_str() != start && seen.insert(n) {
                    queue.push_back(n.as_str());
                }
            }
        }
        seen.into_iter().cloned().collect()
    }

    /// Instances attached to `concept`, or also to any descendant when
    /// `transitive` is set. Sorted by instance id.
    pub fn instances_of(
        &self,
        concept: &str,
        transitive: bool,
    ) -> Result<Vec<&Instance>, OntologyError> {
        self.require(concept)?;
        let mut ids: BTreeSet<&str> = BTreeSet::new();
        let mut collect = |c: &str| {
            if let Some(list) = self.direct_instances.get(c) {
                ids.extend(list.iter().map(String::as_str));
            }
        };
        collect(concept);
        if transitive {
            for d in self.descendants(concept)? {
                collect(d.as_str());
            }
        }
        Ok(ids.into_iter().map(|id| &self.instances[id]).collect())
    }

    /// True iff `instance` is attached to `concept` or one of its descendants.
    pub fn instance_is_a(&self, instance: &str, concept: &str) -> Result<bool, OntologyError> {
        self.require(concept)?;
        match self.instances.get(instance) {
            Some(i) => self.is_subconcept(i.concept.as_str(), concept),
            None => Ok(false),
        }
    }

    /// Concepts whose id equals `term`, or whose label or alternative label
    /// equals it ignoring case.
    pub fn concepts_matching(&self, term: &str) -> Vec<&Concept> {
        self.concepts
            .values()
            .filter(|c| c.id.as_str() == term || c.matches_label(term))
            .collect()
    }

    pub fn instances_matching(&self, term: &str) -> Vec<&Instance> {
        self.instances
            .values()
            .filter(|i| i.id == term || i.matches_label(term))
            .collect()
    }

    /// New snapshot with `extra` instances added.
    pub fn with_instances(&self, extra: Vec<Instance>) -> Result<Self, OntologyError> {
        let instances = self.instances.values().cloned().chain(extra).collect();
        Self::build(
            self.version.clone(),
            self.concepts.values().cloned().collect(),
            instances,
        )
    }

    /// Domain concepts exempted from generic anchoring by the root marker.
    pub fn lints(&self) -> Vec<String> {
        self.concepts
            .values()
            .filter(|c| c.layer == Layer::Domain && c.root)
            .map(|c| format!("domain concept `{}` is marked root (not anchored in the generic layer)", c.id))
            .collect()
    }

    pub fn to_xml(&self) -> String {
        format::write_ontology(self)
    }

    pub fn concept_tree(&self) -> Vec<TreeNode> {
        tree::build_forest(self)
    }

    pub(crate) fn children_of(&self, id: &str) -> &[ConceptId] {
        self.children.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn direct_instance_ids(&self, id: &str) -> &[String] {
        self.direct_instances.get(id).map(Vec::as_slice).unwrap_or(&[])
    }
}

fn has_generic_ancestor(concepts: &BTreeMap<ConceptId, Concept>, start: &ConceptId) -> bool {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::from([start]);
    while let Some(id) = queue.pop_front() {
        for p in &concepts[id].parents {
            let Some(parent) = concepts.get(p) else { continue };
            if parent.layer == Layer::Generic {
                return true;
            }
            if seen.insert(p) {
                queue.push_back(p);
            }
        }
    }
    false
}

/// Strongly connected components of the parent graph that contain a cycle,
/// each as a sorted member list. Iterative Kosaraju.
fn find_cycles(concepts: &BTreeMap<ConceptId, Concept>) -> Vec<Vec<String>> {
    let ids: Vec<&ConceptId> = concepts.keys().collect();
    let index: BTreeMap<&ConceptId, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
    let n = ids.len();
    let mut forward: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut backward: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, id) in ids.iter().enumerate() {
        for p in &concepts[*id].parents {
            if let Some(&j) = index.get(p) {
                forward[i].push(j);
                backward[j].push(i);
            }
        }
    }

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some((node, next)) = stack.pop() {
            if next < forward[node].len() {
                stack.push((node, next + 1));
                let succ = forward[node][next];
                if !visited[succ] {
                    visited[succ] = true;
                    stack.push((succ, 0));
                }
            } else {
                order.push(node);
            }
        }
    }

    let mut component = vec![usize::MAX; n];
    let mut cycles = Vec::new();
    for &start in order.iter().rev() {
        if component[start] != usize::MAX {
            continue;
        }
        let mut members = vec![start];
        component[start] = start;
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            for &pred in &backward[node] {
                if component[pred] == usize::MAX {
                    component[pred] = start;
                    members.push(pred);
                    stack.push(pred);
                }
            }
        }
        let self_loop = members.len() == 1 && forward[start].contains(&start);
        if members.len() > 1 || self_loop {
            let mut names: Vec<String> = members.iter().map(|&m| ids[m].to_string()).collect();
            names.sort();
            cycles.push(names);
        }
    }
    cycles.sort();
    cycles
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cid(s: &str) -> ConceptId {
        ConceptId::new(s).unwrap()
    }

    fn generic(id: &str, parents: &[&str]) -> Concept {
        Concept::new(cid(id), id, Layer::Generic).with_parents(parents.iter().map(|p| cid(p)))
    }

    fn diamond() -> Ontology {
        Ontology::build(
            "t",
            vec![
                generic("r", &[]),
                generic("p", &["r"]),
                generic("q", &["r"]),
                generic("x", &["p", "q"]),
            ],
            vec![Instance::new("i1", "I1", cid("x")), Instance::new("i2", "I2", cid("p"))],
        )
        .unwrap()
    }

    #[test]
    fn concept_id_pattern() {
        assert!(ConceptId::new("risk").is_ok());
        assert!(ConceptId::new("0-a-b").is_ok());
        assert!(ConceptId::new("").is_err());
        assert!(ConceptId::new("-a").is_err());
        assert!(ConceptId::new("Risk").is_err());
        assert!(ConceptId::new("a_b").is_err());
    }

    #[test]
    fn subsumption_is_reflexive_and_transitive() {
        let o = diamond();
        assert!(o.is_subconcept("x", "x").unwrap());
        assert!(o.is_subconcept("x", "r").unwrap());
        assert!(!o.is_subconcept("r", "x").unwrap());
        assert!(!o.is_subconcept("p", "q").unwrap());
        assert!(matches!(
            o.is_subconcept("x", "nope"),
            Err(OntologyError::UnknownConcept(_))
        ));
    }

    #[test]
    fn diamond_descendant_listed_once() {
        let o = diamond();
        let d: Vec<_> = o.descendants("r").unwrap().into_iter().map(String::from).collect();
        assert_eq!(d, ["p", "q", "x"]);
        assert!(o.descendants("x").unwrap().is_empty());
    }

    #[test]
    fn direct_and_transitive_instances() {
        let o = diamond();
        assert!(o.instances_of("r", false).unwrap().is_empty());
        let all: Vec<_> = o.instances_of("r", true).unwrap().iter().map(|i| i.id.as_str()).collect();
        assert_eq!(all, ["i1", "i2"]);
        let q: Vec<_> = o.instances_of("q", true).unwrap().iter().map(|i| i.id.as_str()).collect();
        assert_eq!(q, ["i1"]);
    }

    #[test]
    fn two_cycle_is_named() {
        let err = Ontology::build("t", vec![generic("a", &["b"]), generic("b", &["a"])], vec![])
            .unwrap_err();
        match err {
            OntologyError::Consistency(v) => {
                assert_eq!(v, vec![Violation::Cycle(vec!["a".into(), "b".into()])]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let err = Ontology::build("t", vec![generic("a", &["a"])], vec![]).unwrap_err();
        assert!(matches!(err, OntologyError::Consistency(v) if v == vec![Violation::Cycle(vec!["a".into()])]));
    }

    #[test]
    fn all_violations_reported() {
        let mut dom = Concept::new(cid("d"), "D", Layer::Domain);
        dom.parents = vec![];
        let g = generic("g", &["d"]);
        let err = Ontology::build(
            "t",
            vec![dom, g, generic("g", &[]), generic("h", &["missing"])],
            vec![
                Instance::new("i", "I", cid("nowhere")),
                Instance::new("j", "J", cid("h")),
                Instance::new("j", "J", cid("h")),
            ],
        )
        .unwrap_err();
        let OntologyError::Consistency(v) = err else { panic!() };
        assert!(v.contains(&Violation::DuplicateConcept("g".into())));
        assert!(v.contains(&Violation::DanglingParent { concept: "h".into(), parent: "missing".into() }));
        assert!(v.contains(&Violation::GenericUnderDomain { concept: "g".into(), parent: "d".into() }));
        assert!(v.contains(&Violation::Unanchored("d".into())));
        assert!(v.contains(&Violation::DuplicateInstance("j".into())));
        assert!(v.contains(&Violation::UnknownInstanceConcept { instance: "i".into(), concept: "nowhere".into() }));
    }

    #[test]
    fn root_marker_exempts_and_lints() {
        let mut dom = Concept::new(cid("d"), "D", Layer::Domain);
        dom.root = true;
        let o = Ontology::build("t", vec![dom], vec![]).unwrap();
        assert_eq!(o.lints().len(), 1);
    }

    #[test]
    fn label_lookup_is_case_insensitive() {
        let mut c = generic("risk", &[]);
        c.label = "Risk".into();
        c.alt_labels = vec!["Risques".into()];
        let o = Ontology::build("t", vec![c], vec![]).unwrap();
        assert_eq!(o.concepts_matching("RISQUES").len(), 1);
        assert_eq!(o.concepts_matching("risk").len(), 1);
        assert!(o.concepts_matching("Risk-x").is_empty());
    }
}
