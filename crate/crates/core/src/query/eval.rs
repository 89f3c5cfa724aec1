use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Atom, Expr, Query, QueryError};
use crate::ontology::Ontology;
use crate::scenario::{ParameterId, Selection};
use crate::store::{Archive, DocSummary, Index, ScenarioDocument, ValueKey};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Projection {
    Ids,
    #[default]
    Summaries,
    Full,
}

impl std::str::FromStr for Projection {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ids" => Ok(Projection::Ids),
            "summaries" => Ok(Projection::Summaries),
            "full" => Ok(Projection::Full),
            other => Err(format!("unknown projection `{other}` (expected ids, summaries or full)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    /// Set algebra over index entries and document summaries.
    #[default]
    Index,
    /// Load and test every document.
    Scan,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryStats {
    pub mode: EvalMode,
    pub documents_scanned: usize,
    /// Index lookups that found at least one document.
    pub index_hits: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    /// Sorted, without duplicates.
    pub ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub summaries: Vec<DocSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub documents: Vec<ScenarioDocument>,
    pub stats: QueryStats,
}

/// A parameter atom with its term resolved against the ontology: the set of
/// selection keys it accepts, and whether any coded entry under the
/// parameter is accepted too.
#[derive(Debug, Clone)]
struct KeySet {
    parameter: ParameterId,
    keys: BTreeSet<String>,
    all_coded: bool,
}

impl KeySet {
    fn accepts(&self, s: &Selection) -> bool {
        self.keys.contains(s.value_key()) || (self.all_coded && matches!(s, Selection::Coded(_)))
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Keys(KeySet),
    Doc(Atom),
    Not(Box<Compiled>),
    And(Box<Compiled>, Box<Compiled>),
    Or(Box<Compiled>, Box<Compiled>),
}

fn resolve(atom: &Atom, o: &Ontology) -> Result<Option<KeySet>, QueryError> {
    match atom {
        Atom::Has { parameter, term } => {
            let mut keys: BTreeSet<String> =
                o.instances_matching(term).into_iter().map(|i| i.id.clone()).collect();
            keys.insert(term.clone());
            Ok(Some(KeySet {
                parameter: *parameter,
                keys,
                all_coded: false,
            }))
        }
        Atom::Isa { parameter, term } => {
            let concepts = o.concepts_matching(term);
            let direct = o.instances_matching(term);
            if concepts.is_empty() && direct.is_empty() {
                return Err(QueryError::UnknownConcept(term.clone()));
            }
            let mut keys: BTreeSet<String> = direct.into_iter().map(|i| i.id.clone()).collect();
            let anchor = parameter.anchor();
            let mut all_coded = false;
            for c in concepts {
                let found = o.instances_of(c.id.as_str(), true).expect("concept exists");
                keys.extend(found.into_iter().map(|i| i.id.clone()));
                if o.contains_concept(anchor) && o.is_subconcept(anchor, c.id.as_str()).unwrap_or(false) {
                    all_coded = true;
                }
            }
            Ok(Some(KeySet {
                parameter: *parameter,
                keys,
                all_coded,
            }))
        }
        _ => Ok(None),
    }
}

fn compile(e: &Expr, o: &Ontology) -> Result<Compiled, QueryError> {
    Ok(match e {
        Expr::Atom(a) => match resolve(a, o)? {
            Some(k) => Compiled::Keys(k),
            None => Compiled::Doc(a.clone()),
        },
        Expr::Not(x) => Compiled::Not(Box::new(compile(x, o)?)),
        Expr::And(a, b) => Compiled::And(Box::new(compile(a, o)?), Box::new(compile(b, o)?)),
        Expr::Or(a, b) => Compiled::Or(Box::new(compile(a, o)?), Box::new(compile(b, o)?)),
    })
}

fn summary_matches(atom: &Atom, s: &DocSummary) -> bool {
    match atom {
        Atom::Trains { cmp, value } => s.train_count.is_some_and(|n| cmp.test(n, *value)),
        Atom::HasCritical => s.has_critical,
        Atom::StatusIs { status } => s.status == *status,
        Atom::SystemIs { system } => s.transport_system.to_lowercase() == system.to_lowercase(),
        Atom::Has { .. } | Atom::Isa { .. } => unreachable!("parameter atoms are resolved"),
    }
}

fn doc_matches(c: &Compiled, doc: &ScenarioDocument, summary: &DocSummary) -> bool {
    match c {
        Compiled::Keys(k) => doc.sheet.selections(k.parameter).iter().any(|s| k.accepts(s)),
        Compiled::Doc(a) => summary_matches(a, summary),
        Compiled::Not(x) => !doc_matches(x, doc, summary),
        Compiled::And(a, b) => doc_matches(a, doc, summary) && doc_matches(b, doc, summary),
        Compiled::Or(a, b) => doc_matches(a, doc, summary) || doc_matches(b, doc, summary),
    }
}

fn index_eval(
    c: &Compiled,
    index: &Index,
    universe: &BTreeSet<String>,
    stats: &mut QueryStats,
) -> BTreeSet<String> {
    match c {
        Compiled::Keys(k) => {
            let mut out = BTreeSet::new();
            for key in &k.keys {
                for vk in [ValueKey::Instance(key.clone()), ValueKey::Code(key.clone())] {
                    if let Some(ids) = index.lookup(k.parameter, &vk) {
                        stats.index_hits += 1;
                        out.extend(ids.iter().cloned());
                    }
                }
            }
            if k.all_coded {
                let coded = index.coded_under(k.parameter);
                if !coded.is_empty() {
                    stats.index_hits += 1;
                }
                out.extend(coded);
            }
            out
        }
        Compiled::Doc(a) => index
            .summaries()
            .filter(|s| summary_matches(a, s))
            .map(|s| s.id.clone())
            .collect(),
        Compiled::Not(x) => universe
            .difference(&index_eval(x, index, universe, stats))
            .cloned()
            .collect(),
        Compiled::And(a, b) => {
            let l = index_eval(a, index, universe, stats);
            if l.is_empty() {
                return l;
            }
            l.intersection(&index_eval(b, index, universe, stats)).cloned().collect()
        }
        Compiled::Or(a, b) => {
            let mut l = index_eval(a, index, universe, stats);
            l.extend(index_eval(b, index, universe, stats));
            l
        }
    }
}

/// Tests one document against a query, resolving terms in `o`.
pub fn matches(query: &Query, doc: &ScenarioDocument, o: &Ontology) -> Result<bool, QueryError> {
    let Some(expr) = &query.expr else { return Ok(true) };
    let c = compile(expr, o)?;
    Ok(doc_matches(&c, doc, &DocSummary::of(doc, (0, 0))))
}

/// Runs a query over the archive. Both modes return the same ids; `Scan`
/// exists to cross-check the index.
pub fn evaluate(
    query: &Query,
    archive: &Archive,
    projection: Projection,
    mode: EvalMode,
) -> Result<QueryResult, QueryError> {
    let o = archive.ontology();
    let compiled = query.expr.as_ref().map(|e| compile(e, o)).transpose()?;
    let index = archive.index();
    let mut stats = QueryStats {
        mode,
        ..QueryStats::default()
    };
    let mut loaded: Vec<ScenarioDocument> = Vec::new();
    let ids: BTreeSet<String> = match (&compiled, mode) {
        (None, _) => index.ids().map(str::to_owned).collect(),
        (Some(c), EvalMode::Index) => {
            let universe: BTreeSet<String> = index.ids().map(str::to_owned).collect();
            index_eval(c, index, &universe, &mut stats)
        }
        (Some(c), EvalMode::Scan) => {
            let mut out = BTreeSet::new();
            for id in index.ids() {
                let doc = archive.load(id)?;
                stats.documents_scanned += 1;
                let summary = index.summary(id).expect("indexed id has a summary");
                if doc_matches(c, &doc, summary) {
                    out.insert(id.to_owned());
                    if projection == Projection::Full {
                        loaded.push(doc);
                    }
                }
            }
            out
        }
    };
    let ids: Vec<String> = ids.into_iter().collect();
    let mut result = QueryResult {
        ids,
        summaries: Vec::new(),
        documents: Vec::new(),
        stats,
    };
    match projection {
        Projection::Ids => {}
        Projection::Summaries => {
            result.summaries = result
                .ids
                .iter()
                .filter_map(|id| index.summary(id).cloned())
                .collect();
        }
        Projection::Full => {
            if loaded.len() == result.ids.len() {
                result.documents = loaded;
            } else {
                result.documents = result
                    .ids
                    .iter()
                    .map(|id| archive.load(id))
                    .collect::<Result<_, _>>()?;
            }
        }
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServedBy {
    /// (parameter, value) index entries.
    Index,
    /// Per-document summary fields kept in the index.
    Summary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomExplanation {
    pub atom: String,
    pub served_by: ServedBy,
    /// Literal keys for `has`, the expanded instance set for `isa`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expansion: Option<Vec<String>>,
    /// `isa` only: every coded entry under the parameter also matches.
    #[serde(default)]
    pub coded_entries_match: bool,
    /// Expansion keys that currently have index entries.
    #[serde(default)]
    pub indexed_keys: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub atoms: Vec<AtomExplanation>,
}

/// Shows how each atom would be evaluated. With an index, also lists which
/// expanded keys are present in it.
pub fn explain(query: &Query, o: &Ontology, index: Option<&Index>) -> Result<Explanation, QueryError> {
    let mut atoms = Vec::new();
    for atom in query.atoms() {
        let resolved = resolve(atom, o)?;
        atoms.push(match resolved {
            Some(k) => {
                let indexed_keys = match index {
                    Some(idx) => k
                        .keys
                        .iter()
                        .filter(|key| {
                            idx.lookup(k.parameter, &ValueKey::Instance((*key).clone())).is_some()
                                || idx.lookup(k.parameter, &ValueKey::Code((*key).clone())).is_some()
                        })
                        .cloned()
                        .collect(),
                    None => Vec::new(),
                };
                AtomExplanation {
                    atom: atom.to_string(),
                    served_by: ServedBy::Index,
                    expansion: Some(k.keys.into_iter().collect()),
                    coded_entries_match: k.all_coded,
                    indexed_keys,
                }
            }
            None => AtomExplanation {
                atom: atom.to_string(),
                served_by: ServedBy::Summary,
                expansion: None,
                coded_entries_match: false,
                indexed_keys: Vec::new(),
            },
        });
    }
    Ok(Explanation { atoms })
}
