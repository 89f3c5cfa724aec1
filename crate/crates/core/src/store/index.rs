//! Derived lookup cache over the archived documents. Everything in here can
//! be recomputed from the files, and `Archive::rebuild_index` does exactly that.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ScenarioDocument, Status};
use crate::scenario::{ParameterId, Selection};

/// Selection key as indexed: an ontology instance id or a free code.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum ValueKey {
    Instance(String),
    Code(String),
}

impl ValueKey {
    pub fn of(s: &Selection) -> Self {
        match s {
            Selection::Value(v) => ValueKey::Instance(v.instance.clone()),
            Selection::Coded(c) => ValueKey::Code(c.code.clone()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            ValueKey::Instance(s) | ValueKey::Code(s) => s,
        }
    }
}

/// Per-document handle: what a listing shows and what non-parameter query
/// atoms need.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocSummary {
    pub id: String,
    pub title: String,
    pub status: Status,
    pub modified: DateTime<Utc>,
    pub transport_system: String,
    pub train_count: Option<u32>,
    pub has_critical: bool,
    /// Key-concept selections as `parameter:value`.
    pub key_concepts: Vec<String>,
    /// File size and modification time when indexed; used to detect edits
    /// made behind the archive's back.
    pub fingerprint: (u64, i128),
}

impl DocSummary {
    pub fn of(doc: &ScenarioDocument, fingerprint: (u64, i128)) -> Self {
        Self {
            id: doc.id().to_owned(),
            title: doc.sheet.title.clone(),
            status: doc.meta.status,
            modified: doc.meta.modified,
            transport_system: doc.sheet.transport_system.clone(),
            train_count: doc.sheet.train_count(),
            has_critical: doc.has_critical_table(),
            key_concepts: crate::scenario::key_concepts(&doc.sheet)
                .into_iter()
                .map(|(p, s)| format!("{p}:{}", s.value_key()))
                .collect(),
            fingerprint,
        }
    }
}

type Entries = BTreeMap<(ParameterId, ValueKey), BTreeSet<String>>;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Index {
    #[serde(with = "entries_as_list")]
    entries: Entries,
    docs: BTreeMap<String, DocSummary>,
    /// Files that failed to load, by id, with their fingerprint.
    #[serde(default)]
    skipped: BTreeMap<String, (u64, i128)>,
}

impl Index {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc: &ScenarioDocument, fingerprint: (u64, i128)) {
        self.remove(doc.id());
        let id = doc.id().to_owned();
        for (p, list) in &doc.sheet.selections {
            for s in list {
                self.entries
                    .entry((*p, ValueKey::of(s)))
                    .or_default()
                    .insert(id.clone());
            }
        }
        self.docs.insert(id, DocSummary::of(doc, fingerprint));
    }

    /// Records a document file that could not be loaded.
    pub fn skip(&mut self, id: &str, fingerprint: (u64, i128)) {
        self.remove(id);
        self.skipped.insert(id.to_owned(), fingerprint);
    }

    pub fn skipped(&self) -> impl Iterator<Item = (&str, (u64, i128))> {
        self.skipped.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn remove(&mut self, id: &str) {
        self.skipped.remove(id);
        if self.docs.remove(id).is_none() {
            return;
        }
        self.entries.retain(|_, ids| {
            ids.remove(id);
            !ids.is_empty()
        });
    }

    /// Ids of documents selecting `key` under `parameter`.
    pub fn lookup(&self, parameter: ParameterId, key: &ValueKey) -> Option<&BTreeSet<String>> {
        self.entries.get(&(parameter, key.clone()))
    }

    /// Ids of documents with at least one coded entry under `parameter`.
    pub fn coded_under(&self, parameter: ParameterId) -> BTreeSet<String> {
        self.entries
            .range((parameter, ValueKey::Code(String::new()))..)
            .take_while(|((p, k), _)| *p == parameter && matches!(k, ValueKey::Code(_)))
            .flat_map(|(_, ids)| ids.iter().cloned())
            .collect()
    }

    pub fn keys(&self) -> impl Iterator<Item = (ParameterId, &ValueKey)> {
        self.entries.keys().map(|(p, k)| (*p, k))
    }

    pub fn summary(&self, id: &str) -> Option<&DocSummary> {
        self.docs.get(id)
    }

    pub fn summaries(&self) -> impl Iterator<Item = &DocSummary> {
        self.docs.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.docs.keys().map(String::as_str)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.docs.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Number of (parameter, value, id) triples.
    pub fn entry_count(&self) -> usize {
        self.entries.values().map(BTreeSet::len).sum()
    }
}

mod entries_as_list {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        parameter: ParameterId,
        key: ValueKey,
        ids: BTreeSet<String>,
    }

    pub fn serialize<S: Serializer>(
        map: &Entries,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter().map(|((p, k), ids)| Entry {
            parameter: *p,
            key: k.clone(),
            ids: ids.clone(),
        }))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Entries, D::Error> {
        let list: Vec<Entry> = Vec::deserialize(d)?;
        Ok(list.into_iter().map(|e| ((e.parameter, e.key), e.ids)).collect())
    }
}
