use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ParameterId, ScenarioError, ScenarioSheet, Selection};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParameterDiff {
    pub added: Vec<Selection>,
    pub removed: Vec<Selection>,
    /// Same value key, different flag, count or description: (before, after).
    pub changed: Vec<(Selection, Selection)>,
}

impl ParameterDiff {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

/// Per-parameter selection changes from one sheet to another. Only
/// parameters with at least one change are present.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetDiff {
    pub parameters: BTreeMap<ParameterId, ParameterDiff>,
}

impl SheetDiff {
    pub fn is_empty(&self) -> bool {
        self.parameters.is_empty()
    }

    /// Applies the selection changes to `sheet`. Header fields are kept.
    pub fn apply(&self, sheet: &ScenarioSheet) -> ScenarioSheet {
        let mut out = sheet.clone();
        for (p, d) in &self.parameters {
            let list = out.selections.entry(*p).or_default();
            let removed: BTreeSet<&str> = d.removed.iter().map(Selection::value_key).collect();
            list.retain(|s| !removed.contains(s.value_key()));
            for (before, after) in &d.changed {
                if let Some(slot) = list.iter_mut().find(|s| s.value_key() == before.value_key()) {
                    *slot = after.clone();
                }
            }
            list.extend(d.added.iter().cloned());
        }
        out.selections.retain(|_, v| !v.is_empty());
        out
    }
}

fn keyed(p: ParameterId, list: &[Selection]) -> Result<BTreeMap<&str, &Selection>, ScenarioError> {
    let mut map = BTreeMap::new();
    for s in list {
        if map.insert(s.value_key(), s).is_some() {
            return Err(ScenarioError::SchemaMismatch(format!(
                "`{}` appears twice under `{p}`",
                s.value_key()
            )));
        }
    }
    Ok(map)
}

/// Set difference of selections keyed by instance id or code. Sheets with a
/// repeated value under one parameter do not fit the schema's set semantics
/// and are rejected.
pub fn diff_sheets(a: &ScenarioSheet, b: &ScenarioSheet) -> Result<SheetDiff, ScenarioError> {
    let mut diff = SheetDiff::default();
    for p in ParameterId::ALL {
        let left = keyed(p, a.selections(p))?;
        let right = keyed(p, b.selections(p))?;
        let mut d = ParameterDiff::default();
        for (k, s) in &left {
            match right.get(k) {
                None => d.removed.push((*s).clone()),
                Some(t) if t != s => d.changed.push(((*s).clone(), (*t).clone())),
                Some(_) => {}
            }
        }
        for (k, t) in &right {
            if !left.contains_key(k) {
                d.added.push((*t).clone());
            }
        }
        if !d.is_empty() {
            diff.parameters.insert(p, d);
        }
    }
    Ok(diff)
}
