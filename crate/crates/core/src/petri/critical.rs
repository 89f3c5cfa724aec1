//! Critical-situation search and marking sequencing tables.
//!
//! A sequencing table records an initial marking, the chronology of fired
//! transitions with the marking after each one, and whether the final
//! marking is a critical (pre-accident) situation.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::engine::CompiledNet;
use super::{CriticalPredicate, ExplorationBounds, Explorer, Marking, PetriError, PetriNet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRow {
    pub transition: String,
    pub marking: Marking,
    /// Defaults to the transition label; free to be renamed by an expert.
    pub situation_label: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequencingTable {
    pub initial: Marking,
    pub rows: Vec<SequenceRow>,
    pub critical: bool,
    /// Predicate the table was produced under.
    pub predicate: CriticalPredicate,
}

impl SequencingTable {
    pub fn final_marking(&self) -> &Marking {
        self.rows.last().map(|r| &r.marking).unwrap_or(&self.initial)
    }

    pub fn chronology(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.transition.as_str()).collect()
    }

    /// Re-fires the chronology from the initial marking, checking every row
    /// and, for a critical table, the predicate on the final marking.
    pub fn replay(&self, net: &PetriNet) -> Result<(), ReplayError> {
        let c = CompiledNet::new(net).map_err(ReplayError::Net)?;
        self.predicate.check(net).map_err(ReplayError::Net)?;
        let mut state = c.encode(&self.initial).map_err(ReplayError::Net)?;
        for (i, row) in self.rows.iter().enumerate() {
            let t = c.transition(&row.transition).map_err(ReplayError::Net)?;
            if !c.is_enabled(&state, t) {
                return Err(ReplayError::NotEnabled { row: i, transition: row.transition.clone() });
            }
            state = c.successor(&state, t).map_err(ReplayError::Net)?;
            if c.decode(&state) != row.marking {
                return Err(ReplayError::MarkingMismatch { row: i });
            }
        }
        if self.critical && !self.predicate.holds(self.final_marking()) {
            return Err(ReplayError::NotCritical);
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Net(PetriError),
    #[error("row {row}: transition `{transition}` is not enabled")]
    NotEnabled { row: usize, transition: String },
    #[error("row {row}: stored marking differs from the fired one")]
    MarkingMismatch { row: usize },
    #[error("table is flagged critical but its final marking does not satisfy the predicate")]
    NotCritical,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalOptions {
    /// Report every simple firing path (no repeated marking) within the depth
    /// bound that ends at its first critical marking, instead of one shortest
    /// path per critical marking. Meant for small nets.
    #[serde(default)]
    pub all_paths: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriticalReport {
    pub tables: Vec<SequencingTable>,
    pub markings_explored: usize,
    pub truncated: bool,
    pub cancelled: bool,
}

/// One table per distinct critical marking reachable within bounds, each
/// carrying the shortest firing path from `m0` (ties broken by the
/// lexicographically smallest transition-id sequence). Tables are sorted by
/// path length, then path.
pub fn find_critical(
    net: &PetriNet,
    m0: &Marking,
    predicate: &CriticalPredicate,
    bounds: ExplorationBounds,
    options: CriticalOptions,
) -> Result<CriticalReport, PetriError> {
    find_critical_with(&Explorer::new(bounds), net, m0, predicate, options)
}

impl Explorer {
    /// [`find_critical`] under this explorer's bounds, cancel flag and
    /// deadline. A stop leaves the tables found so far, flagged cancelled.
    pub fn find_critical(
        &self,
        net: &PetriNet,
        m0: &Marking,
        predicate: &CriticalPredicate,
        options: CriticalOptions,
    ) -> Result<CriticalReport, PetriError> {
        find_critical_with(self, net, m0, predicate, options)
    }
}

fn find_critical_with(
    explorer: &Explorer,
    net: &PetriNet,
    m0: &Marking,
    predicate: &CriticalPredicate,
    options: CriticalOptions,
) -> Result<CriticalReport, PetriError> {
    explorer.bounds.check()?;
    predicate.check(net)?;
    m0.check(net)?;
    let labels = |t: &str| {
        net.find_transition(t)
            .map(|t| t.label.clone())
            .unwrap_or_default()
    };

    let mut report = if options.all_paths {
        all_paths(explorer, net, m0, predicate, &labels)?
    } else {
        let graph = explorer.explore(net, m0)?;
        let tables = (0..graph.markings.len())
            .filter(|&i| predicate.holds(&graph.markings[i]))
            .map(|i| SequencingTable {
                initial: m0.clone(),
                rows: graph
                    .path_to(i)
                    .into_iter()
                    .map(|e| SequenceRow {
                        transition: e.transition.clone(),
                        marking: graph.markings[e.to].clone(),
                        situation_label: labels(&e.transition),
                    })
                    .collect(),
                critical: true,
                predicate: predicate.clone(),
            })
            .collect();
        CriticalReport {
            tables,
            markings_explored: graph.markings.len(),
            truncated: graph.truncated,
            cancelled: graph.cancelled,
        }
    };
    report
        .tables
        .sort_by(|a, b| (a.rows.len(), a.chronology()).cmp(&(b.rows.len(), b.chronology())));
    Ok(report)
}

fn all_paths(
    explorer: &Explorer,
    net: &PetriNet,
    m0: &Marking,
    predicate: &CriticalPredicate,
    labels: &dyn Fn(&str) -> String,
) -> Result<CriticalReport, PetriError> {
    let c = CompiledNet::new(net)?;
    let bounds = explorer.bounds;
    let mut report = CriticalReport {
        tables: Vec::new(),
        markings_explored: 0,
        truncated: false,
        cancelled: false,
    };
    let table = |path: &[(usize, Vec<u32>)]| SequencingTable {
        initial: m0.clone(),
        rows: path
            .iter()
            .map(|(t, s)| SequenceRow {
                transition: c.transitions[*t].to_owned(),
                marking: c.decode(s),
                situation_label: labels(c.transitions[*t]),
            })
            .collect(),
        critical: true,
        predicate: predicate.clone(),
    };

    let start = c.encode(m0)?;
    if predicate.holds(m0) {
        report.tables.push(table(&[]));
        report.markings_explored = 1;
        return Ok(report);
    }

    // Explicit DFS stack of (state, next transition to try).
    let mut on_path: HashSet<Vec<u32>> = HashSet::from([start.clone()]);
    let mut path: Vec<(usize, Vec<u32>)> = Vec::new();
    let mut stack: Vec<(Vec<u32>, usize)> = vec![(start, 0)];
    while let Some((state, next_t)) = stack.pop() {
        if explorer.should_stop() {
            report.cancelled = true;
            report.truncated = true;
            break;
        }
        if next_t >= c.transitions.len() {
            on_path.remove(&state);
            path.pop();
            continue;
        }
        stack.push((state.clone(), next_t + 1));
        if !c.is_enabled(&state, next_t) {
            continue;
        }
        if path.len() >= bounds.max_depth {
            report.truncated = true;
            continue;
        }
        let succ = c.successor(&state, next_t)?;
        if succ.iter().any(|&n| n > bounds.max_tokens) {
            report.truncated = true;
            continue;
        }
        if on_path.contains(&succ) {
            continue;
        }
        report.markings_explored += 1;
        if predicate.holds(&c.decode(&succ)) {
            path.push((next_t, succ));
            report.tables.push(table(&path));
            path.pop();
            if report.tables.len() >= bounds.max_markings {
                report.truncated = true;
                break;
            }
            continue;
        }
        on_path.insert(succ.clone());
        path.push((next_t, succ.clone()));
        stack.push((succ, 0));
    }
    Ok(report)
}
