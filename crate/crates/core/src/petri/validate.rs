use std::collections::{BTreeMap, BTreeSet};

use super::{Aspect, PetriNet};
use crate::report::ValidationReport;

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Place,
    Transition,
}

/// Structural checks on a net. Errors: empty or duplicate ids, arcs with
/// unresolved endpoints, place-to-place or transition-to-transition arcs,
/// zero weights, repeated (source, target) pairs. Warnings: nodes without
/// arcs and aspects with no element.
pub fn validate_net(net: &PetriNet) -> ValidationReport {
    let mut report = ValidationReport::new();
    let mut kinds: BTreeMap<&str, Kind> = BTreeMap::new();

    let nodes = net
        .places
        .iter()
        .map(|p| (p.id.as_str(), Kind::Place))
        .chain(net.transitions.iter().map(|t| (t.id.as_str(), Kind::Transition)));
    for (id, kind) in nodes {
        if id.is_empty() {
            report.error(None, "empty-id", "node with an empty id");
            continue;
        }
        if kinds.insert(id, kind).is_some() {
            report.error(Some(id), "duplicate-id", format!("id `{id}` is declared more than once"));
        }
    }

    let mut pairs = BTreeSet::new();
    let mut touched: BTreeSet<&str> = BTreeSet::new();
    for arc in &net.arcs {
        let label = format!("{} -> {}", arc.source, arc.target);
        let src = kinds.get(arc.source.as_str());
        let dst = kinds.get(arc.target.as_str());
        if src.is_none() || dst.is_none() {
            let missing = if src.is_none() { &arc.source } else { &arc.target };
            report.error(
                Some(&label),
                "dangling-arc",
                format!("arc endpoint `{missing}` is not declared"),
            );
        } else if src == dst {
            let what = if src == Some(&Kind::Place) { "two places" } else { "two transitions" };
            report.error(Some(&label), "non-bipartite", format!("arc connects {what}"));
        } else {
            touched.insert(&arc.source);
            touched.insert(&arc.target);
        }
        if arc.weight == 0 {
            report.error(Some(&label), "zero-weight", "arc weight must be at least 1");
        }
        if !pairs.insert((arc.source.as_str(), arc.target.as_str())) {
            report.error(Some(&label), "duplicate-arc", "arc is declared more than once");
        }
    }

    // Only well-formed arcs count as connections.
    for (id, kind) in &kinds {
        if !touched.contains(id) {
            let what = if *kind == Kind::Place { "place" } else { "transition" };
            report.warning(Some(id), "isolated", format!("{what} `{id}` has no arcs"));
        }
    }

    let present: BTreeSet<Aspect> = net
        .places
        .iter()
        .map(|p| p.aspect)
        .chain(net.transitions.iter().map(|t| t.aspect))
        .collect();
    for aspect in Aspect::ALL {
        if !present.contains(&aspect) {
            report.warning(
                None,
                "aspect-coverage",
                format!("no element models the {aspect} aspect"),
            );
        }
    }
    report
}
