//! Dynamic description of a scenario: place/transition nets whose elements
//! are tagged with one of three modelling aspects, a bounded reachability
//! explorer, and the search for critical situations that yields marking
//! sequencing tables.

mod critical;
mod engine;
mod predicate;
mod text;
mod validate;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::ValidationReport;

pub use critical::{find_critical, CriticalOptions, CriticalReport, ReplayError, SequenceRow, SequencingTable};
pub use engine::{enabled, fire, reachability, Edge, ExplorationBounds, Explorer, ReachabilityGraph};
pub use predicate::{Comparator, CriticalPredicate, PredicateParseError};
pub use text::{parse_net_text, to_dot, to_net_text, NetTextError};
pub use validate::validate_net;

/// Which part of the modelled world a node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aspect {
    /// The system's external environment, e.g. trains moving between stations.
    External,
    /// On-board and wayside automation: autopilots, alarms.
    Internal,
    /// Information exchange between the two.
    Interface,
}

impl Aspect {
    pub const ALL: [Aspect; 3] = [Aspect::External, Aspect::Internal, Aspect::Interface];

    pub fn as_str(self) -> &'static str {
        match self {
            Aspect::External => "external",
            Aspect::Internal => "internal",
            Aspect::Interface => "interface",
        }
    }
}

impl fmt::Display for Aspect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Aspect {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "external" => Ok(Aspect::External),
            "internal" => Ok(Aspect::Internal),
            "interface" => Ok(Aspect::Interface),
            other => Err(format!(
                "unknown aspect `{other}` (expected external, internal or interface)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Place {
    pub id: String,
    pub label: String,
    pub aspect: Aspect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transition {
    pub id: String,
    pub label: String,
    pub aspect: Aspect,
    /// Documentation only; never evaluated.
    #[serde(default)]
    pub guard_note: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Arc {
    pub source: String,
    pub target: String,
    pub weight: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PetriNet {
    pub places: Vec<Place>,
    pub transitions: Vec<Transition>,
    pub arcs: Vec<Arc>,
}

impl PetriNet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn place(&mut self, id: &str, label: &str, aspect: Aspect) -> &mut Self {
        self.places.push(Place {
            id: id.into(),
            label: label.into(),
            aspect,
        });
        self
    }

    pub fn transition(&mut self, id: &str, label: &str, aspect: Aspect) -> &mut Self {
        self.transitions.push(Transition {
            id: id.into(),
            label: label.into(),
            aspect,
            guard_note: String::new(),
        });
        self
    }

    pub fn arc(&mut self, source: &str, target: &str, weight: u32) -> &mut Self {
        self.arcs.push(Arc {
            source: source.into(),
            target: target.into(),
            weight,
        });
        self
    }

    pub fn has_place(&self, id: &str) -> bool {
        self.places.iter().any(|p| p.id == id)
    }

    pub fn find_transition(&self, id: &str) -> Option<&Transition> {
        self.transitions.iter().find(|t| t.id == id)
    }
}

/// Token counts per place. Places absent from the map hold zero tokens;
/// zero entries are never stored, so equal markings compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Marking(BTreeMap<String, u32>);

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, place: &str) -> u32 {
        self.0.get(place).copied().unwrap_or(0)
    }

    pub fn set(&mut self, place: impl Into<String>, count: u32) {
        let place = place.into();
        if count == 0 {
            self.0.remove(&place);
        } else {
            self.0.insert(place, count);
        }
    }

    pub fn with(mut self, place: &str, count: u32) -> Self {
        self.set(place, count);
        self
    }

    /// Non-zero entries, sorted by place id.
    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn total(&self) -> u64 {
        self.0.values().map(|&v| u64::from(v)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Fails on the first key that is not a place of `net`.
    pub fn check(&self, net: &PetriNet) -> Result<(), PetriError> {
        match self.0.keys().find(|p| !net.has_place(p)) {
            Some(p) => Err(PetriError::UnknownPlace(p.clone())),
            None => Ok(()),
        }
    }
}

impl<S: Into<String>> FromIterator<(S, u32)> for Marking {
    fn from_iter<I: IntoIterator<Item = (S, u32)>>(iter: I) -> Self {
        let mut m = Marking::new();
        for (p, n) in iter {
            m.set(p, n);
        }
        m
    }
}

impl fmt::Display for Marking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("(empty)");
        }
        let mut first = true;
        for (p, n) in &self.0 {
            if !first {
                f.write_str(", ")?;
            }
            first = false;
            write!(f, "{p}={n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum PetriError {
    #[error("net is not well formed: {}", summarize(.0))]
    InvalidNet(ValidationReport),
    #[error("unknown place `{0}`")]
    UnknownPlace(String),
    #[error("unknown transition `{0}`")]
    UnknownTransition(String),
    #[error("transition `{0}` is not enabled")]
    NotEnabled(String),
    #[error("invalid exploration bound: {0}")]
    InvalidBound(String),
    #[error("token count overflow in place `{0}`")]
    Overflow(String),
}

fn summarize(r: &ValidationReport) -> String {
    r.errors().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}
