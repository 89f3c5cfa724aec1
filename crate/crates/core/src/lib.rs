//! Knowledge base for railway accident scenarios.
//!
//! Scenarios are described statically by an eight-parameter fact sheet whose
//! values come from a two-layer safety ontology, and dynamically by a Petri
//! net whose reachable critical markings are recorded as sequencing tables.
//! Documents are archived as XML and consulted through a small query
//! language with subsumption over the ontology.

pub mod ontology;
pub mod petri;
pub mod query;
pub mod report;
pub mod scenario;
pub mod seed;
pub mod store;
mod xml;

pub use xml::FormatError;
