//! Archive of scenario documents: one XML file per scenario in a flat
//! directory, with a rebuildable JSON index beside them.

mod archive;
mod document;
mod index;

use std::path::PathBuf;

use thiserror::Error;

use crate::ontology::OntologyError;
use crate::xml::FormatError;

pub use archive::{write_atomic, Archive, RebuildStats, INDEX_FILE};
pub use document::{now, DocumentError, Meta, NetModel, ScenarioDocument, Status};
pub use index::{DocSummary, Index, ValueKey};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("scenario `{0}` not found")]
    NotFound(String),
    #[error("scenario `{0}` already exists (pass overwrite to replace it)")]
    IdConflict(String),
    #[error("`{0}` is not a valid scenario id")]
    InvalidId(String),
    #[error("scenario `{id}`: {source}")]
    Parse { id: String, source: FormatError },
    #[error("scenario `{id}` violates invariants: {}", .problems.join("; "))]
    InvariantViolation { id: String, problems: Vec<String> },
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Ontology(OntologyError),
}

impl StoreError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::NotFound(_) => "not-found",
            StoreError::IdConflict(_) => "id-conflict",
            StoreError::InvalidId(_) => "invalid-id",
            StoreError::Parse { .. } => "parse-error",
            StoreError::InvariantViolation { .. } => "invariant-violation",
            StoreError::Io { .. } => "storage-error",
            StoreError::Ontology(_) => "ontology-error",
        }
    }
}
