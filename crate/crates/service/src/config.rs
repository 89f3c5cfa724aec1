use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use railsafe_core::ontology::{load_ontology, LoadOptions, Ontology};
use railsafe_core::petri::ExplorationBounds;

#[derive(Debug, Clone)]
pub struct ApiConfig {
    pub listen: SocketAddr,
    pub archive: PathBuf,
    pub ontology: PathBuf,
    /// Default exploration limits for simulate requests.
    pub bounds: ExplorationBounds,
    /// Allowed browser origins; `*` allows any.
    pub cors_origins: Vec<String>,
    /// Static bearer token required on every request when set.
    pub token: Option<String>,
    /// Wall-clock budget per simulate request.
    pub time_budget: Duration,
}

impl ApiConfig {
    pub fn new(archive: impl Into<PathBuf>, ontology: impl Into<PathBuf>) -> Self {
        Self {
            listen: SocketAddr::from(([127, 0, 0, 1], 8080)),
            archive: archive.into(),
            ontology: ontology.into(),
            bounds: ExplorationBounds::default(),
            cors_origins: Vec::new(),
            token: None,
            time_budget: Duration::from_secs(10),
        }
    }

    /// Startup checks: the archive is a directory, the ontology is a
    /// readable file, the port is non-zero and the bounds are usable.
    pub fn check(&self) -> Result<(), String> {
        if self.listen.port() == 0 {
            return Err("listen port must be in 1..=65535".into());
        }
        if !self.archive.is_dir() {
            return Err(format!("archive directory {} does not exist (run `railsafe init`)", self.archive.display()));
        }
        if let Err(e) = fs::File::open(&self.ontology) {
            return Err(format!("cannot read ontology {}: {e}", self.ontology.display()));
        }
        self.bounds.check().map_err(|e| e.to_string())
    }
}

/// Loads an ontology file strictly; lint warnings are returned alongside.
pub fn read_ontology(path: &Path) -> Result<(Ontology, Vec<String>), String> {
    let file = fs::File::open(path).map_err(|e| format!("cannot read ontology {}: {e}", path.display()))?;
    let loaded = load_ontology(file, LoadOptions::default())
        .map_err(|e| format!("ontology {}: {e}", path.display()))?;
    Ok((loaded.ontology, loaded.warnings))
}
