use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::UNIX_EPOCH;

use serde::{Deserialize, Serialize};

use super::{now, DocSummary, DocumentError, Index, ScenarioDocument, Status, StoreError};
use crate::ontology::Ontology;
use crate::scenario::{default_schema, is_valid_scenario_id, unregistered_codes};

pub const INDEX_FILE: &str = ".index";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebuildStats {
    pub scanned: usize,
    pub documents: usize,
    pub entries: usize,
    /// File names skipped, with the reason.
    pub corrupt: Vec<(String, String)>,
}

/// A flat directory of `<id>.xml` documents plus the `.index` cache.
///
/// One `Archive` value is the single writer for its directory; share it
/// behind a lock for concurrent readers. Nothing guards against a second
/// process writing the same directory.
#[derive(Debug)]
pub struct Archive {
    root: PathBuf,
    ontology: Arc<Ontology>,
    ontology_file: Option<PathBuf>,
    index: Index,
    opened_with: Option<RebuildStats>,
}

/// Writes `bytes` to `path` through a temp file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::Builder::new().prefix(".tmp-").tempfile_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn fingerprint(path: &Path) -> io::Result<(u64, i128)> {
    let meta = fs::metadata(path)?;
    let mtime = meta
        .modified()?
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos() as i128)
        .unwrap_or(0);
    Ok((meta.len(), mtime))
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl Archive {
    /// Opens (creating if needed) the archive at `root`. A missing or stale
    /// index is rebuilt from the files.
    pub fn open(root: impl AsRef<Path>, ontology: Arc<Ontology>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let mut archive = Self {
            root,
            ontology,
            ontology_file: None,
            index: Index::new(),
            opened_with: None,
        };
        let cached = fs::read_to_string(archive.root.join(INDEX_FILE))
            .ok()
            .and_then(|text| serde_json::from_str::<Index>(&text).ok());
        match cached {
            Some(index) if archive.is_current(&index)? => archive.index = index,
            _ => {
                let stats = archive.rebuild_index()?;
                archive.opened_with = Some(stats);
            }
        }
        Ok(archive)
    }

    /// Where newly registered codes are persisted as ontology instances.
    pub fn with_ontology_file(mut self, path: impl Into<PathBuf>) -> Self {
        self.ontology_file = Some(path.into());
        self
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn ontology(&self) -> &Arc<Ontology> {
        &self.ontology
    }

    /// Swaps in a new ontology snapshot; documents are not re-checked.
    pub fn set_ontology(&mut self, ontology: Arc<Ontology>) {
        self.ontology = ontology;
    }

    pub fn index(&self) -> &Index {
        &self.index
    }

    /// Statistics of the rebuild done by `open`, if the cached index was
    /// missing or stale.
    pub fn open_rebuild(&self) -> Option<&RebuildStats> {
        self.opened_with.as_ref()
    }

    pub fn path_of(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.xml"))
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains(id)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    fn document_files(&self) -> Result<Vec<(String, PathBuf)>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let path = entry.path();
            let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
            if name.starts_with('.') || !path.is_file() {
                continue;
            }
            if let Some(id) = name.strip_suffix(".xml") {
                out.push((id.to_owned(), path.clone()));
            }
        }
        out.sort();
        Ok(out)
    }

    fn is_current(&self, index: &Index) -> Result<bool, StoreError> {
        let files = self.document_files()?;
        let skipped: BTreeMap<&str, (u64, i128)> = index.skipped().collect();
        if files.len() != index.len() + skipped.len() {
            return Ok(false);
        }
        for (id, path) in files {
            let expected = match index.summary(&id) {
                Some(s) => Some(s.fingerprint),
                None => skipped.get(id.as_str()).copied(),
            };
            if expected.is_none() || fingerprint(&path).ok() != expected {
                return Ok(false);
            }
        }
        Ok(true)
    }

    fn write_index(&self) -> Result<(), StoreError> {
        let path = self.root.join(INDEX_FILE);
        let json = serde_json::to_vec(&self.index).expect("index serializes");
        write_atomic(&path, &json).map_err(io_err(&path))
    }

    fn read_checked(&self, id: &str, path: &Path) -> Result<ScenarioDocument, StoreError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let doc = ScenarioDocument::from_xml(&text).map_err(|e| match e {
            DocumentError::Format(source) => StoreError::Parse {
                id: id.to_owned(),
                source,
            },
            DocumentError::Invariant(problems) => StoreError::InvariantViolation {
                id: id.to_owned(),
                problems,
            },
        })?;
        let mut problems = doc.invariant_violations(&self.ontology);
        if doc.id() != id {
            problems.push(format!("file name says `{id}` but the document id is `{}`", doc.id()));
        }
        if problems.is_empty() {
            Ok(doc)
        } else {
            Err(StoreError::InvariantViolation {
                id: id.to_owned(),
                problems,
            })
        }
    }

    /// Writes the document, refreshing its `modified` stamp. Fails with
    /// `IdConflict` if the id exists and `overwrite` is false.
    pub fn save(&mut self, doc: &mut ScenarioDocument, overwrite: bool) -> Result<String, StoreError> {
        let id = doc.id().to_owned();
        if !is_valid_scenario_id(&id) {
            return Err(StoreError::InvalidId(id));
        }
        let path = self.path_of(&id);
        if !overwrite && (self.index.contains(&id) || path.exists()) {
            return Err(StoreError::IdConflict(id));
        }
        let problems = doc.invariant_violations(&self.ontology);
        if !problems.is_empty() {
            return Err(StoreError::InvariantViolation { id, problems });
        }
        let previous = doc.meta.modified;
        doc.meta.modified = now().max(doc.meta.created);
        if let Err(e) = write_atomic(&path, doc.to_xml().as_bytes()) {
            doc.meta.modified = previous;
            return Err(io_err(&path)(e));
        }
        self.index.insert(doc, fingerprint(&path).map_err(io_err(&path))?);
        self.write_index()?;
        self.register_codes(doc)?;
        Ok(id)
    }

    /// New codes become ontology instances under their parameter's anchor.
    fn register_codes(&mut self, doc: &ScenarioDocument) -> Result<(), StoreError> {
        let Ok(schema) = default_schema(&self.ontology) else { return Ok(()) };
        let fresh = unregistered_codes(&doc.sheet, &schema, &self.ontology);
        if fresh.is_empty() {
            return Ok(());
        }
        let next = self.ontology.with_instances(fresh).map_err(StoreError::Ontology)?;
        if let Some(path) = &self.ontology_file {
            write_atomic(path, next.to_xml().as_bytes()).map_err(io_err(path))?;
        }
        self.ontology = Arc::new(next);
        Ok(())
    }

    /// Reads and fully re-checks a stored document.
    pub fn load(&self, id: &str) -> Result<ScenarioDocument, StoreError> {
        let path = self.path_of(id);
        if !is_valid_scenario_id(id) || !path.is_file() {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        self.read_checked(id, &path)
    }

    pub fn remove(&mut self, id: &str) -> Result<(), StoreError> {
        let path = self.path_of(id);
        if !is_valid_scenario_id(id) || !path.is_file() {
            return Err(StoreError::NotFound(id.to_owned()));
        }
        fs::remove_file(&path).map_err(io_err(&path))?;
        self.index.remove(id);
        self.write_index()
    }

    /// Summaries sorted by id, optionally restricted to one status.
    pub fn list(&self, status: Option<Status>) -> Vec<DocSummary> {
        self.index
            .summaries()
            .filter(|s| status.is_none_or(|st| s.status == st))
            .cloned()
            .collect()
    }

    /// Re-reads every document file. Unreadable or invalid files are
    /// skipped and reported.
    pub fn rebuild_index(&mut self) -> Result<RebuildStats, StoreError> {
        let mut index = Index::new();
        let mut stats = RebuildStats::default();
        for (id, path) in self.document_files()? {
            stats.scanned += 1;
            let name = format!("{id}.xml");
            let fp = fingerprint(&path).map_err(io_err(&path))?;
            if !is_valid_scenario_id(&id) {
                index.skip(&id, fp);
                stats.corrupt.push((name, "file name is not a valid scenario id".into()));
                continue;
            }
            match self.read_checked(&id, &path) {
                Ok(doc) => index.insert(&doc, fp),
                Err(e) => {
                    index.skip(&id, fp);
                    stats.corrupt.push((name, e.to_string()));
                }
            }
        }
        stats.documents = index.len();
        stats.entries = index.entry_count();
        self.index = index;
        self.write_index()?;
        Ok(stats)
    }
}
