//! Corpus directory discovery. Every `*.txt` file is one case whose id is
//! the file stem, unless an optional `corpus.toml` maps file names to ids:
//!
//! ```toml
//! [cases]
//! "united-states-v-doe.txt" = "case_01"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::Deserialize;

pub const CORPUS_MANIFEST: &str = "corpus.toml";

#[derive(Debug, thiserror::Error)]
pub enum CorpusIoError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corpus manifest: {0}")]
    Manifest(String),
    #[error("invalid case id {0:?}: use letters, digits, '.', '_' or '-'")]
    BadCaseId(String),
    #[error("case id {0:?} is used by more than one file")]
    DuplicateCaseId(String),
    #[error("corpus directory {0} contains no .txt files")]
    Empty(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusEntry {
    pub case_id: String,
    pub path: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    #[serde(default)]
    cases: BTreeMap<String, String>,
}

/// Case ids become directory and file names, so they are restricted.
pub fn valid_case_id(id: &str) -> bool {
    !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

/// Lists cases sorted by case id.
pub fn discover(dir: &Path) -> Result<Vec<CorpusEntry>, CorpusIoError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CorpusIoError::Io { path, source }
    };
    let manifest_path = dir.join(CORPUS_MANIFEST);
    let manifest: ManifestFile = if manifest_path.is_file() {
        let text = std::fs::read_to_string(&manifest_path).map_err(io(&manifest_path))?;
        toml::from_str(&text).map_err(|e| CorpusIoError::Manifest(e.to_string()))?
    } else {
        ManifestFile::default()
    };
    let mut files = BTreeSet::new();
    for entry in std::fs::read_dir(dir).map_err(io(dir))? {
        let path = entry.map_err(io(dir))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "txt") {
            files.insert(path);
        }
    }
    for name in manifest.cases.keys() {
        if !files.contains(&dir.join(name)) {
            return Err(CorpusIoError::Manifest(format!("{name} is not a .txt file in the corpus")));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for path in files {
        let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let case_id = match manifest.cases.get(&file_name) {
            Some(id) => id.clone(),
            None => path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string(),
        };
        if !valid_case_id(&case_id) {
            return Err(CorpusIoError::BadCaseId(case_id));
        }
        if !seen.insert(case_id.clone()) {
            return Err(CorpusIoError::DuplicateCaseId(case_id));
        }
        out.push(CorpusEntry { case_id, path });
    }
    if out.is_empty() {
        return Err(CorpusIoError::Empty(dir.to_path_buf()));
    }
    out.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok(out)
}
