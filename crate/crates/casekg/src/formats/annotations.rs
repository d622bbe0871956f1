//! Line-oriented, tab-separated expert inputs: split overrides and noise
//! annotations. Blank lines and lines starting with '#' are ignored.
//!
//! Override line: `case_id<TAB>ENTITY_TYPE<TAB>member name<TAB>new cluster label`
//! Noise line:    `case_id<TAB>node name` (case id `*` applies to every case)

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use casekg_core::eval::{NoiseAnnotation, SplitDirective};
use casekg_core::extraction::Lexicon;
use casekg_core::{normalize_name, EntityType};

#[derive(Debug, thiserror::Error)]
pub enum AnnotationError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
}

fn read(path: &Path) -> Result<String, AnnotationError> {
    std::fs::read_to_string(path).map_err(|source| AnnotationError::Io { path: path.to_path_buf(), source })
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

pub fn parse_overrides(text: &str, path: &Path) -> Result<Vec<SplitDirective>, AnnotationError> {
    let mut out = Vec::new();
    for (line, l) in content_lines(text) {
        let err = |message: String| AnnotationError::Parse { path: path.to_path_buf(), line, message };
        let fields: Vec<&str> = l.split('\t').map(str::trim).collect();
        let [case_id, ty, member, label] = fields[..] else {
            return Err(err(format!("expected 4 tab-separated fields, found {}", fields.len())));
        };
        if case_id.is_empty() || member.is_empty() || label.is_empty() {
            return Err(err("case id, member and label must be non-empty".into()));
        }
        let entity_type: EntityType = ty.parse().map_err(|e| err(format!("{e}")))?;
        out.push(SplitDirective {
            case_id: case_id.into(),
            entity_type,
            member: member.into(),
            new_label: label.into(),
        });
    }
    Ok(out)
}

pub fn load_overrides(path: &Path) -> Result<Vec<SplitDirective>, AnnotationError> {
    parse_overrides(&read(path)?, path)
}

/// Parsed noise annotation file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NoiseFile {
    pub per_case: BTreeMap<String, BTreeSet<String>>,
    pub global: Lexicon,
}

impl NoiseFile {
    pub fn for_case(&self, case_id: &str) -> NoiseAnnotation {
        NoiseAnnotation::from_lexicon(self.global.clone()).with_names(self.per_case.get(case_id).into_iter().flatten())
    }
}

pub fn parse_noise(text: &str, path: &Path) -> Result<NoiseFile, AnnotationError> {
    let mut out = NoiseFile::default();
    let mut global = Vec::new();
    for (line, l) in content_lines(text) {
        let err = |message: &str| AnnotationError::Parse { path: path.to_path_buf(), line, message: message.into() };
        let Some((case_id, name)) = l.split_once('\t') else {
            return Err(err("expected case_id<TAB>name"));
        };
        let (case_id, name) = (case_id.trim(), normalize_name(name));
        if case_id.is_empty() || name.is_empty() {
            return Err(err("case id and name must be non-empty"));
        }
        if case_id == "*" {
            global.push(name);
        } else {
            out.per_case.entry(case_id.into()).or_default().insert(name);
        }
    }
    out.global = Lexicon::new(global);
    Ok(out)
}

pub fn load_noise(path: &Path) -> Result<NoiseFile, AnnotationError> {
    parse_noise(&read(path)?, path)
}

/// The default government lexicon, extended by the terms in `path` if given.
pub fn load_lexicon(path: Option<&Path>) -> Result<Lexicon, AnnotationError> {
    let mut lex = Lexicon::default_government();
    if let Some(p) = path {
        lex.extend(&Lexicon::parse(&read(p)?));
    }
    Ok(lex)
}
