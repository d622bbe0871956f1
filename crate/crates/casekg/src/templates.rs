//! Coreference template directories: one `<type>.txt` file per entity type
//! (for example `means_of_transportation.txt`) in the sectioned text format.

use std::path::{Path, PathBuf};

use casekg_core::coref::{template_file_stem, CorefError, CorefPromptTemplate, TemplateSet};
use casekg_core::EntityType;

#[derive(Debug, thiserror::Error)]
pub enum TemplateDirError {
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Template { path: PathBuf, source: CorefError },
    #[error("{path} declares entity type {found}, expected {expected}")]
    WrongType { path: PathBuf, found: EntityType, expected: EntityType },
}

pub fn template_path(dir: &Path, entity_type: EntityType) -> PathBuf {
    dir.join(format!("{}.txt", template_file_stem(entity_type)))
}

/// Loads templates for `types`; every listed type needs a file.
pub fn load_template_dir(dir: &Path, types: &[EntityType]) -> Result<TemplateSet, TemplateDirError> {
    let mut set = TemplateSet::default();
    for &t in types {
        let path = template_path(dir, t);
        let text =
            std::fs::read_to_string(&path).map_err(|source| TemplateDirError::Io { path: path.clone(), source })?;
        let template = CorefPromptTemplate::parse(&text)
            .map_err(|source| TemplateDirError::Template { path: path.clone(), source })?;
        if template.entity_type != t {
            return Err(TemplateDirError::WrongType { path, found: template.entity_type, expected: t });
        }
        template.validate().map_err(|source| TemplateDirError::Template { path: path.clone(), source })?;
        set.insert(template);
    }
    Ok(set)
}

/// Writes the built-in templates into `dir` for editing; existing files are kept.
pub fn export_builtin_templates(dir: &Path) -> Result<Vec<PathBuf>, TemplateDirError> {
    std::fs::create_dir_all(dir).map_err(|source| TemplateDirError::Io { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    for t in EntityType::ALL {
        let path = template_path(dir, t);
        if path.exists() {
            continue;
        }
        std::fs::write(&path, CorefPromptTemplate::builtin_source(t))
            .map_err(|source| TemplateDirError::Io { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}
