//! Paths inside a run output directory.

use std::path::{Path, PathBuf};

use casekg_core::Mode;

#[derive(Debug, Clone)]
pub struct RunLayout {
    root: PathBuf,
}

impl RunLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn run_log(&self) -> PathBuf {
        self.root.join("run_log.json")
    }

    pub fn audit_log(&self) -> PathBuf {
        self.root.join("audit.jsonl")
    }

    pub fn case_dir(&self, case_id: &str) -> PathBuf {
        self.root.join("cases").join(case_id)
    }

    pub fn opinion(&self, case_id: &str) -> PathBuf {
        self.case_dir(case_id).join("opinion.txt")
    }

    pub fn coref_text(&self, case_id: &str) -> PathBuf {
        self.case_dir(case_id).join("coref.txt")
    }

    pub fn coref_trace(&self, case_id: &str) -> PathBuf {
        self.case_dir(case_id).join("coref_trace.jsonl")
    }

    pub fn chunks(&self, case_id: &str) -> PathBuf {
        self.case_dir(case_id).join("chunks.jsonl")
    }

    pub fn raw_dir(&self, case_id: &str) -> PathBuf {
        self.case_dir(case_id).join("raw")
    }

    pub fn raw_output(&self, case_id: &str, chunk_id: usize) -> PathBuf {
        self.raw_dir(case_id).join(format!("chunk_{chunk_id:04}.txt"))
    }

    pub fn records(&self, case_id: &str) -> PathBuf {
        self.case_dir(case_id).join("records.json")
    }

    pub fn case_summary(&self, case_id: &str) -> PathBuf {
        self.case_dir(case_id).join("case.json")
    }

    pub fn graphml(&self, case_id: &str, mode: Mode) -> PathBuf {
        self.root.join("graphs").join(format!("{case_id}.{mode}.graphml"))
    }

    pub fn node_table(&self, case_id: &str, mode: Mode) -> PathBuf {
        self.root.join("tables").join(format!("{case_id}.{mode}.nodes.csv"))
    }

    pub fn edge_table(&self, case_id: &str, mode: Mode) -> PathBuf {
        self.root.join("tables").join(format!("{case_id}.{mode}.edges.csv"))
    }

    pub fn eval_dir(&self) -> PathBuf {
        self.root.join("eval")
    }

    pub fn metrics(&self) -> PathBuf {
        self.eval_dir().join("metrics.json")
    }
}
