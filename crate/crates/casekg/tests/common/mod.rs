#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

use casekg::config::RunConfig;
use casekg::gateway::{Backend, MissPolicy, ScriptGateway};
use casekg::pipeline::{Pipeline, RunOutcome};
use casekg_core::Mode;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn corpus() -> PathBuf {
    fixtures().join("corpus")
}

pub fn script_path() -> PathBuf {
    fixtures().join("script.jsonl")
}

pub fn golden(name: &str) -> String {
    fs::read_to_string(fixtures().join("golden").join(name)).unwrap()
}

pub fn config(corpus: &Path, out: &Path, mode: Mode, script: &Path) -> RunConfig {
    let mut cfg = RunConfig::new(corpus, out, mode);
    cfg.gateway.script = Some(script.to_path_buf());
    cfg
}

pub fn pipeline(corpus: &Path, out: &Path, mode: Mode, script: &Path) -> Pipeline {
    Pipeline::new(config(corpus, out, mode, script)).unwrap()
}

/// Runs the fixture corpus with the fixture script into `out`.
pub fn run_fixture(out: &Path, mode: Mode) -> RunOutcome {
    pipeline(&corpus(), out, mode, &script_path()).run(false).unwrap()
}

pub fn script_backend(text: &str) -> Backend {
    Backend::Script(ScriptGateway::parse(text, MissPolicy::Strict).unwrap())
}

pub fn read(path: impl AsRef<Path>) -> String {
    fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

pub fn line_count(path: impl AsRef<Path>) -> usize {
    fs::read_to_string(path).map(|t| t.lines().count()).unwrap_or(0)
}

/// Copies the fixture corpus into `dir` and returns it.
pub fn copy_corpus(dir: &Path) -> PathBuf {
    let dst = dir.join("corpus");
    fs::create_dir_all(&dst).unwrap();
    for e in fs::read_dir(corpus()).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), dst.join(e.file_name())).unwrap();
    }
    dst
}
