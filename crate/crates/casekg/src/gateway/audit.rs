//! Append-only audit log of every gateway call, and conversion of a log into
//! a digest-keyed replay script.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use casekg_core::gateway::{ChatGateway, CompletionRequest, CompletionResponse, GatewayError};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::script::ScriptLine;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub seq: u64,
    pub digest: String,
    pub model: String,
    pub temperature: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<String>,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend: Option<String>,
    pub started_at: String,
    pub finished_at: String,
    pub latency_ms: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum AuditError {
    #[error("audit log {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("audit log line {line}: {message}")]
    Parse { line: usize, message: String },
}

struct Sink {
    file: Option<File>,
    next_seq: u64,
}

/// Wraps a backend and appends one JSON line per call, failures included.
/// Writes are serialized by a mutex; the wrapper is shareable across threads.
pub struct AuditedGateway<G> {
    inner: G,
    sink: Mutex<Sink>,
    calls: AtomicUsize,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl<G: ChatGateway> AuditedGateway<G> {
    pub fn new(inner: G, log_path: Option<&Path>) -> Result<Self, AuditError> {
        let (file, next_seq) = match log_path {
            Some(path) => {
                let io = |source| AuditError::Io { path: path.to_path_buf(), source };
                let existing = if path.exists() {
                    BufReader::new(File::open(path).map_err(io)?).lines().count() as u64
                } else {
                    0
                };
                let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
                (Some(file), existing)
            }
            None => (None, 0),
        };
        Ok(Self { inner, sink: Mutex::new(Sink { file, next_seq }), calls: AtomicUsize::new(0) })
    }

    /// Calls made through this wrapper since construction.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn inner(&self) -> &G {
        &self.inner
    }
}

impl<G: ChatGateway> ChatGateway for AuditedGateway<G> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let started_at = now();
        let t0 = std::time::Instant::now();
        let result = self.inner.complete(request);
        let latency_ms = t0.elapsed().as_millis() as u64;
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        let record = AuditRecord {
            seq: sink.next_seq,
            digest: request.prompt_digest(),
            model: request.model_id.clone(),
            temperature: request.temperature,
            system: request.system_text.clone(),
            prompt: request.user_text.clone(),
            response: result.as_ref().ok().map(|r| r.text.clone()),
            error: result.as_ref().err().map(|e| e.to_string()),
            backend: result.as_ref().ok().map(|r| r.backend_id.clone()),
            started_at,
            finished_at: now(),
            latency_ms,
        };
        sink.next_seq += 1;
        if let Some(file) = sink.file.as_mut() {
            let line = serde_json::to_string(&record).expect("audit record serializes");
            if let Err(e) = writeln!(file, "{line}").and_then(|_| file.flush()) {
                log::error!("failed to append audit record {}: {e}", record.seq);
            }
        }
        result
    }
}

/// Counts calls routed through it; used for per-case call tallies.
pub struct CountingGateway<'a, G: ?Sized> {
    inner: &'a G,
    calls: AtomicUsize,
}

impl<'a, G: ChatGateway + ?Sized> CountingGateway<'a, G> {
    pub fn new(inner: &'a G) -> Self {
        Self { inner, calls: AtomicUsize::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl<G: ChatGateway + ?Sized> ChatGateway for CountingGateway<'_, G> {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(request)
    }
}

pub fn read_audit_log(path: &Path) -> Result<Vec<AuditRecord>, AuditError> {
    let file = File::open(path).map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| AuditError::Io { path: path.to_path_buf(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| AuditError::Parse { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RecordedScript {
    pub lines: Vec<ScriptLine>,
    /// Digests seen with differing responses; the first response is kept.
    pub conflicting_digests: Vec<String>,
    pub failed_calls_skipped: usize,
}

/// Builds a digest-keyed script from successful audit records. Entries are
/// ordered by digest so the script is stable regardless of call order.
pub fn script_from_audit(records: &[AuditRecord]) -> RecordedScript {
    let mut by_digest: BTreeMap<&str, &str> = BTreeMap::new();
    let mut conflicts = std::collections::BTreeSet::new();
    let mut failed = 0;
    for r in records {
        let Some(resp) = r.response.as_deref() else {
            failed += 1;
            continue;
        };
        match by_digest.get(r.digest.as_str()) {
            Some(prev) if *prev != resp => {
                conflicts.insert(r.digest.clone());
            }
            Some(_) => {}
            None => {
                by_digest.insert(&r.digest, resp);
            }
        }
    }
    RecordedScript {
        lines: by_digest
            .into_iter()
            .map(|(d, resp)| ScriptLine { digest: Some(d.into()), response: Some(resp.into()), ..Default::default() })
            .collect(),
        conflicting_digests: conflicts.into_iter().collect(),
        failed_calls_skipped: failed,
    }
}

pub fn render_script(lines: &[ScriptLine]) -> String {
    let mut out = String::new();
    for l in lines {
        out.push_str(&serde_json::to_string(l).expect("script line serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::script::{MissPolicy, ScriptGateway};

    #[test]
    fn every_call_logged_including_failures() {
        let dir = tempfile::tempdir().unwrap();
        let log = dir.path().join("audit.jsonl");
        let script = ScriptGateway::parse("{\"contains\":\"ok\",\"response\":\"fine\"}", MissPolicy::Strict).unwrap();
        let g = AuditedGateway::new(script, Some(&log)).unwrap();
        g.complete(&CompletionRequest::new("m", "ok 1")).unwrap();
        assert!(g.complete(&CompletionRequest::new("m", "nope")).is_err());
        let recs = read_audit_log(&log).unwrap();
        assert_eq!(recs.len(), g.calls());
        assert_eq!(recs[1].seq, 1);
        assert!(recs[1].error.as_deref().unwrap().contains("no entry"));

        let recorded = script_from_audit(&recs);
        assert_eq!(recorded.lines.len(), 1);
        assert_eq!(recorded.failed_calls_skipped, 1);
        let replay = ScriptGateway::parse(&render_script(&recorded.lines), MissPolicy::Strict).unwrap();
        assert_eq!(replay.complete(&CompletionRequest::new("other-model", "ok 1")).unwrap().text, "fine");

        // Reopening continues the sequence.
        let g2 = AuditedGateway::new(ScriptGateway::parse("", MissPolicy::Lenient).unwrap(), Some(&log)).unwrap();
        g2.complete(&CompletionRequest::new("m", "x")).unwrap();
        assert_eq!(read_audit_log(&log).unwrap()[2].seq, 2);
    }
}
