//! Deterministic scripted backend. A script is a JSON-lines file; each line
//! holds one matcher and one outcome:
//!
//! ```text
//! {"digest": "<prompt digest>", "response": "..."}
//! {"position": 0, "response": "..."}
//! {"contains": ["Resolution Rules: PERSON", "Laredo"], "response": "..."}
//! {"contains": "some phrase", "error": "transport"}
//! ```
//!
//! A request is matched by digest first, then by its call position, then by
//! the first `contains` entry whose substrings all occur in the user text.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use casekg_core::gateway::{ChatGateway, CompletionRequest, CompletionResponse, GatewayError};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ScriptError {
    #[error("cannot read script {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("script line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Needles {
    One(String),
    All(Vec<String>),
}

impl Needles {
    fn as_slice(&self) -> &[String] {
        match self {
            Needles::One(s) => std::slice::from_ref(s),
            Needles::All(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Matcher {
    Digest(String),
    Position(usize),
    Contains(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScriptedFailure {
    Transport,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Respond(String),
    Fail(ScriptedFailure),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptEntry {
    pub line: usize,
    pub matcher: Matcher,
    pub outcome: Outcome,
}

/// One script line on disk.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<Needles>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ScriptedFailure>,
    /// Free-form annotation, ignored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ScriptLine {
    fn into_entry(self, line: usize) -> Result<ScriptEntry, ScriptError> {
        let err = |message: &str| ScriptError::Parse { line, message: message.to_string() };
        let matcher = match (self.digest, self.position, self.contains) {
            (Some(d), None, None) => Matcher::Digest(d),
            (None, Some(p), None) => Matcher::Position(p),
            (None, None, Some(n)) => {
                let needles = n.as_slice().to_vec();
                if needles.is_empty() || needles.iter().any(String::is_empty) {
                    return Err(err("contains needs at least one non-empty string"));
                }
                Matcher::Contains(needles)
            }
            _ => return Err(err("exactly one of digest, position, contains is required")),
        };
        let outcome = match (self.response, self.error) {
            (Some(r), None) => Outcome::Respond(r),
            (None, Some(f)) => Outcome::Fail(f),
            _ => return Err(err("exactly one of response, error is required")),
        };
        Ok(ScriptEntry { line, matcher, outcome })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MissPolicy {
    /// Unmatched requests fail with `ScriptMiss`.
    #[default]
    Strict,
    /// Unmatched requests echo the user text back.
    Lenient,
}

#[derive(Debug)]
pub struct ScriptGateway {
    entries: Vec<ScriptEntry>,
    by_digest: HashMap<String, usize>,
    by_position: HashMap<usize, usize>,
    contains: Vec<usize>,
    miss: MissPolicy,
    calls: AtomicUsize,
}

impl ScriptGateway {
    pub fn from_entries(entries: Vec<ScriptEntry>, miss: MissPolicy) -> Result<Self, ScriptError> {
        let mut by_digest = HashMap::new();
        let mut by_position = HashMap::new();
        let mut contains = Vec::new();
        for (i, e) in entries.iter().enumerate() {
            let dup = match &e.matcher {
                Matcher::Digest(d) => by_digest.insert(d.clone(), i).is_some(),
                Matcher::Position(p) => by_position.insert(*p, i).is_some(),
                Matcher::Contains(_) => {
                    contains.push(i);
                    false
                }
            };
            if dup {
                return Err(ScriptError::Parse { line: e.line, message: "duplicate matcher".into() });
            }
        }
        Ok(Self { entries, by_digest, by_position, contains, miss, calls: AtomicUsize::new(0) })
    }

    pub fn parse(text: &str, miss: MissPolicy) -> Result<Self, ScriptError> {
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with("//") {
                continue;
            }
            let parsed: ScriptLine =
                serde_json::from_str(trimmed).map_err(|e| ScriptError::Parse { line, message: e.to_string() })?;
            entries.push(parsed.into_entry(line)?);
        }
        Self::from_entries(entries, miss)
    }

    pub fn load(path: &Path, miss: MissPolicy) -> Result<Self, ScriptError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ScriptError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, miss)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    fn lookup(&self, request: &CompletionRequest, position: usize, digest: &str) -> Option<&ScriptEntry> {
        let idx = self.by_digest.get(digest).or_else(|| self.by_position.get(&position)).copied().or_else(|| {
            self.contains.iter().copied().find(|&i| match &self.entries[i].matcher {
                Matcher::Contains(needles) => needles.iter().all(|n| request.user_text.contains(n.as_str())),
                _ => false,
            })
        })?;
        Some(&self.entries[idx])
    }
}

impl ChatGateway for ScriptGateway {
    fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
        request.validate()?;
        let started = Instant::now();
        let position = self.calls.fetch_add(1, Ordering::SeqCst);
        let digest = request.prompt_digest();
        let text = match self.lookup(request, position, &digest) {
            Some(entry) => match &entry.outcome {
                Outcome::Respond(text) => text.clone(),
                Outcome::Fail(ScriptedFailure::Transport) => {
                    return Err(GatewayError::Transport {
                        attempts: 1,
                        message: format!("scripted failure (line {})", entry.line),
                    })
                }
                Outcome::Fail(ScriptedFailure::Timeout) => return Err(GatewayError::Timeout { attempts: 1 }),
            },
            None => match self.miss {
                MissPolicy::Strict => return Err(GatewayError::ScriptMiss { digest }),
                MissPolicy::Lenient => request.user_text.clone(),
            },
        };
        Ok(CompletionResponse { text, latency: started.elapsed(), backend_id: "script".into() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(text: &str) -> CompletionRequest {
        CompletionRequest::new("m", text)
    }

    #[test]
    fn digest_entries_and_determinism() {
        let d1 = req("a").prompt_digest();
        let d2 = req("b").prompt_digest();
        let text = format!("{{\"digest\":\"{d1}\",\"response\":\"A\"}}\n{{\"digest\":\"{d2}\",\"response\":\"B\"}}\n");
        let g = ScriptGateway::parse(&text, MissPolicy::Strict).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.complete(&req("b")).unwrap().text, "B");
        assert_eq!(g.complete(&req("a")).unwrap().text, g.complete(&req("a")).unwrap().text);
    }

    #[test]
    fn positional_order() {
        let g = ScriptGateway::parse(
            "{\"position\":0,\"response\":\"r1\"}\n{\"position\":1,\"response\":\"r2\"}",
            MissPolicy::Strict,
        )
        .unwrap();
        assert_eq!(g.complete(&req("x")).unwrap().text, "r1");
        assert_eq!(g.complete(&req("x")).unwrap().text, "r2");
        assert!(matches!(g.complete(&req("x")), Err(GatewayError::ScriptMiss { .. })));
    }

    #[test]
    fn duplicate_matcher_reports_line() {
        let err = ScriptGateway::parse(
            "{\"position\":0,\"response\":\"a\"}\n\n{\"position\":0,\"response\":\"b\"}",
            MissPolicy::Strict,
        )
        .unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 3, .. }), "{err}");
        let err = ScriptGateway::parse("{\"digest\":\"x\",\"position\":1,\"response\":\"a\"}", MissPolicy::Strict)
            .unwrap_err();
        assert!(matches!(err, ScriptError::Parse { line: 1, .. }));
        assert!(ScriptGateway::parse("{oops", MissPolicy::Strict).is_err());
    }

    #[test]
    fn empty_script_misses_strict_echoes_lenient() {
        let g = ScriptGateway::parse("", MissPolicy::Strict).unwrap();
        assert!(g.is_empty());
        assert!(matches!(g.complete(&req("x")), Err(GatewayError::ScriptMiss { .. })));
        let g = ScriptGateway::parse("", MissPolicy::Lenient).unwrap();
        assert_eq!(g.complete(&req("echo me")).unwrap().text, "echo me");
    }

    #[test]
    fn contains_requires_all_needles_and_precedence() {
        let d = req("alpha beta").prompt_digest();
        let text = format!(
            "{{\"contains\":[\"alpha\",\"gamma\"],\"response\":\"AG\"}}\n{{\"contains\":\"alpha\",\"response\":\"A\"}}\n{{\"digest\":\"{d}\",\"response\":\"D\"}}\n{{\"contains\":\"fail\",\"error\":\"timeout\"}}"
        );
        let g = ScriptGateway::parse(&text, MissPolicy::Strict).unwrap();
        assert_eq!(g.complete(&req("alpha beta")).unwrap().text, "D");
        assert_eq!(g.complete(&req("alpha gamma")).unwrap().text, "AG");
        assert_eq!(g.complete(&req("alpha")).unwrap().text, "A");
        assert_eq!(g.complete(&req("fail")), Err(GatewayError::Timeout { attempts: 1 }));
    }
}
