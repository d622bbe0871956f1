//! Case documents, Opinion-section isolation and overlapping token windows.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::ops::Range;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("document is empty")]
    EmptyDocument,
    #[error("no Opinion section heading found in case {0:?}")]
    MissingOpinionSection(String),
    #[error("unknown tokenizer {0:?}")]
    UnknownTokenizer(String),
    #[error("invalid chunking config: {0}")]
    InvalidConfig(&'static str),
}

/// Headings that start the Opinion section when no override is supplied.
pub const DEFAULT_OPINION_HEADINGS: [&str; 3] = ["Opinion", "OPINION", "Opinion by"];

/// Headings that end the Opinion section.
pub const DEFAULT_STOP_HEADINGS: [&str; 8] =
    ["End of Document", "Dissent by", "Dissent", "Concur by", "Concurrence", "Footnotes", "Appendix", "Judgment"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseDocument {
    pub case_id: String,
    pub raw_text: String,
    pub opinion_text: Option<String>,
}

impl CaseDocument {
    pub fn new(case_id: impl Into<String>, raw_text: impl Into<String>) -> Self {
        Self { case_id: case_id.into(), raw_text: raw_text.into(), opinion_text: None }
    }

    /// Isolates the Opinion section and stores it on the document.
    pub fn extract_opinion(&mut self, headings: &HeadingPatterns) -> Result<&str, CorpusError> {
        let range = opinion_range(&self.raw_text, headings).map_err(|e| match e {
            CorpusError::MissingOpinionSection(_) => CorpusError::MissingOpinionSection(self.case_id.clone()),
            other => other,
        })?;
        self.opinion_text = Some(self.raw_text[range].to_string());
        Ok(self.opinion_text.as_deref().unwrap_or_default())
    }
}

/// Start and stop heading patterns for Opinion isolation.
///
/// A line is a heading for pattern `p` when, after trimming and ignoring
/// case, it equals `p`, or starts with `p` followed by `':'`, or (for
/// multi-word patterns such as "Opinion by") starts with `p` followed by
/// whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadingPatterns {
    pub start: Vec<String>,
    pub stop: Vec<String>,
}

impl Default for HeadingPatterns {
    fn default() -> Self {
        Self {
            start: DEFAULT_OPINION_HEADINGS.iter().map(|s| s.to_string()).collect(),
            stop: DEFAULT_STOP_HEADINGS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl HeadingPatterns {
    pub fn with_extra_start(mut self, extra: impl IntoIterator<Item = String>) -> Self {
        self.start.extend(extra);
        self
    }
}

fn eq_ignore_case_prefix(line: &str, pattern: &str) -> Option<usize> {
    let mut li = line.char_indices();
    for pc in pattern.chars() {
        let (_, lc) = li.next()?;
        if !lc.to_lowercase().eq(pc.to_lowercase()) {
            return None;
        }
    }
    Some(li.next().map(|(i, _)| i).unwrap_or(line.len()))
}

fn line_matches(line: &str, pattern: &str) -> bool {
    let line = line.trim();
    let pattern = pattern.trim();
    if pattern.is_empty() {
        return false;
    }
    let Some(end) = eq_ignore_case_prefix(line, pattern) else {
        return false;
    };
    match line[end..].chars().next() {
        None => true,
        Some(':') => true,
        Some(c) if c.is_whitespace() => pattern.contains(char::is_whitespace),
        Some(_) => false,
    }
}

/// Lines of `text` with their byte ranges (line terminator excluded).
fn lines_with_offsets(text: &str) -> impl Iterator<Item = (Range<usize>, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').map(move |raw| {
        let start = offset;
        offset += raw.len();
        let line = raw.strip_suffix('\n').unwrap_or(raw);
        let line = line.strip_suffix('\r').unwrap_or(line);
        (start..start + line.len(), line)
    })
}

/// Byte range of the Opinion body inside `raw`: from the line after the first
/// start heading (skipping any immediately following start-heading lines such
/// as "Opinion by: ...") to the next stop heading, trimmed of surrounding
/// whitespace.
pub fn opinion_range(raw: &str, headings: &HeadingPatterns) -> Result<Range<usize>, CorpusError> {
    if raw.trim().is_empty() {
        return Err(CorpusError::EmptyDocument);
    }
    let is_start = |l: &str| headings.start.iter().any(|p| line_matches(l, p));
    let is_stop = |l: &str| headings.stop.iter().any(|p| line_matches(l, p));

    let mut lines = lines_with_offsets(raw).peekable();
    let mut body_start = None;
    for (range, line) in lines.by_ref() {
        if is_start(line) {
            body_start = Some(range.end);
            break;
        }
    }
    let Some(mut start) = body_start else {
        return Err(CorpusError::MissingOpinionSection(String::new()));
    };
    // Skip blank lines and repeated start headings ("Opinion by: ...").
    while let Some((range, line)) = lines.peek() {
        if line.trim().is_empty() || is_start(line) {
            start = range.end;
            lines.next();
        } else {
            break;
        }
    }
    let mut end = raw.len();
    for (range, line) in lines {
        if is_stop(line) {
            end = range.start;
            break;
        }
    }
    let start = start.min(end);
    let body = &raw[start..end];
    let lead = body.len() - body.trim_start().len();
    let trimmed = body.trim();
    if trimmed.is_empty() {
        return Err(CorpusError::MissingOpinionSection(String::new()));
    }
    let s = start + lead;
    Ok(s..s + trimmed.len())
}

/// Convenience wrapper returning the Opinion body as a slice of `raw`.
pub fn extract_opinion<'a>(raw: &'a str, headings: &HeadingPatterns) -> Result<&'a str, CorpusError> {
    opinion_range(raw, headings).map(|r| &raw[r])
}

/// Token-counting scheme. Tokens are reported as byte spans so chunk text can
/// be sliced from the source with its original whitespace.
pub trait Tokenizer {
    fn id(&self) -> &str;
    fn token_spans(&self, text: &str) -> Vec<Range<usize>>;
    fn count(&self, text: &str) -> usize {
        self.token_spans(text).len()
    }
}

/// Maximal runs of non-whitespace.
#[derive(Debug, Clone, Copy, Default)]
pub struct WhitespaceTokenizer;

pub const WHITESPACE_TOKENIZER: &str = "whitespace";

impl Tokenizer for WhitespaceTokenizer {
    fn id(&self) -> &str {
        WHITESPACE_TOKENIZER
    }

    fn token_spans(&self, text: &str) -> Vec<Range<usize>> {
        let mut spans = Vec::new();
        let mut start = None;
        for (i, c) in text.char_indices() {
            match (c.is_whitespace(), start) {
                (true, Some(s)) => {
                    spans.push(s..i);
                    start = None;
                }
                (false, None) => start = Some(i),
                _ => {}
            }
        }
        if let Some(s) = start {
            spans.push(s..text.len());
        }
        spans
    }

    fn count(&self, text: &str) -> usize {
        text.split_whitespace().count()
    }
}

/// Looks up a registered tokenizer by id.
pub fn tokenizer(id: &str) -> Result<&'static dyn Tokenizer, CorpusError> {
    match id {
        WHITESPACE_TOKENIZER => Ok(&WhitespaceTokenizer),
        other => Err(CorpusError::UnknownTokenizer(other.to_string())),
    }
}

pub fn count_tokens(text: &str, tokenizer_id: &str) -> Result<usize, CorpusError> {
    Ok(tokenizer(tokenizer_id)?.count(text))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub chunk_size: usize,
    pub overlap: usize,
    pub tokenizer_id: String,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self { chunk_size: 300, overlap: 100, tokenizer_id: WHITESPACE_TOKENIZER.to_string() }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.chunk_size == 0 {
            return Err(CorpusError::InvalidConfig("chunk_size must be positive"));
        }
        if self.overlap >= self.chunk_size {
            return Err(CorpusError::InvalidConfig("overlap must be smaller than chunk_size"));
        }
        tokenizer(&self.tokenizer_id)?;
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.chunk_size - self.overlap
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub chunk_id: usize,
    pub text: String,
    /// Half-open token range into the source token sequence.
    pub token_span: (usize, usize),
}

/// Sliding-window chunking with stride `chunk_size - overlap`. The last window
/// ends at the final token; a window is only emitted if it adds tokens not
/// already covered by its predecessor.
pub fn chunk_text(text: &str, config: &ChunkingConfig) -> Result<Vec<Chunk>, CorpusError> {
    config.validate()?;
    let spans = tokenizer(&config.tokenizer_id)?.token_spans(text);
    let total = spans.len();
    if total == 0 {
        return Err(CorpusError::EmptyDocument);
    }
    let stride = config.stride();
    let mut chunks = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + config.chunk_size).min(total);
        let bytes = spans[start].start..spans[end - 1].end;
        chunks.push(Chunk { chunk_id: chunks.len(), text: text[bytes].to_string(), token_span: (start, end) });
        if end == total {
            break;
        }
        start += stride;
    }
    Ok(chunks)
}
