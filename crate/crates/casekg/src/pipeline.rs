//! Per-case pipeline stages with on-disk artifacts, resume and failure
//! isolation.
//!
//! Stage order: ingest (opinion extraction), coref (full mode only), extract
//! (chunking, one completion per chunk, parsing, government filter in full
//! mode), build (graph assembly and serialization).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use casekg_core::coref::{trace_is_chained, CorefError, CorefResolver, StageOutcome, StageTrace, TemplateSet};
use casekg_core::corpus::{
    chunk_text, count_tokens, extract_opinion, Chunk, ChunkingConfig, CorpusError, HeadingPatterns,
};
use casekg_core::digest::sha256_hex;
use casekg_core::extraction::{
    build_extraction_prompt, filter_government_entities, parse_extraction_output, EntityRecord, ExtractionError,
    ExtractionPromptConfig, Lexicon, RecordSource, RelationshipRecord, SkippedRecord,
};
use casekg_core::gateway::{ChatGateway, CompletionRequest, GatewayError};
use casekg_core::graph::{build_graph, BuildWarnings, KnowledgeGraph};
use casekg_core::{EntityType, Mode};
use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::config::{BackendKind, ConfigError, RunConfig};
use crate::corpus_io::{discover, CorpusEntry, CorpusIoError};
use crate::formats::{export_tables, load_lexicon, serialize_graphml, AnnotationError, GraphmlError, TableError};
use crate::gateway::audit::{AuditError, CountingGateway};
use crate::gateway::script::ScriptError;
use crate::gateway::{AuditedGateway, Backend, HttpGateway, ScriptGateway};
use crate::layout::RunLayout;
use crate::templates::{load_template_dir, TemplateDirError};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Errors that stop a run before any case is processed.
#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusIoError),
    #[error(transparent)]
    Script(#[from] ScriptError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Templates(#[from] TemplateDirError),
    #[error("invalid extraction settings: {0}")]
    Extraction(String),
    #[error("cannot create HTTP client: {0}")]
    Http(GatewayError),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Coref,
    Extract,
    Build,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Coref => "coref",
            Stage::Extract => "extract",
            Stage::Build => "build",
        }
    }
}

/// Errors confined to a single case.
#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("missing artifact {0}; run the earlier stage first")]
    MissingArtifact(PathBuf),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Coref(#[from] CorefError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error("chunk {chunk_id}: {source}")]
    Gateway { chunk_id: usize, source: GatewayError },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Graphml(#[from] GraphmlError),
    #[error("coref trace is not chained by digest")]
    BrokenTrace,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StageError + '_ {
    move |source| StageError::Io { path: path.to_path_buf(), source }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), StageError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

fn read_file(path: &Path) -> Result<String, StageError> {
    if !path.exists() {
        return Err(StageError::MissingArtifact(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(io_err(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), StageError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| StageError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, StageError> {
    let text = read_file(path)?;
    serde_json::from_str(&text).map_err(|source| StageError::Json { path: path.to_path_buf(), source })
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), StageError> {
    let mut text = String::new();
    for item in items {
        text.push_str(
            &serde_json::to_string(item).map_err(|source| StageError::Json { path: path.to_path_buf(), source })?,
        );
        text.push('\n');
    }
    write_file(path, text)
}

pub fn read_trace(path: &Path) -> Result<Vec<StageTrace>, StageError> {
    read_file(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|source| StageError::Json { path: path.to_path_buf(), source }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkReport {
    pub chunk_id: usize,
    pub candidates: usize,
    pub parsed: usize,
    pub skipped: Vec<SkippedRecord>,
    pub completion_seen: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStats {
    pub removed_entities: usize,
    pub removed_relationships: usize,
}

/// Contents of `records.json`: parsed records after any filtering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecords {
    pub case_id: String,
    pub mode: Mode,
    pub chunk_reports: Vec<ChunkReport>,
    pub filter: Option<FilterStats>,
    pub entities: Vec<EntityRecord>,
    pub relationships: Vec<RelationshipRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseStats {
    pub opinion_tokens: usize,
    pub coref_stages: usize,
    pub coref_passthroughs: usize,
    pub coref_retries: usize,
    pub chunks: usize,
    pub records_parsed: usize,
    pub records_skipped: usize,
    pub empty_chunks: usize,
    pub filtered_entities: usize,
    pub filtered_relationships: usize,
    pub nodes: usize,
    pub edges: usize,
    pub unmatched_endpoints: usize,
    pub ambiguous_endpoints: usize,
    pub graph_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CaseStatus {
    Ok,
    Failed,
}

/// Contents of `case.json` and one manifest entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSummary {
    pub case_id: String,
    pub status: CaseStatus,
    pub config_digest: String,
    pub input_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<Stage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats: Option<CaseStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDigests {
    /// Digest of the extraction prompt rendered around a placeholder chunk.
    pub extraction: String,
    /// Per-type coreference template digests; empty in baseline mode.
    pub coref: BTreeMap<EntityType, String>,
}

/// `manifest.json`: deterministic for a given config and corpus (no
/// timestamps, no absolute paths).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub mode: Mode,
    pub model_id: String,
    pub config_digest: String,
    pub prompt_digests: PromptDigests,
    pub cases: Vec<CaseSummary>,
}

impl RunManifest {
    pub fn failed(&self) -> impl Iterator<Item = &CaseSummary> {
        self.cases.iter().filter(|c| c.status == CaseStatus::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRunLog {
    pub case_id: String,
    pub status: CaseStatus,
    pub resumed: bool,
    pub llm_calls: usize,
    pub millis: u64,
}

/// `run_log.json`: the non-deterministic side of a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLog {
    pub command: String,
    pub started_at: String,
    pub finished_at: String,
    pub llm_calls: usize,
    pub cases: Vec<CaseRunLog>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: Option<RunManifest>,
    pub log: RunLog,
    pub failures: Vec<CaseSummary>,
}

impl RunOutcome {
    pub fn all_succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Serialize)]
struct DigestInput<'a> {
    tool_version: &'a str,
    mode: Mode,
    model_id: &'a str,
    headings: &'a HeadingPatterns,
    chunking: &'a ChunkingConfig,
    coref_policy: Option<(&'a [EntityType], String, String, casekg_core::coref::RejectPolicy)>,
    prompt_digests: &'a PromptDigests,
    lexicon: Option<Vec<&'a str>>,
}

pub struct Pipeline {
    config: RunConfig,
    layout: RunLayout,
    gateway: Arc<AuditedGateway<Backend>>,
    resolver: CorefResolver,
    extraction: ExtractionPromptConfig,
    lexicon: Lexicon,
    headings: HeadingPatterns,
    chunking: ChunkingConfig,
    prompt_digests: PromptDigests,
    config_digest: String,
    cases: Vec<CorpusEntry>,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

impl Pipeline {
    /// Validates the config, discovers the corpus and builds the backend
    /// named by the config. No completion calls are made here.
    pub fn new(config: RunConfig) -> Result<Self, SetupError> {
        config.validate()?;
        let backend = match config.gateway.backend_kind() {
            BackendKind::Script => {
                let path = config.gateway.script.as_deref().ok_or_else(|| ConfigError::Invalid("no script".into()))?;
                Backend::Script(ScriptGateway::load(path, config.gateway.on_miss)?)
            }
            BackendKind::Http => {
                Backend::Http(HttpGateway::new(config.gateway.http_settings()).map_err(SetupError::Http)?)
            }
        };
        Self::with_backend(config, backend)
    }

    pub fn with_backend(config: RunConfig, backend: Backend) -> Result<Self, SetupError> {
        config.validate()?;
        let cases = discover(&config.corpus_dir)?;
        let layout = RunLayout::new(&config.output_dir);
        fs::create_dir_all(layout.root())
            .map_err(|source| SetupError::Io { path: layout.root().to_path_buf(), source })?;
        let gateway = Arc::new(AuditedGateway::new(backend, Some(&layout.audit_log()))?);

        let mode = config.mode;
        let policy = config.coref.policy();
        let templates = match &config.coref.template_dir {
            Some(dir) => load_template_dir(dir, &policy.type_order)?,
            None => TemplateSet::builtin(),
        };
        let resolver = CorefResolver::new(templates, policy, config.gateway.model.clone());
        let mut extraction = ExtractionPromptConfig::for_mode(mode);
        extraction.delimiters = config.extraction.delimiters.clone();
        let extraction_digest = build_extraction_prompt("{chunk_text}", &extraction)
            .map(|p| sha256_hex(p.as_bytes()))
            .map_err(|e| SetupError::Extraction(e.to_string()))?;
        let coref_digests = match mode {
            Mode::Corekg => resolver
                .policy
                .type_order
                .iter()
                .filter_map(|t| resolver.templates.get(*t))
                .map(|tpl| {
                    let json = serde_json::to_string(tpl).expect("template serializes");
                    (tpl.entity_type, sha256_hex(json.as_bytes()))
                })
                .collect(),
            Mode::Baseline => BTreeMap::new(),
        };
        let prompt_digests = PromptDigests { extraction: extraction_digest, coref: coref_digests };
        let lexicon = load_lexicon(config.extraction.lexicon.as_deref())?;
        let headings = config.corpus.heading_patterns();
        let chunking = config.chunking.to_config();

        let (low, high) = resolver.policy.length_ratio_bounds;
        let digest_input = DigestInput {
            tool_version: TOOL_VERSION,
            mode,
            model_id: &config.gateway.model,
            headings: &headings,
            chunking: &chunking,
            coref_policy: (mode == Mode::Corekg).then(|| {
                (
                    resolver.policy.type_order.as_slice(),
                    format!("{low:?}"),
                    format!("{high:?}"),
                    resolver.policy.on_reject,
                )
            }),
            prompt_digests: &prompt_digests,
            lexicon: (mode == Mode::Corekg).then(|| lexicon.iter().collect()),
        };
        let config_digest =
            sha256_hex(serde_json::to_string(&digest_input).expect("digest input serializes").as_bytes());

        Ok(Self {
            config,
            layout,
            gateway,
            resolver,
            extraction,
            lexicon,
            headings,
            chunking,
            prompt_digests,
            config_digest,
            cases,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn layout(&self) -> &RunLayout {
        &self.layout
    }

    pub fn config_digest(&self) -> &str {
        &self.config_digest
    }

    pub fn prompt_digests(&self) -> &PromptDigests {
        &self.prompt_digests
    }

    pub fn cases(&self) -> &[CorpusEntry] {
        &self.cases
    }

    pub fn gateway(&self) -> &AuditedGateway<Backend> {
        &self.gateway
    }

    fn mode(&self) -> Mode {
        self.config.mode
    }

    fn ingest(&self, entry: &CorpusEntry, raw: &str) -> Result<String, StageError> {
        let opinion = extract_opinion(raw, &self.headings).map_err(|e| match e {
            CorpusError::MissingOpinionSection(_) => CorpusError::MissingOpinionSection(entry.case_id.clone()),
            other => other,
        })?;
        write_file(&self.layout.opinion(&entry.case_id), opinion)?;
        Ok(opinion.to_string())
    }

    fn coref<G: ChatGateway + ?Sized>(&self, case_id: &str, opinion: &str, gateway: &G) -> Result<String, StageError> {
        let (text, traces) = self.resolver.resolve_sequential(opinion, gateway)?;
        write_jsonl(&self.layout.coref_trace(case_id), &traces)?;
        write_file(&self.layout.coref_text(case_id), &text)?;
        if !trace_is_chained(&traces) {
            return Err(StageError::BrokenTrace);
        }
        Ok(text)
    }

    fn extraction_input(&self, case_id: &str) -> Result<String, StageError> {
        match self.mode() {
            Mode::Corekg => read_file(&self.layout.coref_text(case_id)),
            Mode::Baseline => read_file(&self.layout.opinion(case_id)),
        }
    }

    fn extract<G: ChatGateway + ?Sized>(
        &self,
        case_id: &str,
        text: &str,
        gateway: &G,
    ) -> Result<CaseRecords, StageError> {
        let chunks: Vec<Chunk> = chunk_text(text, &self.chunking)?;
        write_jsonl(&self.layout.chunks(case_id), &chunks)?;
        let raw_dir = self.layout.raw_dir(case_id);
        if raw_dir.exists() {
            fs::remove_dir_all(&raw_dir).map_err(io_err(&raw_dir))?;
        }
        let d = &self.extraction.delimiters;
        let mut reports = Vec::with_capacity(chunks.len());
        let mut entities = Vec::new();
        let mut relationships = Vec::new();
        for chunk in &chunks {
            let prompt = build_extraction_prompt(&chunk.text, &self.extraction)?;
            let request = CompletionRequest::new(self.config.gateway.model.clone(), prompt);
            let response = gateway
                .complete(&request)
                .map_err(|source| StageError::Gateway { chunk_id: chunk.chunk_id, source })?;
            write_file(&self.layout.raw_output(case_id, chunk.chunk_id), &response.text)?;
            let source = RecordSource { case_id: case_id.to_string(), chunk_id: chunk.chunk_id };
            let parsed = parse_extraction_output(&response.text, d, &source);
            for s in &parsed.report.skipped {
                log::warn!(
                    "{case_id} chunk {} record {} (line {}) skipped: {}",
                    chunk.chunk_id,
                    s.index,
                    s.line,
                    s.reason
                );
            }
            reports.push(ChunkReport {
                chunk_id: chunk.chunk_id,
                candidates: parsed.report.candidates,
                parsed: parsed.report.parsed,
                skipped: parsed.report.skipped,
                completion_seen: parsed.report.completion_seen,
            });
            entities.extend(parsed.entities);
            relationships.extend(parsed.relationships);
        }
        let (entities, relationships, filter) = match self.mode() {
            Mode::Corekg => {
                let out = filter_government_entities(entities, relationships, &self.lexicon);
                let stats = FilterStats {
                    removed_entities: out.removed_entities,
                    removed_relationships: out.removed_relationships,
                };
                (out.entities, out.relationships, Some(stats))
            }
            Mode::Baseline => (entities, relationships, None),
        };
        let records = CaseRecords {
            case_id: case_id.to_string(),
            mode: self.mode(),
            chunk_reports: reports,
            filter,
            entities,
            relationships,
        };
        write_json(&self.layout.records(case_id), &records)?;
        Ok(records)
    }

    fn build(
        &self,
        case_id: &str,
        records: &CaseRecords,
    ) -> Result<(KnowledgeGraph, BuildWarnings, String), StageError> {
        let (graph, warnings) = build_graph(&records.entities, &records.relationships, case_id, self.mode());
        let xml = serialize_graphml(&graph);
        write_file(&self.layout.graphml(case_id, self.mode()), &xml)?;
        let (mut nodes, mut edges) = (Vec::new(), Vec::new());
        export_tables(&graph, &mut nodes, &mut edges)?;
        write_file(&self.layout.node_table(case_id, self.mode()), nodes)?;
        write_file(&self.layout.edge_table(case_id, self.mode()), edges)?;
        if warnings.dropped_edges() > 0 {
            log::warn!(
                "{case_id}: dropped {} relationship(s) ({} unmatched, {} ambiguous endpoints)",
                warnings.dropped_edges(),
                warnings.unmatched_endpoints,
                warnings.ambiguous_endpoints
            );
        }
        Ok((graph, warnings, sha256_hex(xml.as_bytes())))
    }

    fn stats(
        &self,
        case_id: &str,
        records: &CaseRecords,
        graph: &KnowledgeGraph,
        warnings: &BuildWarnings,
        graph_digest: String,
    ) -> Result<CaseStats, StageError> {
        let opinion = read_file(&self.layout.opinion(case_id))?;
        let traces = match self.mode() {
            Mode::Corekg => read_trace(&self.layout.coref_trace(case_id))?,
            Mode::Baseline => Vec::new(),
        };
        Ok(CaseStats {
            opinion_tokens: count_tokens(&opinion, &self.chunking.tokenizer_id)?,
            coref_stages: traces.len(),
            coref_passthroughs: traces.iter().filter(|t| t.outcome == StageOutcome::PassedThrough).count(),
            coref_retries: traces.iter().map(|t| t.attempts.len().saturating_sub(1)).sum(),
            chunks: records.chunk_reports.len(),
            records_parsed: records.chunk_reports.iter().map(|r| r.parsed).sum(),
            records_skipped: records.chunk_reports.iter().map(|r| r.skipped.len()).sum(),
            empty_chunks: records.chunk_reports.iter().filter(|r| r.parsed == 0).count(),
            filtered_entities: records.filter.as_ref().map_or(0, |f| f.removed_entities),
            filtered_relationships: records.filter.as_ref().map_or(0, |f| f.removed_relationships),
            nodes: graph.node_count(),
            edges: graph.edge_count(),
            unmatched_endpoints: warnings.unmatched_endpoints,
            ambiguous_endpoints: warnings.ambiguous_endpoints,
            graph_digest,
        })
    }

    /// Runs stages `from..=to` for one case. Stages before `from` are read
    /// back from their artifacts.
    fn run_stages<G: ChatGateway + ?Sized>(
        &self,
        entry: &CorpusEntry,
        raw: &str,
        from: Stage,
        to: Stage,
        gateway: &G,
    ) -> Result<Option<CaseStats>, (Stage, StageError)> {
        let id = entry.case_id.as_str();
        // Missing artifacts from earlier stages are charged to the stage that needs them.
        let opinion =
            if from <= Stage::Ingest { Some(self.ingest(entry, raw).map_err(|e| (Stage::Ingest, e))?) } else { None };
        if to == Stage::Ingest {
            return Ok(None);
        }
        if self.mode() == Mode::Corekg && from <= Stage::Coref {
            let opinion = match opinion {
                Some(o) => o,
                None => read_file(&self.layout.opinion(id)).map_err(|e| (Stage::Coref, e))?,
            };
            self.coref(id, &opinion, gateway).map_err(|e| (Stage::Coref, e))?;
        }
        if to == Stage::Coref {
            return Ok(None);
        }
        let records = if from <= Stage::Extract {
            let text = self.extraction_input(id).map_err(|e| (Stage::Extract, e))?;
            self.extract(id, &text, gateway).map_err(|e| (Stage::Extract, e))?
        } else {
            read_json(&self.layout.records(id)).map_err(|e| (Stage::Extract, e))?
        };
        if to == Stage::Extract {
            return Ok(None);
        }
        let (graph, warnings, digest) = self.build(id, &records).map_err(|e| (Stage::Build, e))?;
        let stats = self.stats(id, &records, &graph, &warnings, digest).map_err(|e| (Stage::Build, e))?;
        Ok(Some(stats))
    }

    fn resumable(&self, case_id: &str, input_digest: &str) -> Option<CaseSummary> {
        let summary: CaseSummary = read_json(&self.layout.case_summary(case_id)).ok()?;
        let complete = summary.status == CaseStatus::Ok
            && summary.config_digest == self.config_digest
            && summary.input_digest == input_digest
            && summary.stats.is_some()
            && self.layout.graphml(case_id, self.mode()).is_file();
        complete.then_some(summary)
    }

    fn process_case(&self, entry: &CorpusEntry, from: Stage, to: Stage, force: bool) -> (CaseSummary, CaseRunLog) {
        let started = Instant::now();
        let counter = CountingGateway::new(self.gateway.as_ref());
        let mut resumed = false;
        let summary = match fs::read(&entry.path) {
            Err(e) => self.failure(
                entry,
                String::new(),
                Stage::Ingest,
                &StageError::Io { path: entry.path.clone(), source: e },
            ),
            Ok(bytes) => {
                let input_digest = sha256_hex(&bytes);
                let reuse = (from == Stage::Ingest && to == Stage::Build && !force)
                    .then(|| self.resumable(&entry.case_id, &input_digest))
                    .flatten();
                match (reuse, String::from_utf8(bytes)) {
                    (Some(s), _) => {
                        resumed = true;
                        s
                    }
                    (None, Err(e)) => {
                        let err = StageError::Io {
                            path: entry.path.clone(),
                            source: std::io::Error::new(std::io::ErrorKind::InvalidData, e.utf8_error()),
                        };
                        self.failure(entry, input_digest, Stage::Ingest, &err)
                    }
                    (None, Ok(raw)) => match self.run_stages(entry, &raw, from, to, &counter) {
                        Ok(stats) => CaseSummary {
                            case_id: entry.case_id.clone(),
                            status: CaseStatus::Ok,
                            config_digest: self.config_digest.clone(),
                            input_digest,
                            failed_stage: None,
                            error: None,
                            stats,
                        },
                        Err((stage, e)) => self.failure(entry, input_digest, stage, &e),
                    },
                }
            }
        };
        if to == Stage::Build && !resumed {
            if let Err(e) = write_json(&self.layout.case_summary(&entry.case_id), &summary) {
                log::error!("{}: cannot write case summary: {e}", entry.case_id);
            }
        }
        let log = CaseRunLog {
            case_id: entry.case_id.clone(),
            status: summary.status,
            resumed,
            llm_calls: counter.calls(),
            millis: started.elapsed().as_millis() as u64,
        };
        (summary, log)
    }

    fn failure(&self, entry: &CorpusEntry, input_digest: String, stage: Stage, e: &StageError) -> CaseSummary {
        log::error!("{}: {} stage failed: {e}", entry.case_id, stage.as_str());
        CaseSummary {
            case_id: entry.case_id.clone(),
            status: CaseStatus::Failed,
            config_digest: self.config_digest.clone(),
            input_digest,
            failed_stage: Some(stage),
            error: Some(e.to_string()),
            stats: None,
        }
    }

    /// Full pipeline with per-case resume.
    pub fn run(&self, force: bool) -> Result<RunOutcome, SetupError> {
        self.run_range("run", Stage::Ingest, Stage::Build, force)
    }

    /// Runs a single stage for every case, reading earlier artifacts.
    pub fn run_stage(&self, stage: Stage) -> Result<RunOutcome, SetupError> {
        self.run_range(stage.as_str(), stage, stage, true)
    }

    fn run_range(&self, command: &str, from: Stage, to: Stage, force: bool) -> Result<RunOutcome, SetupError> {
        let started_at = now();
        let calls_before = self.gateway.calls();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.config.parallelism)
            .build()
            .map_err(|e| SetupError::Pool(e.to_string()))?;
        let results: Vec<(CaseSummary, CaseRunLog)> = pool.install(|| {
            use rayon::prelude::*;
            self.cases.par_iter().map(|c| self.process_case(c, from, to, force)).collect()
        });
        let (summaries, logs): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let failures: Vec<CaseSummary> = summaries.iter().filter(|s| s.status == CaseStatus::Failed).cloned().collect();
        let manifest = (to == Stage::Build).then(|| RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            mode: self.mode(),
            model_id: self.config.gateway.model.clone(),
            config_digest: self.config_digest.clone(),
            prompt_digests: self.prompt_digests.clone(),
            cases: summaries,
        });
        if let Some(m) = &manifest {
            write_json(&self.layout.manifest(), m).map_err(|e| match e {
                StageError::Io { path, source } => SetupError::Io { path, source },
                other => SetupError::Pool(other.to_string()),
            })?;
        }
        let log = RunLog {
            command: command.to_string(),
            started_at,
            finished_at: now(),
            llm_calls: self.gateway.calls() - calls_before,
            cases: logs,
        };
        let log_path = self.layout.run_log();
        let text = serde_json::to_string_pretty(&log).expect("run log serializes");
        fs::File::create(&log_path)
            .and_then(|mut f| writeln!(f, "{text}"))
            .map_err(|source| SetupError::Io { path: log_path, source })?;
        Ok(RunOutcome { manifest, log, failures })
    }
}

pub fn read_manifest(layout: &RunLayout) -> Result<RunManifest, StageError> {
    read_json(&layout.manifest())
}

/// Renders a fixed-width table of failed cases.
pub fn failure_table(failures: &[CaseSummary]) -> String {
    let mut out = format!("{:<24} {:<8} error\n", "case", "stage");
    for f in failures {
        out.push_str(&format!(
            "{:<24} {:<8} {}\n",
            f.case_id,
            f.failed_stage.map_or("-", Stage::as_str),
            f.error.as_deref().unwrap_or("")
        ));
    }
    out
}
