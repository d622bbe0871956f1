//! Run configuration: one TOML file, environment overrides for endpoint
//! settings, and CLI flag overrides applied by the binary.

use std::path::{Path, PathBuf};
use std::time::Duration;

use casekg_core::coref::{RejectPolicy, ResolutionPolicy};
use casekg_core::corpus::{ChunkingConfig, HeadingPatterns};
use casekg_core::eval::{Averaging, DEFAULT_THRESHOLD};
use casekg_core::extraction::DelimiterSet;
use casekg_core::{EntityType, Mode};
use serde::{Deserialize, Serialize};

use crate::gateway::{HttpSettings, MissPolicy, RetryPolicy};

pub const ENV_BASE_URL: &str = "CASEKG_BASE_URL";
pub const ENV_MODEL: &str = "CASEKG_MODEL";
pub const ENV_API_KEY: &str = "CASEKG_API_KEY";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    Http,
    Script,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    /// Defaults to `script` when a script path is set, `http` otherwise.
    pub backend: Option<BackendKind>,
    pub model: String,
    pub base_url: String,
    pub path: String,
    pub script: Option<PathBuf>,
    pub on_miss: MissPolicy,
    pub max_attempts: u32,
    pub initial_backoff_ms: u64,
    pub timeout_secs: u64,
    /// Prefer the environment variable over storing a key in the file.
    pub api_key: Option<String>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            backend: None,
            model: "llama3.3:70b".into(),
            base_url: "http://localhost:11434".into(),
            path: crate::gateway::http::DEFAULT_CHAT_PATH.into(),
            script: None,
            on_miss: MissPolicy::Strict,
            max_attempts: 3,
            initial_backoff_ms: 1000,
            timeout_secs: 300,
            api_key: None,
        }
    }
}

impl GatewayConfig {
    pub fn backend_kind(&self) -> BackendKind {
        self.backend.unwrap_or(if self.script.is_some() { BackendKind::Script } else { BackendKind::Http })
    }

    pub fn http_settings(&self) -> HttpSettings {
        HttpSettings {
            base_url: self.base_url.clone(),
            path: self.path.clone(),
            api_key: self.api_key.clone(),
            retry: RetryPolicy {
                max_attempts: self.max_attempts,
                initial_backoff: Duration::from_millis(self.initial_backoff_ms),
                request_timeout: Duration::from_secs(self.timeout_secs),
            },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Extra opinion heading patterns, added to the defaults.
    pub opinion_headings: Vec<String>,
    /// Extra stop heading patterns, added to the defaults.
    pub stop_headings: Vec<String>,
}

impl CorpusConfig {
    pub fn heading_patterns(&self) -> HeadingPatterns {
        let mut h = HeadingPatterns::default().with_extra_start(self.opinion_headings.iter().cloned());
        h.stop.extend(self.stop_headings.iter().cloned());
        h
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChunkingSection {
    pub chunk_size: usize,
    pub overlap: usize,
    pub tokenizer: String,
}

impl Default for ChunkingSection {
    fn default() -> Self {
        let c = ChunkingConfig::default();
        Self { chunk_size: c.chunk_size, overlap: c.overlap, tokenizer: c.tokenizer_id }
    }
}

impl ChunkingSection {
    pub fn to_config(&self) -> ChunkingConfig {
        ChunkingConfig { chunk_size: self.chunk_size, overlap: self.overlap, tokenizer_id: self.tokenizer.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorefConfig {
    pub type_order: Vec<EntityType>,
    pub length_ratio_bounds: [f64; 2],
    pub on_reject: RejectPolicy,
    /// One `<type>.txt` file per entity type; built-in templates otherwise.
    pub template_dir: Option<PathBuf>,
}

impl Default for CorefConfig {
    fn default() -> Self {
        let p = ResolutionPolicy::default();
        Self {
            type_order: p.type_order,
            length_ratio_bounds: [p.length_ratio_bounds.0, p.length_ratio_bounds.1],
            on_reject: p.on_reject,
            template_dir: None,
        }
    }
}

impl CorefConfig {
    pub fn policy(&self) -> ResolutionPolicy {
        ResolutionPolicy {
            type_order: self.type_order.clone(),
            length_ratio_bounds: (self.length_ratio_bounds[0], self.length_ratio_bounds[1]),
            on_reject: self.on_reject,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Extra government terms, added to the default lexicon.
    pub lexicon: Option<PathBuf>,
    pub delimiters: DelimiterSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub threshold: u8,
    pub overrides: Option<PathBuf>,
    pub noise: Option<PathBuf>,
    pub averaging: Averaging,
    /// Unknown override members and annotated non-nodes become errors.
    pub strict: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { threshold: DEFAULT_THRESHOLD, overrides: None, noise: None, averaging: Averaging::Macro, strict: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub gateway: GatewayConfig,
    #[serde(default)]
    pub corpus: CorpusConfig,
    #[serde(default)]
    pub chunking: ChunkingSection,
    #[serde(default)]
    pub coref: CorefConfig,
    #[serde(default)]
    pub extraction: ExtractionConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

fn default_mode() -> Mode {
    Mode::Corekg
}

fn default_parallelism() -> usize {
    1
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl RunConfig {
    pub fn new(corpus_dir: impl Into<PathBuf>, output_dir: impl Into<PathBuf>, mode: Mode) -> Self {
        Self {
            corpus_dir: corpus_dir.into(),
            output_dir: output_dir.into(),
            mode,
            parallelism: 1,
            gateway: GatewayConfig::default(),
            corpus: CorpusConfig::default(),
            chunking: ChunkingSection::default(),
            coref: CorefConfig::default(),
            extraction: ExtractionConfig::default(),
            eval: EvalConfig::default(),
        }
    }

    pub fn from_toml(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text)
            .map_err(|e| ConfigError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text, path)
    }

    /// Makes relative paths relative to `base` (the config file's directory).
    pub fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.corpus_dir);
        resolve(base, &mut self.output_dir);
        for p in [
            self.gateway.script.as_mut(),
            self.coref.template_dir.as_mut(),
            self.extraction.lexicon.as_mut(),
            self.eval.overrides.as_mut(),
            self.eval.noise.as_mut(),
        ]
        .into_iter()
        .flatten()
        {
            resolve(base, p);
        }
    }

    /// Applies endpoint overrides from the environment through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get(ENV_BASE_URL) {
            self.gateway.base_url = v;
        }
        if let Some(v) = get(ENV_MODEL) {
            self.gateway.model = v;
        }
        if let Some(v) = get(ENV_API_KEY) {
            self.gateway.api_key = Some(v);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if !self.corpus_dir.is_dir() {
            return invalid(format!("corpus directory {} does not exist", self.corpus_dir.display()));
        }
        if self.parallelism == 0 {
            return invalid("parallelism must be at least 1".into());
        }
        if self.gateway.model.trim().is_empty() {
            return invalid("model id is empty".into());
        }
        match self.gateway.backend_kind() {
            BackendKind::Script => match &self.gateway.script {
                Some(p) if p.is_file() => {}
                Some(p) => return invalid(format!("script {} does not exist", p.display())),
                None => return invalid("script backend requires gateway.script".into()),
            },
            BackendKind::Http => {
                if reqwest::Url::parse(&self.gateway.base_url).is_err() {
                    return invalid(format!("base URL {:?} is not a URL", self.gateway.base_url));
                }
                if self.gateway.max_attempts == 0 {
                    return invalid("max_attempts must be at least 1".into());
                }
            }
        }
        self.chunking.to_config().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.coref.policy().validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.extraction.delimiters.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.eval.threshold > 100 {
            return invalid("threshold must be within 0-100".into());
        }
        if let Some(d) = &self.coref.template_dir {
            if !d.is_dir() {
                return invalid(format!("template directory {} does not exist", d.display()));
            }
        }
        for (what, p) in [
            ("lexicon", &self.extraction.lexicon),
            ("override file", &self.eval.overrides),
            ("noise annotation file", &self.eval.noise),
        ] {
            if let Some(p) = p {
                if !p.is_file() {
                    return invalid(format!("{what} {} does not exist", p.display()));
                }
            }
        }
        Ok(())
    }
}
