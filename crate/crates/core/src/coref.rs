//! Type-wise sequential coreference resolution.
//!
//! One prompt per entity type; each stage consumes the previous stage's
//! output. Model output is accepted only if its word count stays within a
//! ratio window of the stage input, otherwise the reject policy applies.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{Tokenizer, WhitespaceTokenizer};
use crate::digest::sha256_hex;
use crate::entity::EntityType;
use crate::gateway::{ChatGateway, CompletionRequest, GatewayError};

pub const DEFAULT_INPUT_SLOT: &str = "{input_text}";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorefError {
    #[error("invalid coreference template: {0}")]
    TemplateInvalid(String),
    #[error("no coreference template registered for {0}")]
    MissingTemplate(EntityType),
    #[error("invalid resolution policy: {0}")]
    PolicyInvalid(&'static str),
    #[error("{entity_type} stage rejected model output (word ratio {output_words}/{input_words})")]
    ResolutionRejected { entity_type: EntityType, input_words: usize, output_words: usize },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotExample {
    pub input: String,
    pub output: String,
}

/// A per-type coreference prompt: persona, task, context, rules, few-shot
/// examples and an input section holding exactly one input slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorefPromptTemplate {
    pub entity_type: EntityType,
    pub persona_text: String,
    pub task_text: String,
    pub context_text: String,
    pub rules_text: String,
    pub fewshot_examples: Vec<FewShotExample>,
    pub input_text: String,
    pub input_slot: String,
}

const DEFAULT_TEMPLATES: [&str; 7] = [
    include_str!("../templates/person.txt"),
    include_str!("../templates/location.txt"),
    include_str!("../templates/routes.txt"),
    include_str!("../templates/organization.txt"),
    include_str!("../templates/means_of_transportation.txt"),
    include_str!("../templates/means_of_communication.txt"),
    include_str!("../templates/smuggled_items.txt"),
];

/// File stem used for a type's template file ("means_of_transportation").
pub fn template_file_stem(entity_type: EntityType) -> String {
    entity_type.as_str().to_ascii_lowercase()
}

impl CorefPromptTemplate {
    /// Parses the sectioned text format used by the template files:
    ///
    /// ```text
    /// [entity_type]
    /// PERSON
    /// [persona] ... [task] ... [context] ... [rules] ...
    /// [example]
    /// Input: ...
    /// Output: ...
    /// [input]
    /// ... {input_text} ...
    /// ```
    ///
    /// `[example]` may repeat. Section bodies are trimmed.
    pub fn parse(text: &str) -> Result<Self, CorefError> {
        let invalid = |m: &str| CorefError::TemplateInvalid(m.to_string());
        let mut sections: Vec<(String, String)> = Vec::new();
        for line in text.lines() {
            let t = line.trim();
            if t.starts_with('[') && t.ends_with(']') && t.len() > 2 && !t[1..t.len() - 1].contains(' ') {
                sections.push((t[1..t.len() - 1].to_ascii_lowercase(), String::new()));
            } else if let Some((_, body)) = sections.last_mut() {
                body.push_str(line);
                body.push('\n');
            } else if !t.is_empty() {
                return Err(invalid("text before the first section header"));
            }
        }
        let mut single: BTreeMap<&str, String> = BTreeMap::new();
        let mut examples = Vec::new();
        for (name, body) in &sections {
            let body = body.trim();
            match name.as_str() {
                "example" => examples.push(parse_example(body)?),
                "entity_type" | "persona" | "task" | "context" | "rules" | "input" => {
                    let key = match name.as_str() {
                        "entity_type" => "entity_type",
                        "persona" => "persona",
                        "task" => "task",
                        "context" => "context",
                        "rules" => "rules",
                        _ => "input",
                    };
                    if single.insert(key, body.to_string()).is_some() {
                        return Err(CorefError::TemplateInvalid(alloc::format!("duplicate [{name}] section")));
                    }
                }
                other => return Err(CorefError::TemplateInvalid(alloc::format!("unknown section [{other}]"))),
            }
        }
        let mut take = |k: &str| single.remove(k).unwrap_or_default();
        let entity_type =
            take("entity_type").parse::<EntityType>().map_err(|e| CorefError::TemplateInvalid(e.to_string()))?;
        let template = Self {
            entity_type,
            persona_text: take("persona"),
            task_text: take("task"),
            context_text: take("context"),
            rules_text: take("rules"),
            fewshot_examples: examples,
            input_text: take("input"),
            input_slot: DEFAULT_INPUT_SLOT.to_string(),
        };
        template.validate()?;
        Ok(template)
    }

    /// The built-in template for `entity_type`.
    pub fn builtin(entity_type: EntityType) -> Self {
        let idx = EntityType::ALL.iter().position(|t| *t == entity_type).unwrap_or(0);
        // Built-in templates are covered by tests; a parse failure is a build defect.
        Self::parse(DEFAULT_TEMPLATES[idx]).expect("built-in template parses")
    }

    /// Raw text of the built-in template, for writing editable copies to disk.
    pub fn builtin_source(entity_type: EntityType) -> &'static str {
        let idx = EntityType::ALL.iter().position(|t| *t == entity_type).unwrap_or(0);
        DEFAULT_TEMPLATES[idx]
    }

    pub fn validate(&self) -> Result<(), CorefError> {
        let invalid = |m: &str| Err(CorefError::TemplateInvalid(m.to_string()));
        if self.input_slot.is_empty() {
            return invalid("empty input slot marker");
        }
        for (name, text) in [
            ("persona", &self.persona_text),
            ("task", &self.task_text),
            ("context", &self.context_text),
            ("rules", &self.rules_text),
        ] {
            if text.trim().is_empty() {
                return Err(CorefError::TemplateInvalid(alloc::format!("missing {name} component")));
            }
            if text.contains(self.input_slot.as_str()) {
                return Err(CorefError::TemplateInvalid(alloc::format!("input slot appears in {name} component")));
            }
        }
        if self.fewshot_examples.is_empty() {
            return invalid("missing few-shot examples");
        }
        for ex in &self.fewshot_examples {
            if ex.input.trim().is_empty() || ex.output.trim().is_empty() {
                return invalid("few-shot example with empty input or output");
            }
            if ex.input.contains(self.input_slot.as_str()) || ex.output.contains(self.input_slot.as_str()) {
                return invalid("input slot appears in a few-shot example");
            }
        }
        if self.input_text.matches(self.input_slot.as_str()).count() != 1 {
            return invalid("input section must contain the input slot exactly once");
        }
        Ok(())
    }

    /// Renders the prompt: persona, task, context, rules, few-shot examples,
    /// then the input section with its slot replaced by `input_text`. The
    /// input itself is never scanned for slot markers.
    pub fn build_prompt(&self, input_text: &str) -> Result<String, CorefError> {
        self.validate()?;
        let mut out = String::new();
        out.push_str("-Goal-\n");
        out.push_str(self.persona_text.trim());
        out.push_str("\n\n");
        out.push_str(self.task_text.trim());
        out.push_str("\n\n");
        out.push_str(self.context_text.trim());
        out.push_str("\n\n-Coreference Resolution Rules: ");
        out.push_str(self.entity_type.as_str());
        out.push_str("-\n");
        out.push_str(self.rules_text.trim());
        out.push_str("\n\n-Examples-\n");
        for (i, ex) in self.fewshot_examples.iter().enumerate() {
            out.push_str(&alloc::format!(
                "Example {}:\nInput: {}\nOutput: {}\n\n",
                i + 1,
                ex.input.trim(),
                ex.output.trim()
            ));
        }
        out.push_str("-Input Text-\n");
        let (before, after) = self
            .input_text
            .split_once(self.input_slot.as_str())
            .ok_or_else(|| CorefError::TemplateInvalid("missing input slot".to_string()))?;
        out.push_str(before);
        out.push_str(input_text);
        out.push_str(after);
        Ok(out)
    }
}

fn parse_example(body: &str) -> Result<FewShotExample, CorefError> {
    let invalid = |m: &str| CorefError::TemplateInvalid(m.to_string());
    let rest = body.strip_prefix("Input:").ok_or_else(|| invalid("example must start with 'Input:'"))?;
    let (input, output) =
        rest.split_once("\nOutput:").ok_or_else(|| invalid("example is missing an 'Output:' line"))?;
    Ok(FewShotExample { input: input.trim().to_string(), output: output.trim().to_string() })
}

/// Free-function form of [`CorefPromptTemplate::build_prompt`].
pub fn build_coref_prompt(template: &CorefPromptTemplate, input_text: &str) -> Result<String, CorefError> {
    template.build_prompt(input_text)
}

/// Templates keyed by entity type.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TemplateSet {
    templates: BTreeMap<EntityType, CorefPromptTemplate>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let mut set = Self::default();
        for t in EntityType::ALL {
            set.insert(CorefPromptTemplate::builtin(t));
        }
        set
    }

    pub fn insert(&mut self, template: CorefPromptTemplate) -> Option<CorefPromptTemplate> {
        self.templates.insert(template.entity_type, template)
    }

    pub fn get(&self, entity_type: EntityType) -> Option<&CorefPromptTemplate> {
        self.templates.get(&entity_type)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CorefPromptTemplate> {
        self.templates.values()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectPolicy {
    RetryOnceThenPassthrough,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionPolicy {
    pub type_order: Vec<EntityType>,
    /// Inclusive acceptance window for output words / input words.
    pub length_ratio_bounds: (f64, f64),
    pub on_reject: RejectPolicy,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        Self {
            type_order: EntityType::ALL.to_vec(),
            length_ratio_bounds: (0.7, 1.3),
            on_reject: RejectPolicy::RetryOnceThenPassthrough,
        }
    }
}

impl ResolutionPolicy {
    pub fn validate(&self) -> Result<(), CorefError> {
        let mut seen = Vec::new();
        for t in &self.type_order {
            if seen.contains(t) {
                return Err(CorefError::PolicyInvalid("duplicate entity type in type_order"));
            }
            seen.push(*t);
        }
        let (low, high) = self.length_ratio_bounds;
        if !((0.0..1.0).contains(&low) && high > 1.0) {
            return Err(CorefError::PolicyInvalid("length ratio bounds must satisfy 0 <= low < 1 < high"));
        }
        Ok(())
    }

    fn accepts(&self, input_words: usize, output_words: usize) -> bool {
        if input_words == 0 {
            return output_words == 0;
        }
        let ratio = output_words as f64 / input_words as f64;
        let (low, high) = self.length_ratio_bounds;
        ratio >= low && ratio <= high
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub attempt: u32,
    pub response_digest: String,
    pub output_words: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageOutcome {
    Accepted,
    PassedThrough,
}

/// One stage of the sequential chain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: usize,
    pub entity_type: EntityType,
    pub prompt_digest: String,
    pub input_digest: String,
    pub output_digest: String,
    pub input_words: usize,
    pub attempts: Vec<AttemptRecord>,
    pub outcome: StageOutcome,
}

/// Holds templates, policy and the model id used for every stage request.
#[derive(Debug, Clone)]
pub struct CorefResolver {
    pub templates: TemplateSet,
    pub policy: ResolutionPolicy,
    pub model_id: String,
}

impl CorefResolver {
    pub fn new(templates: TemplateSet, policy: ResolutionPolicy, model_id: impl Into<String>) -> Self {
        Self { templates, policy, model_id: model_id.into() }
    }

    /// Resolves one entity type. The returned text is either a validated
    /// model output or, under the pass-through policy, `text` itself.
    pub fn resolve_entity_type<G: ChatGateway + ?Sized>(
        &self,
        text: &str,
        entity_type: EntityType,
        gateway: &G,
        stage: usize,
    ) -> Result<(String, StageTrace), CorefError> {
        self.policy.validate()?;
        let template = self.templates.get(entity_type).ok_or(CorefError::MissingTemplate(entity_type))?;
        let prompt = template.build_prompt(text)?;
        let request = CompletionRequest::new(self.model_id.clone(), prompt);
        let input_words = WhitespaceTokenizer.count(text);
        let max_attempts = match self.policy.on_reject {
            RejectPolicy::RetryOnceThenPassthrough => 2,
            RejectPolicy::Fail => 1,
        };
        let mut trace = StageTrace {
            stage,
            entity_type,
            prompt_digest: request.prompt_digest(),
            input_digest: sha256_hex(text.as_bytes()),
            output_digest: String::new(),
            input_words,
            attempts: Vec::new(),
            outcome: StageOutcome::PassedThrough,
        };
        let mut last_words = 0;
        for attempt in 1..=max_attempts {
            let response = gateway.complete(&request)?;
            let output_words = WhitespaceTokenizer.count(&response.text);
            let accepted = self.policy.accepts(input_words, output_words);
            trace.attempts.push(AttemptRecord {
                attempt,
                response_digest: sha256_hex(response.text.as_bytes()),
                output_words,
                accepted,
            });
            if accepted {
                trace.output_digest = sha256_hex(response.text.as_bytes());
                trace.outcome = StageOutcome::Accepted;
                return Ok((response.text, trace));
            }
            last_words = output_words;
        }
        match self.policy.on_reject {
            RejectPolicy::Fail => {
                Err(CorefError::ResolutionRejected { entity_type, input_words, output_words: last_words })
            }
            RejectPolicy::RetryOnceThenPassthrough => {
                trace.output_digest = trace.input_digest.clone();
                Ok((text.to_string(), trace))
            }
        }
    }

    /// Runs one stage per type in `policy.type_order`, chaining outputs.
    pub fn resolve_sequential<G: ChatGateway + ?Sized>(
        &self,
        text: &str,
        gateway: &G,
    ) -> Result<(String, Vec<StageTrace>), CorefError> {
        self.policy.validate()?;
        for t in &self.policy.type_order {
            let template = self.templates.get(*t).ok_or(CorefError::MissingTemplate(*t))?;
            template.validate()?;
        }
        let mut current = text.to_string();
        let mut traces = Vec::with_capacity(self.policy.type_order.len());
        for (stage, t) in self.policy.type_order.iter().enumerate() {
            let (next, trace) = self.resolve_entity_type(&current, *t, gateway, stage)?;
            traces.push(trace);
            current = next;
        }
        Ok((current, traces))
    }
}

/// Checks that each stage's output digest is the next stage's input digest.
pub fn trace_is_chained(traces: &[StageTrace]) -> bool {
    traces.windows(2).all(|w| w[0].output_digest == w[1].input_digest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::CompletionResponse;
    use alloc::format;
    use alloc::vec;
    use core::cell::RefCell;
    use core::time::Duration;

    /// Test double: maps the text between "Input_text: " and "\nOutput:" of
    /// the last input section through a function, recording call order.
    struct FnGateway<F: Fn(EntityType, &str) -> String> {
        f: F,
        calls: RefCell<Vec<EntityType>>,
    }

    fn stage_input(prompt: &str) -> (EntityType, &str) {
        let marker = "-Coreference Resolution Rules: ";
        let i = prompt.find(marker).unwrap() + marker.len();
        let ty = prompt[i..].split('-').next().unwrap().parse().unwrap();
        let start = prompt.rfind("Input_text: ").unwrap() + "Input_text: ".len();
        let end = prompt.rfind("\nOutput:").unwrap();
        (ty, &prompt[start..end])
    }

    impl<F: Fn(EntityType, &str) -> String> ChatGateway for FnGateway<F> {
        fn complete(&self, request: &CompletionRequest) -> Result<CompletionResponse, GatewayError> {
            let (ty, input) = stage_input(&request.user_text);
            self.calls.borrow_mut().push(ty);
            Ok(CompletionResponse { text: (self.f)(ty, input), latency: Duration::ZERO, backend_id: "fn".into() })
        }
    }

    fn gateway<F: Fn(EntityType, &str) -> String>(f: F) -> FnGateway<F> {
        FnGateway { f, calls: RefCell::new(Vec::new()) }
    }

    fn resolver(policy: ResolutionPolicy) -> CorefResolver {
        CorefResolver::new(TemplateSet::builtin(), policy, "test-model")
    }

    #[test]
    fn builtin_templates_parse_and_validate() {
        for t in EntityType::ALL {
            let tpl = CorefPromptTemplate::builtin(t);
            assert_eq!(tpl.entity_type, t);
            tpl.validate().unwrap();
        }
    }

    #[test]
    fn prompt_component_order_and_input_at_end() {
        let tpl = CorefPromptTemplate::builtin(EntityType::Person);
        let p = build_coref_prompt(&tpl, "Agent S. arrived.").unwrap();
        let pos = |needle: &str| p.find(needle).unwrap();
        assert!(pos(tpl.persona_text.as_str()) < pos(tpl.task_text.as_str()));
        assert!(pos(tpl.task_text.as_str()) < pos(tpl.context_text.as_str()));
        assert!(pos(tpl.context_text.as_str()) < pos(tpl.rules_text.as_str()));
        assert!(pos(tpl.rules_text.as_str()) < pos("Example 1:"));
        assert!(pos("Example 1:") < pos("-Input Text-"));
        assert!(p.trim_end().ends_with("Input_text: Agent S. arrived.\nOutput:"));
    }

    #[test]
    fn template_missing_fewshot_is_invalid() {
        let mut tpl = CorefPromptTemplate::builtin(EntityType::Person);
        tpl.fewshot_examples.clear();
        assert!(matches!(build_coref_prompt(&tpl, "x"), Err(CorefError::TemplateInvalid(_))));
        let src = CorefPromptTemplate::builtin_source(EntityType::Location);
        let stripped: String =
            src.split("[example]").next().unwrap().to_string() + "[input]\nInput_text: {input_text}\n";
        assert!(matches!(CorefPromptTemplate::parse(&stripped), Err(CorefError::TemplateInvalid(_))));
    }

    #[test]
    fn template_slot_rules() {
        let mut tpl = CorefPromptTemplate::builtin(EntityType::Person);
        tpl.input_text = "no slot here".into();
        assert!(tpl.validate().is_err());
        tpl.input_text = "{input_text} and {input_text}".into();
        assert!(tpl.validate().is_err());
        let mut tpl = CorefPromptTemplate::builtin(EntityType::Person);
        tpl.rules_text.push_str(" {input_text}");
        assert!(tpl.validate().is_err());
    }

    #[test]
    fn slot_marker_inside_input_is_preserved() {
        let tpl = CorefPromptTemplate::builtin(EntityType::Person);
        let p = build_coref_prompt(&tpl, "literal {input_text} stays").unwrap();
        assert!(p.contains("Input_text: literal {input_text} stays\nOutput:"));
        assert_eq!(p.matches("{input_text}").count(), 1);
    }

    #[test]
    fn resolve_with_rewrite() {
        let r = resolver(ResolutionPolicy::default());
        let gw = gateway(|_, s: &str| s.replace("BPA S.", "B.S."));
        let input = "Border Patrol Agent B.S. observed the vehicle. BPA S. contacted another agent.";
        let (out, trace) = r.resolve_entity_type(input, EntityType::Person, &gw, 0).unwrap();
        assert_eq!(out, "Border Patrol Agent B.S. observed the vehicle. B.S. contacted another agent.");
        assert_eq!(trace.outcome, StageOutcome::Accepted);
        assert_eq!(trace.output_digest, sha256_hex(out.as_bytes()));
    }

    #[test]
    fn echo_is_identity() {
        let r = resolver(ResolutionPolicy::default());
        let gw = gateway(|_, s: &str| s.to_string());
        let (out, _) = r.resolve_entity_type("Nothing here.", EntityType::Routes, &gw, 0).unwrap();
        assert_eq!(out, "Nothing here.");
    }

    #[test]
    fn summary_is_rejected_then_passed_through() {
        let input: String = (0..500).map(|i| format!("w{i}")).collect::<Vec<_>>().join(" ");
        let summary = "one two three four five six seven eight nine ten";
        let r = resolver(ResolutionPolicy::default());
        let gw = gateway(|_, _: &str| summary.to_string());
        let (out, trace) = r.resolve_entity_type(&input, EntityType::Person, &gw, 0).unwrap();
        assert_eq!(out, input);
        assert_eq!(trace.outcome, StageOutcome::PassedThrough);
        assert_eq!(trace.attempts.len(), 2);
        assert!(trace.attempts.iter().all(|a| !a.accepted && a.output_words == 10));
        assert_eq!(gw.calls.borrow().len(), 2);

        let strict = resolver(ResolutionPolicy { on_reject: RejectPolicy::Fail, ..Default::default() });
        let gw = gateway(|_, _: &str| summary.to_string());
        assert_eq!(
            strict.resolve_entity_type(&input, EntityType::Person, &gw, 0),
            Err(CorefError::ResolutionRejected { entity_type: EntityType::Person, input_words: 500, output_words: 10 })
        );
        assert_eq!(gw.calls.borrow().len(), 1);
    }

    #[test]
    fn retry_can_recover() {
        let r = resolver(ResolutionPolicy::default());
        let n = RefCell::new(0);
        let gw = gateway(|_, s: &str| {
            *n.borrow_mut() += 1;
            if *n.borrow() == 1 {
                "short".to_string()
            } else {
                s.to_string()
            }
        });
        let (out, trace) = r.resolve_entity_type("a b c d e", EntityType::Person, &gw, 0).unwrap();
        assert_eq!(out, "a b c d e");
        assert_eq!(trace.outcome, StageOutcome::Accepted);
        assert_eq!(trace.attempts.len(), 2);
    }

    #[test]
    fn disabled_bounds_accept_anything_nonempty() {
        let policy = ResolutionPolicy { length_ratio_bounds: (0.0, f64::INFINITY), ..Default::default() };
        let r = resolver(policy);
        let gw = gateway(|_, _: &str| "x".to_string());
        let (out, _) = r.resolve_entity_type("a b c d e f g h", EntityType::Person, &gw, 0).unwrap();
        assert_eq!(out, "x");
    }

    #[test]
    fn sequential_order_and_count() {
        let r = resolver(ResolutionPolicy::default());
        let gw = gateway(|_, s: &str| s.to_string());
        let (_, trace) = r.resolve_sequential("Some text.", &gw).unwrap();
        assert_eq!(*gw.calls.borrow(), EntityType::ALL.to_vec());
        assert_eq!(trace.len(), 7);
        assert!(trace_is_chained(&trace));

        let r = resolver(ResolutionPolicy { type_order: vec![EntityType::Person], ..Default::default() });
        let gw = gateway(|_, s: &str| s.to_string());
        r.resolve_sequential("Some text.", &gw).unwrap();
        assert_eq!(gw.calls.borrow().len(), 1);
    }

    #[test]
    fn sequential_composes_rewrites() {
        // f_k appends a type-specific suffix to one word; composing by hand is the oracle.
        let rewrite = |t: EntityType, s: &str| s.replacen("w", &format!("w{}", t.as_str().len()), 1);
        let text = "w a b c d e f g h i j";
        let mut expected = String::from(text);
        for t in EntityType::ALL {
            expected = rewrite(t, &expected);
        }
        let r = resolver(ResolutionPolicy::default());
        let gw = gateway(rewrite);
        let (out, trace) = r.resolve_sequential(text, &gw).unwrap();
        assert_eq!(out, expected);
        assert_eq!(out, "w14222312686 a b c d e f g h i j");
        assert!(trace_is_chained(&trace));
        assert_eq!(trace[0].input_digest, sha256_hex(text.as_bytes()));
        assert_eq!(trace[6].output_digest, sha256_hex(out.as_bytes()));
    }

    #[test]
    fn missing_template_fails_before_calls() {
        let mut set = TemplateSet::default();
        set.insert(CorefPromptTemplate::builtin(EntityType::Person));
        let r = CorefResolver::new(set, ResolutionPolicy::default(), "m");
        let gw = gateway(|_, s: &str| s.to_string());
        assert_eq!(r.resolve_sequential("x", &gw), Err(CorefError::MissingTemplate(EntityType::Location)));
        assert!(gw.calls.borrow().is_empty());
    }

    #[test]
    fn policy_validation() {
        let dup = ResolutionPolicy { type_order: vec![EntityType::Person, EntityType::Person], ..Default::default() };
        assert!(dup.validate().is_err());
        let bad = ResolutionPolicy { length_ratio_bounds: (1.0, 1.3), ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
