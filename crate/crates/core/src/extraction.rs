//! Extraction prompts (full and baseline variants), the delimiter record
//! format and the government-entity filter.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::entity::{normalize_name, EntityType, Mode};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractionError {
    #[error("invalid extraction config: {0}")]
    ConfigInvalid(String),
    #[error("invalid delimiters: {0}")]
    DelimitersInvalid(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelimiterSet {
    pub tuple_delimiter: String,
    pub record_delimiter: String,
    pub completion_delimiter: String,
}

impl Default for DelimiterSet {
    fn default() -> Self {
        Self {
            tuple_delimiter: "<|>".into(),
            record_delimiter: "##".into(),
            completion_delimiter: "<|COMPLETE|>".into(),
        }
    }
}

impl DelimiterSet {
    pub fn validate(&self) -> Result<(), ExtractionError> {
        let all = [&self.tuple_delimiter, &self.record_delimiter, &self.completion_delimiter];
        if all.iter().any(|d| d.is_empty()) {
            return Err(ExtractionError::DelimitersInvalid("delimiters must be non-empty"));
        }
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                if i != j && b.contains(a.as_str()) {
                    return Err(ExtractionError::DelimitersInvalid(
                        "delimiters must be distinct and none may contain another",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Where a record came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct RecordSource {
    pub case_id: String,
    pub chunk_id: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub name: String,
    pub entity_type: EntityType,
    pub description: String,
    pub source: RecordSource,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationshipRecord {
    pub source_name: String,
    pub target_name: String,
    pub description: String,
    pub strength: u8,
    pub source: RecordSource,
}

/// Few-shot example: input text and the records it should produce. The
/// expected output is rendered with the configured delimiters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionExample {
    pub input: String,
    pub entities: Vec<(String, EntityType, String)>,
    pub relationships: Vec<(String, String, String, u8)>,
}

impl ExtractionExample {
    /// The smuggling-ring / messaging-app example shipped with both prompt variants.
    pub fn default_example() -> Self {
        Self {
            input: "Smugglers from the Horizon Smuggling Ring used WhatsApp.".into(),
            entities: alloc::vec![
                (
                    "SMUGGLERS".into(),
                    EntityType::Person,
                    "Individuals belonging to the Horizon Smuggling Ring who coordinated through WhatsApp".into(),
                ),
                (
                    "HORIZON SMUGGLING RING".into(),
                    EntityType::Organization,
                    "Smuggling organization the smugglers belong to".into(),
                ),
                (
                    "WHATSAPP".into(),
                    EntityType::MeansOfCommunication,
                    "Messaging application used by the smugglers".into(),
                ),
            ],
            relationships: alloc::vec![
                ("SMUGGLERS".into(), "WHATSAPP".into(), "The smugglers communicated using WhatsApp".into(), 9,),
                (
                    "SMUGGLERS".into(),
                    "HORIZON SMUGGLING RING".into(),
                    "The smugglers are members of the Horizon Smuggling Ring".into(),
                    9,
                ),
            ],
        }
    }

    fn render_output(&self, delims: &DelimiterSet) -> String {
        let source = RecordSource::default();
        let entities: Vec<EntityRecord> = self
            .entities
            .iter()
            .map(|(n, t, d)| EntityRecord {
                name: n.clone(),
                entity_type: *t,
                description: d.clone(),
                source: source.clone(),
            })
            .collect();
        let relationships: Vec<RelationshipRecord> = self
            .relationships
            .iter()
            .map(|(s, t, d, w)| RelationshipRecord {
                source_name: s.clone(),
                target_name: t.clone(),
                description: d.clone(),
                strength: *w,
                source: source.clone(),
            })
            .collect();
        serialize_records(&entities, &relationships, delims)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionPromptConfig {
    pub mode: Mode,
    pub entity_types: Vec<EntityType>,
    pub type_definitions: BTreeMap<EntityType, String>,
    pub fewshot_examples: Vec<ExtractionExample>,
    pub delimiters: DelimiterSet,
    pub include_sequential_ordering: bool,
    pub include_government_filter: bool,
}

pub fn default_type_definitions() -> BTreeMap<EntityType, String> {
    let defs = [
        (EntityType::Person, "A named or role-identified individual: smugglers, drivers, agents, defendants, migrants."),
        (EntityType::Location, "A geographic place such as a city, state, country, border area, ranch or stash house."),
        (EntityType::Routes, "A road, highway, interstate, freeway or trail used to move people or goods."),
        (EntityType::Organization, "A smuggling ring, cartel, company or other formal group that is not a government or court body."),
        (EntityType::MeansOfTransportation, "A vehicle used for transport, for example a car, pickup truck, tractor-trailer or boat."),
        (EntityType::MeansOfCommunication, "A device or service used to communicate, for example a cell phone, radio or WhatsApp."),
        (EntityType::SmuggledItems, "People or goods moved illegally, for example undocumented aliens, drugs, weapons or cash. Legal concepts such as evidence or a verdict are not smuggled items."),
    ];
    defs.into_iter().map(|(t, d)| (t, d.to_string())).collect()
}

impl ExtractionPromptConfig {
    pub fn for_mode(mode: Mode) -> Self {
        let full = mode == Mode::Corekg;
        Self {
            mode,
            entity_types: EntityType::ALL.to_vec(),
            type_definitions: if full { default_type_definitions() } else { BTreeMap::new() },
            fewshot_examples: alloc::vec![ExtractionExample::default_example()],
            delimiters: DelimiterSet::default(),
            include_sequential_ordering: full,
            include_government_filter: full,
        }
    }

    pub fn corekg() -> Self {
        Self::for_mode(Mode::Corekg)
    }

    pub fn baseline() -> Self {
        Self::for_mode(Mode::Baseline)
    }

    pub fn validate(&self) -> Result<(), ExtractionError> {
        let invalid = |m: String| Err(ExtractionError::ConfigInvalid(m));
        self.delimiters.validate()?;
        let distinct: BTreeSet<_> = self.entity_types.iter().collect();
        if self.entity_types.len() != EntityType::ALL.len() || distinct.len() != EntityType::ALL.len() {
            return invalid(format!(
                "all seven entity types are required exactly once, got {}",
                self.entity_types.len()
            ));
        }
        let full = self.mode == Mode::Corekg;
        if self.include_sequential_ordering != full || self.include_government_filter != full {
            return invalid(format!(
                "{} mode requires sequential ordering and government filter flags to be {}",
                self.mode,
                if full { "on" } else { "off" }
            ));
        }
        if self.fewshot_examples.is_empty() {
            return invalid("at least one few-shot example is required".into());
        }
        if full {
            for t in &self.entity_types {
                if self.type_definitions.get(t).is_none_or(|d| d.trim().is_empty()) {
                    return invalid(format!("missing definition for {t}"));
                }
            }
        }
        Ok(())
    }

    fn type_list(&self) -> String {
        let names: Vec<&str> = self.entity_types.iter().map(|t| t.as_str()).collect();
        names.join(", ")
    }
}

/// Prompt blocks in render order. Blocks marked `full_only` appear only in
/// the full pipeline's prompt; everything else is shared verbatim with the
/// baseline so the two variants differ in exactly those blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptBlock {
    pub name: &'static str,
    pub full_only: bool,
    pub text: String,
}

pub fn extraction_prompt_blocks(
    chunk_text: &str,
    config: &ExtractionPromptConfig,
) -> Result<Vec<PromptBlock>, ExtractionError> {
    config.validate()?;
    let d = &config.delimiters;
    let types = config.type_list();
    let mut blocks = Vec::new();
    let mut push = |name, full_only, text: String| blocks.push(PromptBlock { name, full_only, text });

    push(
        "goal",
        false,
        format!(
            "-Goal-\nYou are a named entity and relationship extraction system for legal case documents about human smuggling. \
             Given a text and a list of entity types, identify every entity of those types that the text states explicitly, \
             and every relationship among the identified entities. Do not infer or complete missing information. \
             The output is used to build a knowledge graph of the smuggling network.\n\
             Entity types: [{types}]\n"
        ),
    );
    if config.include_sequential_ordering {
        let mut text = String::from("-Entity Type Definitions-\n");
        for (i, t) in config.entity_types.iter().enumerate() {
            let def = config.type_definitions.get(t).map(String::as_str).unwrap_or("");
            text.push_str(&format!("{}. {}: {}\n", i + 1, t.as_str(), def.trim()));
        }
        push("definitions", true, text);
    }
    push(
        "entity_step",
        false,
        format!(
            "-Steps-\nEntity extraction. For each entity extract:\n\
             entity_name: the name as it appears, capitalized\n\
             entity_type: one of [{types}]\n\
             entity_description: the entity's role or attributes in the text\n\
             Format each entity as (\"entity\"{td}<entity_name>{td}<entity_type>{td}<entity_description>)\n",
            td = d.tuple_delimiter
        ),
    );
    if config.include_sequential_ordering {
        let order: Vec<&str> = config.entity_types.iter().map(|t| t.as_str()).collect();
        push(
            "ordering",
            true,
            format!(
                "Extract entity types strictly in this order, finishing all entities of one type before moving to the next: {}.\n\
                 PERSON: when a person appears with a title (\"Agent R.\"), use the name alone (\"R.\") as entity_name and put the title in the description.\n\
                 LOCATION: combine a city and its state into one entity (\"LAREDO, TEXAS\").\n\
                 Only after all entity types are done, continue with relationships.\n",
                order.join(", ")
            ),
        );
    }
    push(
        "relationship_step",
        false,
        format!(
            "Relationship extraction. From the entities identified above, extract every clearly stated relationship, \
             including ones embedded in complex sentences. For each relationship extract:\n\
             source_entity: name of the source entity\n\
             target_entity: name of the target entity\n\
             relationship_description: how the two entities are connected\n\
             relationship_strength: an integer from 0 to 10 (0-3 weak: indirect or uncertain; 4-6 moderate: explicit but thin context; \
             7-10 strong: clear, direct and supported by context)\n\
             Format each relationship as (\"relationship\"{td}<source_entity>{td}<target_entity>{td}<relationship_description>{td}<relationship_strength>)\n",
            td = d.tuple_delimiter
        ),
    );
    if config.include_government_filter {
        push(
            "government_filter",
            true,
            "Filter government entities. Do not extract government bodies or entities tied to the trial and legal procedure \
             (for example court, district court, jury, prosecution, government, appeal, law enforcement agencies acting as institutions). \
             If any such entity or a relationship involving one was extracted above, remove it before answering.\n"
                .to_string(),
        );
    }
    push(
        "output_format",
        false,
        format!(
            "Output format. Return all entities and relationships as a single list using {rd} as the separator between records. \
             End the output with {cd}\n",
            rd = d.record_delimiter,
            cd = d.completion_delimiter
        ),
    );
    let examples: &[ExtractionExample] = match config.mode {
        Mode::Corekg => &config.fewshot_examples,
        Mode::Baseline => &config.fewshot_examples[..1],
    };
    let mut ex_text = String::from("-Examples-\n");
    for (i, ex) in examples.iter().enumerate() {
        ex_text.push_str(&format!("Example {}:\nText: {}\nOutput:\n{}\n\n", i + 1, ex.input, ex.render_output(d)));
    }
    push("examples", false, ex_text);
    push("input", false, format!("-Real Data-\nEntity types: [{types}]\nText: {chunk_text}\nOutput:\n"));
    Ok(blocks)
}

pub fn build_extraction_prompt(chunk_text: &str, config: &ExtractionPromptConfig) -> Result<String, ExtractionError> {
    let blocks = extraction_prompt_blocks(chunk_text, config)?;
    let mut out = String::new();
    for (i, b) in blocks.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&b.text);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedRecord {
    /// Zero-based index among candidate records.
    pub index: usize,
    /// One-based line of the raw output on which the candidate starts.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParseReport {
    pub candidates: usize,
    pub parsed: usize,
    pub skipped: Vec<SkippedRecord>,
    pub completion_seen: bool,
}

impl ParseReport {
    /// True when no record parsed.
    pub fn empty_output(&self) -> bool {
        self.parsed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParsedOutput {
    pub entities: Vec<EntityRecord>,
    pub relationships: Vec<RelationshipRecord>,
    pub report: ParseReport,
}

fn clean_field(s: &str) -> &str {
    s.trim().trim_matches('"').trim()
}

/// Parses delimiter-formatted model output. Never fails: malformed records
/// are skipped and reported, and text after the completion delimiter is
/// ignored. The caller must pass valid delimiters.
pub fn parse_extraction_output(raw: &str, delimiters: &DelimiterSet, source: &RecordSource) -> ParsedOutput {
    let mut out = ParsedOutput::default();
    let body = match raw.find(delimiters.completion_delimiter.as_str()) {
        Some(i) if !delimiters.completion_delimiter.is_empty() => {
            out.report.completion_seen = true;
            &raw[..i]
        }
        _ => raw,
    };
    let mut offset = 0;
    let segments: Vec<&str> = if delimiters.record_delimiter.is_empty() {
        alloc::vec![body]
    } else {
        body.split(delimiters.record_delimiter.as_str()).collect()
    };
    for segment in segments {
        let seg_start = offset;
        offset += segment.len() + delimiters.record_delimiter.len();
        let trimmed = segment.trim();
        if trimmed.is_empty() {
            continue;
        }
        let index = out.report.candidates;
        out.report.candidates += 1;
        let lead = segment.len() - segment.trim_start().len();
        let line = body[..seg_start + lead].matches('\n').count() + 1;
        match parse_record(trimmed, delimiters, source) {
            Ok(Record::Entity(e)) => {
                out.report.parsed += 1;
                out.entities.push(e);
            }
            Ok(Record::Relationship(r)) => {
                out.report.parsed += 1;
                out.relationships.push(r);
            }
            Err(reason) => out.report.skipped.push(SkippedRecord { index, line, reason }),
        }
    }
    out
}

enum Record {
    Entity(EntityRecord),
    Relationship(RelationshipRecord),
}

fn parse_record(candidate: &str, d: &DelimiterSet, source: &RecordSource) -> Result<Record, String> {
    let inner = candidate.strip_prefix('(').and_then(|s| s.strip_suffix(')')).unwrap_or(candidate);
    let fields: Vec<&str> = if d.tuple_delimiter.is_empty() {
        alloc::vec![inner]
    } else {
        inner.split(d.tuple_delimiter.as_str()).map(clean_field).collect()
    };
    let tag = fields[0].to_ascii_lowercase();
    match tag.as_str() {
        "entity" => {
            if fields.len() != 4 {
                return Err(format!("entity record has {} fields, expected 4", fields.len()));
            }
            let name = normalize_name(fields[1]);
            if name.is_empty() {
                return Err("entity name is empty".into());
            }
            let entity_type = fields[2].parse::<EntityType>().map_err(|e| e.to_string())?;
            Ok(Record::Entity(EntityRecord {
                name,
                entity_type,
                description: fields[3].to_string(),
                source: source.clone(),
            }))
        }
        "relationship" => {
            if fields.len() != 5 {
                return Err(format!("relationship record has {} fields, expected 5", fields.len()));
            }
            let source_name = normalize_name(fields[1]);
            let target_name = normalize_name(fields[2]);
            if source_name.is_empty() || target_name.is_empty() {
                return Err("relationship endpoint is empty".into());
            }
            let strength: u8 =
                fields[4].parse().map_err(|_| format!("relationship strength {:?} is not an integer", fields[4]))?;
            if strength > 10 {
                return Err(format!("relationship strength {strength} is outside 0-10"));
            }
            Ok(Record::Relationship(RelationshipRecord {
                source_name,
                target_name,
                description: fields[3].to_string(),
                strength,
                source: source.clone(),
            }))
        }
        other => Err(format!("unknown record tag {other:?}")),
    }
}

/// Renders records in the delimiter format, entities first, ending with the
/// completion delimiter.
pub fn serialize_records(entities: &[EntityRecord], relationships: &[RelationshipRecord], d: &DelimiterSet) -> String {
    let td = d.tuple_delimiter.as_str();
    let mut records: Vec<String> = Vec::with_capacity(entities.len() + relationships.len());
    for e in entities {
        records.push(format!("(\"entity\"{td}{}{td}{}{td}{})", e.name, e.entity_type, e.description));
    }
    for r in relationships {
        records.push(format!(
            "(\"relationship\"{td}{}{td}{}{td}{}{td}{})",
            r.source_name, r.target_name, r.description, r.strength
        ));
    }
    let sep = format!("{}\n", d.record_delimiter);
    let mut out = records.join(&sep);
    if !out.is_empty() {
        out.push_str(&sep);
    }
    out.push_str(&d.completion_delimiter);
    out
}

/// Normalized term set matched against normalized entity names.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Lexicon {
    terms: BTreeSet<String>,
}

pub const DEFAULT_GOVERNMENT_TERMS: [&str; 12] = [
    "court",
    "district court",
    "court of appeals",
    "state court",
    "appeal",
    "appeal process",
    "judgment of acquittal",
    "motion for judgment of acquittal",
    "plain error standard",
    "jury",
    "prosecution",
    "government",
];

impl Lexicon {
    pub fn new<I, S>(terms: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let terms = terms.into_iter().map(|t| normalize_name(t.as_ref())).filter(|t| !t.is_empty()).collect();
        Self { terms }
    }

    pub fn default_government() -> Self {
        Self::new(DEFAULT_GOVERNMENT_TERMS)
    }

    /// One term per line; blank lines and lines starting with '#' are ignored.
    pub fn parse(text: &str) -> Self {
        Self::new(text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')))
    }

    pub fn extend(&mut self, other: &Lexicon) {
        self.terms.extend(other.terms.iter().cloned());
    }

    pub fn contains(&self, name: &str) -> bool {
        self.terms.contains(&normalize_name(name))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.terms.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub entities: Vec<EntityRecord>,
    pub relationships: Vec<RelationshipRecord>,
    pub removed_entities: usize,
    pub removed_relationships: usize,
}

/// Drops entities whose normalized name is in the lexicon, and every
/// relationship with an endpoint that normalizes into the lexicon.
pub fn filter_government_entities(
    entities: Vec<EntityRecord>,
    relationships: Vec<RelationshipRecord>,
    lexicon: &Lexicon,
) -> FilterOutcome {
    let n_e = entities.len();
    let n_r = relationships.len();
    let entities: Vec<_> = entities.into_iter().filter(|e| !lexicon.contains(&e.name)).collect();
    let relationships: Vec<_> = relationships
        .into_iter()
        .filter(|r| !lexicon.contains(&r.source_name) && !lexicon.contains(&r.target_name))
        .collect();
    FilterOutcome {
        removed_entities: n_e - entities.len(),
        removed_relationships: n_r - relationships.len(),
        entities,
        relationships,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn src() -> RecordSource {
        RecordSource { case_id: "c1".into(), chunk_id: 0 }
    }

    #[test]
    fn default_delimiters_valid() {
        DelimiterSet::default().validate().unwrap();
        let bad = DelimiterSet { tuple_delimiter: "#".into(), ..Default::default() };
        assert!(bad.validate().is_err());
        let dup = DelimiterSet { record_delimiter: "<|>".into(), ..Default::default() };
        assert!(dup.validate().is_err());
    }

    #[test]
    fn corekg_prompt_has_filter_step() {
        let p = build_extraction_prompt("Some text.", &ExtractionPromptConfig::corekg()).unwrap();
        assert!(p.contains("Filter government entities."));
        assert!(p.contains("-Entity Type Definitions-"));
        assert!(p.contains("strictly in this order"));
        assert!(p.ends_with("Text: Some text.\nOutput:\n"));
    }

    #[test]
    fn baseline_prompt_lacks_filter_and_ordering() {
        let p = build_extraction_prompt("Some text.", &ExtractionPromptConfig::baseline()).unwrap();
        assert!(!p.contains("Filter government entities."));
        assert!(!p.contains("strictly in this order"));
        assert!(!p.contains("-Entity Type Definitions-"));
        assert!(p.contains("Example 1:"));
        assert!(!p.contains("Example 2:"));
    }

    #[test]
    fn corekg_block_order() {
        let blocks = extraction_prompt_blocks("x", &ExtractionPromptConfig::corekg()).unwrap();
        let names: Vec<_> = blocks.iter().map(|b| b.name).collect();
        assert_eq!(
            names,
            [
                "goal",
                "definitions",
                "entity_step",
                "ordering",
                "relationship_step",
                "government_filter",
                "output_format",
                "examples",
                "input"
            ]
        );
    }

    #[test]
    fn six_types_is_invalid() {
        let mut cfg = ExtractionPromptConfig::corekg();
        cfg.entity_types.pop();
        assert!(matches!(build_extraction_prompt("x", &cfg), Err(ExtractionError::ConfigInvalid(_))));
    }

    #[test]
    fn mode_flags_are_forced() {
        let mut cfg = ExtractionPromptConfig::baseline();
        cfg.include_government_filter = true;
        assert!(cfg.validate().is_err());
        let mut cfg = ExtractionPromptConfig::corekg();
        cfg.include_sequential_ordering = false;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn parses_example_output() {
        let raw = "(\"entity\"<|>SMUGGLERS<|>PERSON<|>Members of the ring\")##\n\
                   (\"entity\"<|>WhatsApp<|>MEANS_OF_COMMUNICATION<|>Messaging app\")##\n\
                   (\"relationship\"<|>SMUGGLERS<|>WHATSAPP<|>Used for coordination<|>9)##\n<|COMPLETE|>";
        let out = parse_extraction_output(raw, &DelimiterSet::default(), &src());
        assert_eq!(out.entities.len(), 2);
        assert_eq!(out.entities[0].name, "SMUGGLERS");
        assert_eq!(out.entities[0].entity_type, EntityType::Person);
        assert_eq!(out.entities[0].description, "Members of the ring");
        assert_eq!(out.entities[1].name, "WHATSAPP");
        assert_eq!(out.entities[1].entity_type, EntityType::MeansOfCommunication);
        assert_eq!(out.relationships.len(), 1);
        let r = &out.relationships[0];
        assert_eq!((r.source_name.as_str(), r.target_name.as_str(), r.strength), ("SMUGGLERS", "WHATSAPP", 9));
        assert!(out.report.completion_seen);
        assert_eq!(out.report.parsed, 3);
        assert!(out.report.skipped.is_empty());
    }

    #[test]
    fn arity_and_range_rules() {
        let raw = "(\"entity\"<|>A<|>PERSON)##(\"relationship\"<|>A<|>B<|>knows<|>11)##(\"entity\"<|>B<|>PERSON<|>b)";
        let out = parse_extraction_output(raw, &DelimiterSet::default(), &src());
        assert_eq!(out.report.candidates, 3);
        assert_eq!(out.report.parsed, 1);
        assert_eq!(out.report.skipped.len(), 2);
        assert!(out.relationships.is_empty());
        assert!(!out.report.completion_seen);
    }

    #[test]
    fn text_after_completion_ignored_and_lines_reported() {
        let raw = "preamble\n##(\"entity\"<|>A<|>PERSON<|>a)<|COMPLETE|>(\"entity\"<|>B<|>PERSON<|>b)";
        let out = parse_extraction_output(raw, &DelimiterSet::default(), &src());
        assert_eq!(out.entities.len(), 1);
        assert_eq!(out.report.skipped.len(), 1);
        assert_eq!(out.report.skipped[0].line, 1);
        let raw = "\n\n(\"bogus\"<|>x)";
        let out = parse_extraction_output(raw, &DelimiterSet::default(), &src());
        assert_eq!(out.report.skipped[0].line, 3);
        assert!(out.report.empty_output());
    }

    #[test]
    fn non_integer_strength_is_skipped() {
        let raw = "(\"relationship\"<|>A<|>B<|>x<|>high)";
        let out = parse_extraction_output(raw, &DelimiterSet::default(), &src());
        assert_eq!(out.report.skipped.len(), 1);
    }

    #[test]
    fn serialize_then_parse() {
        let e = vec![EntityRecord {
            name: "A.Y.".into(),
            entity_type: EntityType::Person,
            description: "driver".into(),
            source: src(),
        }];
        let r = vec![RelationshipRecord {
            source_name: "A.Y.".into(),
            target_name: "LAREDO, TEXAS".into(),
            description: "drove to".into(),
            strength: 7,
            source: src(),
        }];
        let text = serialize_records(&e, &r, &DelimiterSet::default());
        let out = parse_extraction_output(&text, &DelimiterSet::default(), &src());
        assert_eq!(out.entities, e);
        assert_eq!(out.relationships, r);
        assert_eq!(serialize_records(&[], &[], &DelimiterSet::default()), "<|COMPLETE|>");
    }

    fn ent(name: &str, t: EntityType) -> EntityRecord {
        EntityRecord { name: name.into(), entity_type: t, description: String::new(), source: src() }
    }

    #[test]
    fn government_filter() {
        let lex = Lexicon::default_government();
        let entities = vec![
            ent("DISTRICT COURT", EntityType::Organization),
            ent("J.I. INC.", EntityType::Organization),
            ent("A", EntityType::Person),
        ];
        let rels = vec![
            RelationshipRecord {
                source_name: "A".into(),
                target_name: "DISTRICT COURT".into(),
                description: "tried in".into(),
                strength: 5,
                source: src(),
            },
            RelationshipRecord {
                source_name: "A".into(),
                target_name: "J.I. INC.".into(),
                description: "worked for".into(),
                strength: 8,
                source: src(),
            },
        ];
        let out = filter_government_entities(entities, rels, &lex);
        let names: Vec<_> = out.entities.iter().map(|e| e.name.as_str()).collect();
        assert_eq!(names, ["J.I. INC.", "A"]);
        assert_eq!(out.relationships.len(), 1);
        assert_eq!(out.relationships[0].target_name, "J.I. INC.");
        assert_eq!((out.removed_entities, out.removed_relationships), (1, 1));
    }

    #[test]
    fn lexicon_parsing() {
        let lex = Lexicon::parse("# comment\n  district   court \n\njury\n");
        assert_eq!(lex.len(), 2);
        assert!(lex.contains("District Court"));
        assert!(lex.contains(" JURY"));
        assert!(!lex.contains("court"));
        assert_eq!(Lexicon::default_government().len(), 12);
    }
}
