//! Evaluation of finished runs and paired baseline/full comparison reports.

use std::fs;
use std::path::{Path, PathBuf};

use casekg_core::eval::{
    aggregate, aggregate_report, apply_overrides, cluster_duplicates, round2, Averaging, CaseMetrics, DuplicateCluster,
    EvalError, MetricsReport, NoiseAnnotation, RunAggregate, SplitDirective,
};
use casekg_core::extraction::Lexicon;
use casekg_core::graph::{degree_stats, DegreeSummary, RankedNode};
use casekg_core::Mode;
use serde::{Deserialize, Serialize};

use crate::formats::{load_noise, load_overrides, parse_graphml, AnnotationError, GraphmlError, NoiseFile};
use crate::layout::RunLayout;
use crate::pipeline::{read_manifest, CaseStatus, StageError};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{0} has neither manifest.json nor eval/metrics.json")]
    NotARun(PathBuf),
    #[error("run manifest: {0}")]
    Manifest(#[from] StageError),
    #[error("{path}: {source}")]
    Graphml { path: PathBuf, source: GraphmlError },
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error("case {case_id}: {source}")]
    Case { case_id: String, source: EvalError },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{path} is a {found} run, expected {expected}")]
    WrongMode { path: PathBuf, found: Mode, expected: Mode },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    AnnotationFile,
    /// No annotation given: nodes in the government lexicon count as noise.
    DefaultLexicon,
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub threshold: u8,
    pub overrides: Vec<SplitDirective>,
    pub noise: Option<NoiseFile>,
    /// Used when `noise` is absent.
    pub fallback_lexicon: Lexicon,
    pub averaging: Averaging,
    pub strict: bool,
}

impl EvalOptions {
    pub fn load(
        threshold: u8,
        overrides: Option<&Path>,
        noise: Option<&Path>,
        fallback_lexicon: Lexicon,
        averaging: Averaging,
        strict: bool,
    ) -> Result<Self, ReportError> {
        Ok(Self {
            threshold,
            overrides: overrides.map(load_overrides).transpose()?.unwrap_or_default(),
            noise: noise.map(load_noise).transpose()?,
            fallback_lexicon,
            averaging,
            strict,
        })
    }

    fn annotation(&self, case_id: &str) -> NoiseAnnotation {
        match &self.noise {
            Some(f) => f.for_case(case_id),
            None => NoiseAnnotation::from_lexicon(self.fallback_lexicon.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseStructure {
    pub case_id: String,
    pub summary: DegreeSummary,
    /// Highest-degree nodes, at most ten.
    pub top_nodes: Vec<RankedNode>,
}

/// `eval/metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub mode: Mode,
    pub threshold: u8,
    pub averaging: Averaging,
    pub noise_source: NoiseSource,
    pub cases: Vec<CaseMetrics>,
    #[serde(default)]
    pub excluded_failed_cases: Vec<String>,
    pub aggregate: RunAggregate,
    #[serde(default)]
    pub structure: Vec<CaseStructure>,
}

#[derive(Serialize)]
struct ClusterLine<'a> {
    case_id: &'a str,
    #[serde(flatten)]
    cluster: &'a DuplicateCluster,
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    let io = |source| ReportError::Io { path: path.to_path_buf(), source };
    if let Some(p) = path.parent() {
        fs::create_dir_all(p).map_err(io)?;
    }
    fs::write(path, text).map_err(io)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| ReportError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    write_text(path, &text)
}

/// Scores every successful case of a run and writes `eval/metrics.json`,
/// `eval/per_case.csv` and `eval/clusters.jsonl` (for expert review).
pub fn evaluate_run(run_dir: &Path, opts: &EvalOptions) -> Result<RunMetrics, ReportError> {
    let layout = RunLayout::new(run_dir);
    let manifest = read_manifest(&layout)?;
    let mut cases = Vec::new();
    let mut structure = Vec::new();
    let mut cluster_lines = String::new();
    let mut excluded = Vec::new();
    for c in &manifest.cases {
        if c.status != CaseStatus::Ok {
            excluded.push(c.case_id.clone());
            continue;
        }
        let path = layout.graphml(&c.case_id, manifest.mode);
        let text = fs::read_to_string(&path).map_err(|source| ReportError::Io { path: path.clone(), source })?;
        let graph = parse_graphml(&text).map_err(|source| ReportError::Graphml { path: path.clone(), source })?;
        let case_err = |source| ReportError::Case { case_id: c.case_id.clone(), source };
        let clusters =
            apply_overrides(cluster_duplicates(&graph, opts.threshold), &c.case_id, &opts.overrides, opts.strict)
                .map_err(case_err)?;
        for cl in clusters.iter().filter(|cl| cl.members.len() > 1) {
            let line = ClusterLine { case_id: &c.case_id, cluster: cl };
            cluster_lines.push_str(&serde_json::to_string(&line).expect("cluster serializes"));
            cluster_lines.push('\n');
        }
        let metrics =
            CaseMetrics::evaluate(&graph, opts.threshold, &opts.overrides, &opts.annotation(&c.case_id), opts.strict)
                .map_err(case_err)?;
        cases.push(metrics);
        let (ranked, summary) = degree_stats(&graph);
        structure.push(CaseStructure {
            case_id: c.case_id.clone(),
            summary,
            top_nodes: ranked.into_iter().take(10).collect(),
        });
    }
    let result = RunMetrics {
        mode: manifest.mode,
        threshold: opts.threshold,
        averaging: opts.averaging,
        noise_source: if opts.noise.is_some() { NoiseSource::AnnotationFile } else { NoiseSource::DefaultLexicon },
        aggregate: aggregate(&cases, opts.averaging),
        cases,
        excluded_failed_cases: excluded,
        structure,
    };
    write_json(&layout.metrics(), &result)?;
    write_text(&layout.eval_dir().join("per_case.csv"), &per_case_csv(&result.cases)?)?;
    write_text(&layout.eval_dir().join("clusters.jsonl"), &cluster_lines)?;
    Ok(result)
}

fn per_case_csv(cases: &[CaseMetrics]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "case_id",
        "total_nodes",
        "total_edges",
        "duplicate_count",
        "duplication_rate_pct",
        "noise_count",
        "noise_rate_pct",
    ])?;
    for c in cases {
        w.write_record([
            c.case_id.clone(),
            c.total_nodes.to_string(),
            c.total_edges.to_string(),
            c.duplicate_count.to_string(),
            format!("{:.2}", c.duplication_rate_pct),
            c.noise_count.to_string(),
            format!("{:.2}", c.noise_rate_pct),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv is utf-8"))
}

/// Metrics for a run directory: evaluated fresh when the run has a manifest,
/// otherwise read from a stored `eval/metrics.json` (a pre-computed or
/// hand-written metrics document).
pub fn load_or_evaluate(run_dir: &Path, opts: &EvalOptions) -> Result<RunMetrics, ReportError> {
    let layout = RunLayout::new(run_dir);
    if layout.manifest().is_file() {
        return evaluate_run(run_dir, opts);
    }
    let path = layout.metrics();
    if !path.is_file() {
        return Err(ReportError::NotARun(run_dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(|source| ReportError::Io { path: path.clone(), source })?;
    serde_json::from_str(&text).map_err(|source| ReportError::Json { path, source })
}

/// Rounded view of one comparison row, as printed and written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub metric: String,
    pub baseline_pct: f64,
    pub corekg_pct: f64,
    pub absolute_drop: f64,
    pub relative_improvement_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDocument {
    pub report: MetricsReport,
    pub table: Vec<TableRow>,
    /// Cases whose graph summaries are known for both runs.
    pub structure: Vec<StructurePair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructurePair {
    pub case_id: String,
    pub baseline: DegreeSummary,
    pub corekg: DegreeSummary,
}

fn pair_structure(base: &[CaseStructure], full: &[CaseStructure]) -> Vec<StructurePair> {
    base.iter()
        .filter_map(|b| {
            full.iter().find(|f| f.case_id == b.case_id).map(|f| StructurePair {
                case_id: b.case_id.clone(),
                baseline: b.summary.clone(),
                corekg: f.summary.clone(),
            })
        })
        .collect()
}

fn structure_csv(pairs: &[StructurePair]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "case_id",
        "baseline_nodes",
        "baseline_edges",
        "baseline_max_degree",
        "corekg_nodes",
        "corekg_edges",
        "corekg_max_degree",
    ])?;
    for p in pairs {
        w.write_record([
            p.case_id.clone(),
            p.baseline.node_count.to_string(),
            p.baseline.edge_count.to_string(),
            p.baseline.max_degree.to_string(),
            p.corekg.node_count.to_string(),
            p.corekg.edge_count.to_string(),
            p.corekg.max_degree.to_string(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv is utf-8"))
}

pub fn compare_runs(
    baseline_dir: &Path,
    corekg_dir: &Path,
    opts: &EvalOptions,
    out_dir: &Path,
) -> Result<ComparisonDocument, ReportError> {
    let base = load_or_evaluate(baseline_dir, opts)?;
    let full = load_or_evaluate(corekg_dir, opts)?;
    for (dir, m, expected) in [(baseline_dir, &base, Mode::Baseline), (corekg_dir, &full, Mode::Corekg)] {
        if m.mode != expected {
            return Err(ReportError::WrongMode { path: dir.to_path_buf(), found: m.mode, expected });
        }
    }
    let report = aggregate_report(&base.cases, &full.cases, opts.averaging)?;
    let table: Vec<TableRow> = report
        .rows
        .iter()
        .map(|r| TableRow {
            metric: r.metric.clone(),
            baseline_pct: round2(r.baseline_pct),
            corekg_pct: round2(r.corekg_pct),
            absolute_drop: round2(r.absolute_drop_pct_points),
            relative_improvement_pct: r.relative_improvement_pct.map(round2),
        })
        .collect();
    let doc = ComparisonDocument { report, table, structure: pair_structure(&base.structure, &full.structure) };
    write_json(&out_dir.join("comparison.json"), &doc)?;
    write_text(&out_dir.join("comparison.csv"), &comparison_csv(&doc.table)?)?;
    write_text(&out_dir.join("per_case.csv"), &paired_csv(&doc.report)?)?;
    write_text(&out_dir.join("structure.csv"), &structure_csv(&doc.structure)?)?;
    Ok(doc)
}

fn comparison_csv(rows: &[TableRow]) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["metric", "baseline_pct", "corekg_pct", "absolute_drop", "relative_improvement_pct"])?;
    for r in rows {
        w.write_record([
            r.metric.clone(),
            format!("{:.2}", r.baseline_pct),
            format!("{:.2}", r.corekg_pct),
            format!("{:.2}", r.absolute_drop),
            r.relative_improvement_pct.map(|v| format!("{v:.2}")).unwrap_or_default(),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv is utf-8"))
}

/// Long-format per-case data for bar charts: one row per (case, metric).
fn paired_csv(report: &MetricsReport) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["case_id", "metric", "baseline", "corekg"])?;
    for c in &report.per_case {
        let rows = [
            ("node_duplication_rate", c.baseline.duplication_rate_pct, c.corekg.duplication_rate_pct),
            ("noise_rate", c.baseline.noise_rate_pct, c.corekg.noise_rate_pct),
            ("nodes", c.baseline.total_nodes as f64, c.corekg.total_nodes as f64),
            ("edges", c.baseline.total_edges as f64, c.corekg.total_edges as f64),
        ];
        for (metric, b, k) in rows {
            w.write_record([c.case_id.clone(), metric.to_string(), format!("{b:.2}"), format!("{k:.2}")])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| csv::Error::from(e.into_error()))?).expect("csv is utf-8"))
}

pub fn render_structure(pairs: &[StructurePair]) -> String {
    let mut out = format!("{:<24} {:>15} {:>15}\n", "case", "baseline n/e", "corekg n/e");
    for p in pairs {
        let b = format!("{}/{}", p.baseline.node_count, p.baseline.edge_count);
        let k = format!("{}/{}", p.corekg.node_count, p.corekg.edge_count);
        out.push_str(&format!("{:<24} {:>15} {:>15}\n", p.case_id, b, k));
    }
    out
}

pub fn render_table(rows: &[TableRow]) -> String {
    let mut out = format!(
        "{:<24} {:>10} {:>10} {:>14} {:>22}\n",
        "metric", "baseline %", "corekg %", "absolute drop", "relative improvement %"
    );
    for r in rows {
        let rel = r.relative_improvement_pct.map(|v| format!("{v:.2}")).unwrap_or_else(|| "n/a".into());
        out.push_str(&format!(
            "{:<24} {:>10.2} {:>10.2} {:>14.2} {:>22}\n",
            r.metric, r.baseline_pct, r.corekg_pct, r.absolute_drop, rel
        ));
    }
    out
}
