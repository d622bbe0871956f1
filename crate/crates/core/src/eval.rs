//! Graph-quality metrics: intra-type fuzzy duplicate clustering, duplication
//! and noise rates, and baseline-versus-full comparison arithmetic.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::entity::{normalize_name, EntityType};
use crate::extraction::Lexicon;
use crate::graph::KnowledgeGraph;

pub const DEFAULT_THRESHOLD: u8 = 75;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("string is empty after normalization")]
    EmptyString,
    #[error("graph has no nodes")]
    ZeroNodes,
    #[error("total node count {total} is smaller than clustered membership {members}")]
    TotalTooSmall { total: usize, members: usize },
    #[error("baseline value is zero; relative improvement is undefined")]
    DivisionByZero,
    #[error("unknown member {name:?} of type {entity_type} in case {case_id:?}")]
    UnknownMember { case_id: String, entity_type: EntityType, name: String },
    #[error("annotated noise node {name:?} is not in case {case_id:?}")]
    UnknownAnnotatedNode { case_id: String, name: String },
    #[error("case sets differ: only in baseline {only_baseline:?}, only in full run {only_corekg:?}")]
    CaseMismatch { only_baseline: Vec<String>, only_corekg: Vec<String> },
    #[error("duplicate case id {0:?} in report input")]
    DuplicateCase(String),
}

/// Bit masks of character positions in a pattern, for Hyyrö's bit-parallel
/// LCS. Supports patterns of any length via multi-word carry propagation.
#[derive(Debug, Clone)]
pub struct PatternMasks {
    len: usize,
    blocks: usize,
    masks: BTreeMap<char, Vec<u64>>,
}

impl PatternMasks {
    pub fn new(pattern: &[char]) -> Self {
        let blocks = pattern.len().div_ceil(64).max(1);
        let mut masks: BTreeMap<char, Vec<u64>> = BTreeMap::new();
        for (i, c) in pattern.iter().enumerate() {
            masks.entry(*c).or_insert_with(|| vec![0; blocks])[i / 64] |= 1u64 << (i % 64);
        }
        Self { len: pattern.len(), blocks, masks }
    }

    /// Length of the longest common subsequence of the pattern and `text`.
    pub fn lcs_len(&self, text: &[char]) -> usize {
        let mut v = vec![!0u64; self.blocks];
        for c in text {
            let Some(pm) = self.masks.get(c) else { continue };
            let mut carry = false;
            for (vb, pb) in v.iter_mut().zip(pm) {
                let u = *vb & pb;
                let (s1, c1) = vb.overflowing_add(u);
                let (s2, c2) = s1.overflowing_add(carry as u64);
                carry = c1 || c2;
                *vb = s2 | (*vb & !u);
            }
        }
        let mut zeros = 0;
        for (b, vb) in v.iter().enumerate() {
            let valid = (self.len - b * 64).min(64);
            let mask = if valid == 64 { !0u64 } else { (1u64 << valid) - 1 };
            zeros += valid - (vb & mask).count_ones() as usize;
        }
        zeros
    }
}

/// `round(100 * lcs / n)`, halves rounded up, in integer arithmetic.
fn window_score(lcs: usize, n: usize) -> u8 {
    ((200 * lcs + n) / (2 * n)) as u8
}

fn best_window_score(shorter: &[char], masks: &PatternMasks, longer: &[char]) -> u8 {
    let n = shorter.len();
    let mut best = 0;
    for w in longer.windows(n) {
        let score = window_score(masks.lcs_len(w), n);
        if score > best {
            best = score;
            if best == 100 {
                break;
            }
        }
    }
    best
}

/// Partial ratio of two names after normalization (trim, collapse
/// whitespace, uppercase): the best indel similarity between the shorter
/// string and every equal-length window of the longer one, as an integer
/// 0-100. For a window `w` of length `n`, the similarity is
/// `100 * (1 - indel(s, w) / 2n) = 100 * lcs(s, w) / n`.
pub fn partial_ratio(a: &str, b: &str) -> Result<u8, EvalError> {
    let a: Vec<char> = normalize_name(a).chars().collect();
    let b: Vec<char> = normalize_name(b).chars().collect();
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyString);
    }
    let (shorter, longer) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
    Ok(best_window_score(shorter, &PatternMasks::new(shorter), longer))
}

/// A connected component of the intra-type similarity graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DuplicateCluster {
    pub entity_type: EntityType,
    /// Defaults to the smallest member; overrides may assign new labels.
    pub label: String,
    pub members: BTreeSet<String>,
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Clusters names of one entity type: an edge joins two names whose partial
/// ratio is at least `threshold`; clusters are connected components,
/// singletons included. Names are normalized and deduplicated first.
pub fn cluster_names<'a>(
    entity_type: EntityType,
    names: impl IntoIterator<Item = &'a str>,
    threshold: u8,
) -> Vec<DuplicateCluster> {
    let names: BTreeSet<String> = names.into_iter().map(normalize_name).filter(|n| !n.is_empty()).collect();
    let names: Vec<String> = names.into_iter().collect();
    let chars: Vec<Vec<char>> = names.iter().map(|n| n.chars().collect()).collect();
    let masks: Vec<PatternMasks> = chars.iter().map(|c| PatternMasks::new(c)).collect();
    let mut dsu = DisjointSet::new(names.len());
    for i in 0..names.len() {
        for j in i + 1..names.len() {
            if dsu.find(i) == dsu.find(j) {
                continue;
            }
            let score = if chars[i].len() <= chars[j].len() {
                best_window_score(&chars[i], &masks[i], &chars[j])
            } else {
                best_window_score(&chars[j], &masks[j], &chars[i])
            };
            if score >= threshold {
                dsu.union(i, j);
            }
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        groups.entry(dsu.find(i)).or_default().insert(name.clone());
    }
    let mut clusters: Vec<DuplicateCluster> = groups
        .into_values()
        .map(|members| DuplicateCluster {
            entity_type,
            label: members.iter().next().cloned().unwrap_or_default(),
            members,
        })
        .collect();
    clusters.sort();
    clusters
}

/// Per-type clustering of a graph's node names. Nodes of different types are
/// never linked.
pub fn cluster_duplicates(graph: &KnowledgeGraph, threshold: u8) -> Vec<DuplicateCluster> {
    let mut by_type: BTreeMap<EntityType, Vec<&str>> = BTreeMap::new();
    for k in graph.nodes.keys() {
        by_type.entry(k.entity_type).or_default().push(k.name.as_str());
    }
    by_type.into_iter().flat_map(|(t, names)| cluster_names(t, names, threshold)).collect()
}

/// Expert correction: move `member` out of its cluster into the cluster
/// labelled `new_label` (created if absent).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitDirective {
    pub case_id: String,
    pub entity_type: EntityType,
    pub member: String,
    pub new_label: String,
}

/// Applies the directives for `case_id` in file order. In strict mode a
/// directive naming an absent member fails; otherwise it is ignored.
pub fn apply_overrides(
    mut clusters: Vec<DuplicateCluster>,
    case_id: &str,
    directives: &[SplitDirective],
    strict: bool,
) -> Result<Vec<DuplicateCluster>, EvalError> {
    for d in directives.iter().filter(|d| d.case_id == case_id) {
        let member = normalize_name(&d.member);
        let Some(from) = clusters.iter().position(|c| c.entity_type == d.entity_type && c.members.contains(&member))
        else {
            if strict {
                return Err(EvalError::UnknownMember {
                    case_id: case_id.to_string(),
                    entity_type: d.entity_type,
                    name: d.member.clone(),
                });
            }
            continue;
        };
        clusters[from].members.remove(&member);
        let target = clusters.iter().position(|c| c.entity_type == d.entity_type && c.label == d.new_label);
        match target {
            Some(i) => {
                clusters[i].members.insert(member);
            }
            None => clusters.push(DuplicateCluster {
                entity_type: d.entity_type,
                label: d.new_label.clone(),
                members: BTreeSet::from([member]),
            }),
        }
        if clusters[from].members.is_empty() {
            clusters.remove(from);
        }
    }
    clusters.sort();
    Ok(clusters)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DuplicationMetrics {
    pub duplicate_count: usize,
    pub duplication_rate_pct: f64,
}

/// Redundant nodes `sum(|C| - 1)` and their share of all nodes, in percent.
pub fn duplication_metrics(clusters: &[DuplicateCluster], total_nodes: usize) -> Result<DuplicationMetrics, EvalError> {
    if total_nodes == 0 {
        return Err(EvalError::ZeroNodes);
    }
    let members: usize = clusters.iter().map(|c| c.members.len()).sum();
    if members > total_nodes {
        return Err(EvalError::TotalTooSmall { total: total_nodes, members });
    }
    let duplicate_count: usize = clusters.iter().map(|c| c.members.len().saturating_sub(1)).sum();
    Ok(DuplicationMetrics {
        duplicate_count,
        duplication_rate_pct: 100.0 * duplicate_count as f64 / total_nodes as f64,
    })
}

/// Non-informative node labels for one case: explicit names plus an optional
/// lexicon applied to every case.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct NoiseAnnotation {
    pub names: BTreeSet<String>,
    pub lexicon: Lexicon,
}

impl NoiseAnnotation {
    pub fn from_lexicon(lexicon: Lexicon) -> Self {
        Self { names: BTreeSet::new(), lexicon }
    }

    pub fn with_names<I, S>(mut self, names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        self.names.extend(names.into_iter().map(|n| normalize_name(n.as_ref())));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMetrics {
    pub noise_count: usize,
    pub noise_rate_pct: f64,
}

/// Share of nodes (by name, any type) that are annotated as noise. In strict
/// mode every explicitly annotated name must be a node; lexicon terms never
/// need to be present.
pub fn noise_metrics(
    graph: &KnowledgeGraph,
    annotation: &NoiseAnnotation,
    strict: bool,
) -> Result<NoiseMetrics, EvalError> {
    if graph.nodes.is_empty() {
        return Err(EvalError::ZeroNodes);
    }
    if strict {
        let present: BTreeSet<&str> = graph.nodes.keys().map(|k| k.name.as_str()).collect();
        if let Some(missing) = annotation.names.iter().find(|n| !present.contains(n.as_str())) {
            return Err(EvalError::UnknownAnnotatedNode { case_id: graph.case_id.clone(), name: missing.clone() });
        }
    }
    let noise_count = graph
        .nodes
        .keys()
        .filter(|k| annotation.names.contains(&k.name) || annotation.lexicon.contains(&k.name))
        .count();
    Ok(NoiseMetrics { noise_count, noise_rate_pct: 100.0 * noise_count as f64 / graph.nodes.len() as f64 })
}

/// Rounds half away from zero without relying on `std` float intrinsics.
fn round_half_away(x: f64) -> f64 {
    let t = x as i64 as f64;
    let frac = x - t;
    if frac >= 0.5 {
        t + 1.0
    } else if frac <= -0.5 {
        t - 1.0
    } else {
        t
    }
}

/// Rounds to two decimals; used only when reporting.
pub fn round2(x: f64) -> f64 {
    round_half_away(x * 100.0) / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub absolute_drop: f64,
    pub relative_improvement_pct: f64,
}

impl Comparison {
    pub fn rounded(self) -> Self {
        Self {
            absolute_drop: round2(self.absolute_drop),
            relative_improvement_pct: round2(self.relative_improvement_pct),
        }
    }
}

/// `baseline - corekg` and `100 * (baseline - corekg) / baseline`, at full precision.
pub fn comparison_metrics(baseline_pct: f64, corekg_pct: f64) -> Result<Comparison, EvalError> {
    if baseline_pct == 0.0 {
        return Err(EvalError::DivisionByZero);
    }
    let absolute_drop = baseline_pct - corekg_pct;
    Ok(Comparison { absolute_drop, relative_improvement_pct: 100.0 * absolute_drop / baseline_pct })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseMetrics {
    pub case_id: String,
    pub total_nodes: usize,
    pub total_edges: usize,
    pub cluster_count: usize,
    pub duplicate_count: usize,
    pub duplication_rate_pct: f64,
    pub noise_count: usize,
    pub noise_rate_pct: f64,
}

impl CaseMetrics {
    /// Evaluates one graph. An empty graph yields zero rates.
    pub fn evaluate(
        graph: &KnowledgeGraph,
        threshold: u8,
        overrides: &[SplitDirective],
        noise: &NoiseAnnotation,
        strict: bool,
    ) -> Result<Self, EvalError> {
        let clusters = apply_overrides(cluster_duplicates(graph, threshold), &graph.case_id, overrides, strict)?;
        let (dup, noise) = if graph.nodes.is_empty() {
            (
                DuplicationMetrics { duplicate_count: 0, duplication_rate_pct: 0.0 },
                NoiseMetrics { noise_count: 0, noise_rate_pct: 0.0 },
            )
        } else {
            (duplication_metrics(&clusters, graph.node_count())?, noise_metrics(graph, noise, strict)?)
        };
        Ok(Self {
            case_id: graph.case_id.clone(),
            total_nodes: graph.node_count(),
            total_edges: graph.edge_count(),
            cluster_count: clusters.len(),
            duplicate_count: dup.duplicate_count,
            duplication_rate_pct: dup.duplication_rate_pct,
            noise_count: noise.noise_count,
            noise_rate_pct: noise.noise_rate_pct,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    /// Unweighted mean of per-case rates.
    #[default]
    Macro,
    /// Pooled counts over pooled node totals.
    Micro,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregate {
    pub cases: usize,
    pub total_nodes: usize,
    pub duplicate_count: usize,
    pub noise_count: usize,
    pub duplication_rate_pct: f64,
    pub noise_rate_pct: f64,
}

pub fn aggregate(cases: &[CaseMetrics], averaging: Averaging) -> RunAggregate {
    let n = cases.len();
    let total_nodes: usize = cases.iter().map(|c| c.total_nodes).sum();
    let duplicate_count: usize = cases.iter().map(|c| c.duplicate_count).sum();
    let noise_count: usize = cases.iter().map(|c| c.noise_count).sum();
    let (dup, noise) = match averaging {
        Averaging::Macro if n > 0 => (
            cases.iter().map(|c| c.duplication_rate_pct).sum::<f64>() / n as f64,
            cases.iter().map(|c| c.noise_rate_pct).sum::<f64>() / n as f64,
        ),
        Averaging::Micro if total_nodes > 0 => {
            (100.0 * duplicate_count as f64 / total_nodes as f64, 100.0 * noise_count as f64 / total_nodes as f64)
        }
        _ => (0.0, 0.0),
    };
    RunAggregate {
        cases: n,
        total_nodes,
        duplicate_count,
        noise_count,
        duplication_rate_pct: dup,
        noise_rate_pct: noise,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub baseline_pct: f64,
    pub corekg_pct: f64,
    pub absolute_drop_pct_points: f64,
    /// Absent when the baseline rate is zero.
    pub relative_improvement_pct: Option<f64>,
}

impl ComparisonRow {
    pub fn new(metric: &str, baseline_pct: f64, corekg_pct: f64) -> Self {
        let relative = comparison_metrics(baseline_pct, corekg_pct).ok().map(|c| c.relative_improvement_pct);
        Self {
            metric: metric.to_string(),
            baseline_pct,
            corekg_pct,
            absolute_drop_pct_points: baseline_pct - corekg_pct,
            relative_improvement_pct: relative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseComparison {
    pub case_id: String,
    pub baseline: CaseMetrics,
    pub corekg: CaseMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub averaging: Averaging,
    pub baseline: RunAggregate,
    pub corekg: RunAggregate,
    pub rows: Vec<ComparisonRow>,
    pub per_case: Vec<CaseComparison>,
}

fn index_cases(cases: &[CaseMetrics]) -> Result<BTreeMap<&str, &CaseMetrics>, EvalError> {
    let mut map = BTreeMap::new();
    for c in cases {
        if map.insert(c.case_id.as_str(), c).is_some() {
            return Err(EvalError::DuplicateCase(c.case_id.clone()));
        }
    }
    Ok(map)
}

/// Pairs per-case metrics of the two runs by case id and aggregates them.
pub fn aggregate_report(
    baseline: &[CaseMetrics],
    corekg: &[CaseMetrics],
    averaging: Averaging,
) -> Result<MetricsReport, EvalError> {
    let b = index_cases(baseline)?;
    let c = index_cases(corekg)?;
    let only_baseline: Vec<String> = b.keys().filter(|k| !c.contains_key(*k)).map(|k| k.to_string()).collect();
    let only_corekg: Vec<String> = c.keys().filter(|k| !b.contains_key(*k)).map(|k| k.to_string()).collect();
    if !only_baseline.is_empty() || !only_corekg.is_empty() {
        return Err(EvalError::CaseMismatch { only_baseline, only_corekg });
    }
    let per_case = b
        .iter()
        .map(|(id, bm)| CaseComparison { case_id: id.to_string(), baseline: (*bm).clone(), corekg: c[id].clone() })
        .collect();
    let ab = aggregate(baseline, averaging);
    let ac = aggregate(corekg, averaging);
    let rows = vec![
        ComparisonRow::new("node_duplication_rate", ab.duplication_rate_pct, ac.duplication_rate_pct),
        ComparisonRow::new("noise_rate", ab.noise_rate_pct, ac.noise_rate_pct),
    ];
    Ok(MetricsReport { averaging, baseline: ab, corekg: ac, rows, per_case })
}

#[cfg(test)]
mod tests {
    extern crate std;

    use super::*;
    use crate::entity::Mode;
    use crate::extraction::{EntityRecord, RecordSource};
    use crate::graph::build_graph;
    use proptest::prelude::*;

    /// Naive oracle: O(n*m) DP LCS over every window, float rounding.
    fn naive_partial(a: &str, b: &str) -> u8 {
        let a: Vec<char> = normalize_name(a).chars().collect();
        let b: Vec<char> = normalize_name(b).chars().collect();
        let (s, l) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        let n = s.len();
        let mut best = 0u8;
        for start in 0..=l.len() - n {
            let w = &l[start..start + n];
            let mut dp = vec![vec![0usize; n + 1]; n + 1];
            for i in 1..=n {
                for j in 1..=n {
                    dp[i][j] = if s[i - 1] == w[j - 1] { dp[i - 1][j - 1] + 1 } else { dp[i - 1][j].max(dp[i][j - 1]) };
                }
            }
            let indel = 2 * n - 2 * dp[n][n];
            let score = (100.0 * (1.0 - indel as f64 / (2 * n) as f64) + 0.5).floor() as u8;
            best = best.max(score);
        }
        best
    }

    #[test]
    fn partial_ratio_examples() {
        assert_eq!(partial_ratio("abc", "abc"), Ok(100));
        assert_eq!(partial_ratio("Y.", "A.Y."), Ok(100));
        assert_eq!(partial_ratio("abcd", "Xabc"), Ok(75));
        assert_eq!(partial_ratio("  ", "abc"), Err(EvalError::EmptyString));
    }

    #[test]
    fn lcs_multiword_patterns() {
        let long: Vec<char> = "ab".repeat(70).chars().collect();
        let masks = PatternMasks::new(&long);
        assert_eq!(masks.lcs_len(&long), 140);
        let text: Vec<char> = "a".repeat(200).chars().collect();
        assert_eq!(masks.lcs_len(&text), 70);
    }

    proptest! {
        #[test]
        fn partial_ratio_matches_oracle(a in "[ab .XY]{1,24}", b in "[ab .XY]{1,24}") {
            prop_assume!(!normalize_name(&a).is_empty() && !normalize_name(&b).is_empty());
            prop_assert_eq!(partial_ratio(&a, &b).unwrap(), naive_partial(&a, &b));
            prop_assert_eq!(partial_ratio(&a, &b), partial_ratio(&b, &a));
        }

        #[test]
        fn full_score_iff_substring(a in "[abc]{1,8}", b in "[abc]{1,16}") {
            let (s, l) = if a.len() <= b.len() { (&a, &b) } else { (&b, &a) };
            prop_assert_eq!(partial_ratio(&a, &b).unwrap() == 100, l.contains(s.as_str()));
        }

        #[test]
        fn raising_threshold_never_adds_duplicates(names in proptest::collection::vec("[ABC.]{1,6}", 1..12), t in 0u8..100) {
            let count = |th| {
                let cl = cluster_names(EntityType::Person, names.iter().map(String::as_str), th);
                cl.iter().map(|c| c.members.len() - 1).sum::<usize>()
            };
            prop_assert!(count(t + 1) <= count(t));
        }
    }

    fn graph_of(nodes: &[(&str, EntityType)]) -> KnowledgeGraph {
        let recs: Vec<EntityRecord> = nodes
            .iter()
            .map(|(n, t)| EntityRecord {
                name: (*n).into(),
                entity_type: *t,
                description: String::new(),
                source: RecordSource::default(),
            })
            .collect();
        build_graph(&recs, &[], "c1", Mode::Baseline).0
    }

    fn member_sets(clusters: &[DuplicateCluster]) -> Vec<Vec<&str>> {
        clusters.iter().map(|c| c.members.iter().map(String::as_str).collect()).collect()
    }

    #[test]
    fn clusters_are_intra_type() {
        let g = graph_of(&[("A.Y.", EntityType::Person), ("Y.", EntityType::Person), ("LAREDO", EntityType::Location)]);
        let cl = cluster_duplicates(&g, 75);
        assert_eq!(member_sets(&cl), [vec!["A.Y.", "Y."], vec!["LAREDO"]]);
        assert_eq!(cl[0].entity_type, EntityType::Person);
    }

    #[test]
    fn chained_similarity_forms_one_cluster() {
        // "ABCD"~"BCDE" = 75, "BCDE"~"CDEF" = 75, "ABCD"~"CDEF" = 50.
        assert_eq!(partial_ratio("ABCD", "CDEF"), Ok(50));
        let cl = cluster_names(EntityType::Person, ["ABCD", "BCDE", "CDEF"], 75);
        assert_eq!(member_sets(&cl), [vec!["ABCD", "BCDE", "CDEF"]]);
    }

    #[test]
    fn all_singletons_below_threshold() {
        let cl = cluster_names(EntityType::Routes, ["I-35", "US-59", "FM 1472"], 75);
        assert_eq!(cl.len(), 3);
        assert_eq!(duplication_metrics(&cl, 3).unwrap().duplicate_count, 0);
    }

    fn vehicle_cluster() -> Vec<DuplicateCluster> {
        vec![DuplicateCluster {
            entity_type: EntityType::MeansOfTransportation,
            label: "STOLEN WHITE PICKUP TRUCK".into(),
            members: BTreeSet::from([
                "STOLEN WHITE PICKUP TRUCK".into(),
                "WHITE OLDER FORD PICKUP TRUCK".into(),
                "WHITE PICKUP TRUCK".into(),
            ]),
        }]
    }

    #[test]
    fn split_override() {
        let d = SplitDirective {
            case_id: "c1".into(),
            entity_type: EntityType::MeansOfTransportation,
            member: "white pickup truck".into(),
            new_label: "second truck".into(),
        };
        let out = apply_overrides(vehicle_cluster(), "c1", core::slice::from_ref(&d), true).unwrap();
        let mut sizes: Vec<_> = out.iter().map(|c| c.members.len()).collect();
        sizes.sort();
        assert_eq!(sizes, [1, 2]);
        // Directives for other cases are ignored.
        assert_eq!(apply_overrides(vehicle_cluster(), "c2", &[d], true).unwrap(), vehicle_cluster());
        assert_eq!(apply_overrides(vehicle_cluster(), "c1", &[], true).unwrap(), vehicle_cluster());
    }

    #[test]
    fn override_unknown_member() {
        let d = SplitDirective {
            case_id: "c1".into(),
            entity_type: EntityType::MeansOfTransportation,
            member: "blue van".into(),
            new_label: "x".into(),
        };
        assert!(matches!(
            apply_overrides(vehicle_cluster(), "c1", core::slice::from_ref(&d), true),
            Err(EvalError::UnknownMember { .. })
        ));
        assert_eq!(apply_overrides(vehicle_cluster(), "c1", &[d], false).unwrap(), vehicle_cluster());
    }

    fn clusters_of_sizes(sizes: &[usize]) -> Vec<DuplicateCluster> {
        let mut k = 0;
        sizes
            .iter()
            .map(|s| {
                let members: BTreeSet<String> = (0..*s)
                    .map(|_| {
                        k += 1;
                        alloc::format!("N{k}")
                    })
                    .collect();
                DuplicateCluster { entity_type: EntityType::Person, label: String::new(), members }
            })
            .collect()
    }

    #[test]
    fn duplication_arithmetic() {
        let m = duplication_metrics(&clusters_of_sizes(&[3, 2, 1, 1, 1, 1, 1]), 10).unwrap();
        assert_eq!(m.duplicate_count, 3);
        assert!((m.duplication_rate_pct - 30.0).abs() < 1e-12);
        let m = duplication_metrics(&clusters_of_sizes(&[1, 1, 1]), 3).unwrap();
        assert_eq!((m.duplicate_count, m.duplication_rate_pct), (0, 0.0));
        let m = duplication_metrics(&clusters_of_sizes(&[2, 2]), 4).unwrap();
        assert_eq!((m.duplicate_count, m.duplication_rate_pct), (2, 50.0));
        assert_eq!(duplication_metrics(&[], 0), Err(EvalError::ZeroNodes));
    }

    #[test]
    fn noise_arithmetic() {
        let names = ["A", "B", "C", "D", "E", "F", "COURT", "JURY"];
        let g = graph_of(&names.map(|n| (n, EntityType::Organization)));
        let ann = NoiseAnnotation::default().with_names(["court", "jury"]);
        let m = noise_metrics(&g, &ann, true).unwrap();
        assert_eq!((m.noise_count, m.noise_rate_pct), (2, 25.0));

        let lex = NoiseAnnotation::from_lexicon(Lexicon::default_government());
        assert_eq!(noise_metrics(&g, &lex, true).unwrap().noise_count, 2);

        let clean: Vec<String> = (0..42).map(|i| alloc::format!("N{i}")).collect();
        let g42 = graph_of(&clean.iter().map(|n| (n.as_str(), EntityType::Person)).collect::<Vec<_>>());
        assert_eq!(noise_metrics(&g42, &lex, true).unwrap().noise_rate_pct, 0.0);

        let bad = NoiseAnnotation::default().with_names(["NOT A NODE"]);
        assert!(matches!(noise_metrics(&g, &bad, true), Err(EvalError::UnknownAnnotatedNode { .. })));
        assert_eq!(noise_metrics(&g, &bad, false).unwrap().noise_count, 0);
        assert_eq!(noise_metrics(&graph_of(&[]), &bad, false), Err(EvalError::ZeroNodes));
    }

    #[test]
    fn comparison_values() {
        let c = comparison_metrics(30.38, 20.27).unwrap().rounded();
        assert_eq!((c.absolute_drop, c.relative_improvement_pct), (10.11, 33.28));
        let c = comparison_metrics(27.41, 16.89).unwrap().rounded();
        assert_eq!(c.absolute_drop, 10.52);
        // 100 * 10.52 / 27.41 = 38.3801...
        assert_eq!(c.relative_improvement_pct, 38.38);
        let c = comparison_metrics(12.5, 12.5).unwrap();
        assert_eq!((c.absolute_drop, c.relative_improvement_pct), (0.0, 0.0));
        assert_eq!(comparison_metrics(0.0, 1.0), Err(EvalError::DivisionByZero));
    }

    proptest! {
        #[test]
        fn comparison_sign(b in 0.01f64..100.0, c in 0.0f64..100.0) {
            let r = comparison_metrics(b, c).unwrap();
            prop_assert_eq!(r.relative_improvement_pct > 0.0, c < b);
            prop_assert!(r.relative_improvement_pct <= 100.0);
        }
    }

    #[test]
    fn round2_half_away() {
        assert_eq!(round2(33.27848), 33.28);
        assert_eq!(round2(-1.005000001), -1.01);
        assert_eq!(round2(2.0), 2.0);
    }

    fn case(id: &str, dup: f64, noise: f64) -> CaseMetrics {
        CaseMetrics {
            case_id: id.into(),
            total_nodes: 10,
            total_edges: 0,
            cluster_count: 0,
            duplicate_count: 0,
            duplication_rate_pct: dup,
            noise_count: 0,
            noise_rate_pct: noise,
        }
    }

    #[test]
    fn macro_average_and_mismatch() {
        let b = [case("1", 20.0, 0.0), case("2", 40.0, 0.0)];
        let c = [case("2", 10.0, 0.0), case("1", 10.0, 0.0)];
        let r = aggregate_report(&b, &c, Averaging::Macro).unwrap();
        assert_eq!(r.baseline.duplication_rate_pct, 30.0);
        assert_eq!(r.rows[0].absolute_drop_pct_points, 20.0);
        assert_eq!(r.rows[1].relative_improvement_pct, None);
        assert_eq!(r.per_case[0].case_id, "1");
        assert!(matches!(aggregate_report(&b, &c[..1], Averaging::Macro), Err(EvalError::CaseMismatch { .. })));
    }

    #[test]
    fn paired_aggregates_reproduce_table_rows() {
        let r = aggregate_report(&[case("1", 30.38, 27.41)], &[case("1", 20.27, 16.89)], Averaging::Macro).unwrap();
        assert_eq!(round2(r.rows[0].absolute_drop_pct_points), 10.11);
        assert_eq!(round2(r.rows[0].relative_improvement_pct.unwrap()), 33.28);
        assert_eq!(round2(r.rows[1].absolute_drop_pct_points), 10.52);
    }
}
