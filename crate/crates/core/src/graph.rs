//! Exact (name, type) merging of extracted records into a directed multigraph.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::entity::{normalize_name, EntityType, Mode};
use crate::extraction::{EntityRecord, RecordSource, RelationshipRecord};

pub const DESCRIPTION_SEPARATOR: &str = " | ";

/// Node identity: type first so key order is the canonical (type, name) order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeKey {
    pub entity_type: EntityType,
    pub name: String,
}

impl NodeKey {
    pub fn new(name: impl Into<String>, entity_type: EntityType) -> Self {
        Self { entity_type, name: name.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub name: String,
    pub entity_type: EntityType,
    pub description: String,
    pub degree: usize,
    pub provenance: Vec<RecordSource>,
}

impl Node {
    pub fn key(&self) -> NodeKey {
        NodeKey::new(self.name.clone(), self.entity_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edge {
    pub source: NodeKey,
    pub target: NodeKey,
    pub description: String,
    pub strength: u8,
    pub provenance: RecordSource,
}

impl Edge {
    fn sort_key(&self) -> (&NodeKey, &NodeKey, &str, u8, &RecordSource) {
        (&self.source, &self.target, self.description.as_str(), self.strength, &self.provenance)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    pub case_id: String,
    pub mode: Mode,
    pub nodes: BTreeMap<NodeKey, Node>,
    /// Edges in canonical (source, target, description) order.
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GraphError {
    #[error("edge endpoint {0:?} is not a node")]
    DanglingEdge(NodeKey),
    #[error("node {key:?} records degree {recorded} but has {actual} incident edges")]
    DegreeMismatch { key: NodeKey, recorded: usize, actual: usize },
    #[error("duplicate node {0:?}")]
    DuplicateNode(NodeKey),
}

impl KnowledgeGraph {
    pub fn empty(case_id: impl Into<String>, mode: Mode) -> Self {
        Self { case_id: case_id.into(), mode, nodes: BTreeMap::new(), edges: Vec::new() }
    }

    /// Assembles a graph from explicit nodes and edges, recomputing degrees
    /// and sorting edges canonically. Used by importers.
    pub fn from_parts(
        case_id: impl Into<String>,
        mode: Mode,
        nodes: impl IntoIterator<Item = Node>,
        edges: Vec<Edge>,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        for n in nodes {
            let key = n.key();
            if map.insert(key.clone(), n).is_some() {
                return Err(GraphError::DuplicateNode(key));
            }
        }
        let mut g = Self { case_id: case_id.into(), mode, nodes: map, edges };
        for e in &g.edges {
            for k in [&e.source, &e.target] {
                if !g.nodes.contains_key(k) {
                    return Err(GraphError::DanglingEdge(k.clone()));
                }
            }
        }
        g.finalize();
        Ok(g)
    }

    fn finalize(&mut self) {
        self.edges.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        for n in self.nodes.values_mut() {
            n.degree = 0;
        }
        for e in &self.edges {
            if let Some(n) = self.nodes.get_mut(&e.source) {
                n.degree += 1;
            }
            if let Some(n) = self.nodes.get_mut(&e.target) {
                n.degree += 1;
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Checks the structural invariants: no dangling edges, degrees equal
    /// incidence counts.
    pub fn validate(&self) -> Result<(), GraphError> {
        let mut incidence: BTreeMap<&NodeKey, usize> = BTreeMap::new();
        for e in &self.edges {
            for k in [&e.source, &e.target] {
                if !self.nodes.contains_key(k) {
                    return Err(GraphError::DanglingEdge(k.clone()));
                }
                *incidence.entry(k).or_default() += 1;
            }
        }
        for (k, n) in &self.nodes {
            let actual = incidence.get(k).copied().unwrap_or(0);
            if n.degree != actual {
                return Err(GraphError::DegreeMismatch { key: k.clone(), recorded: n.degree, actual });
            }
        }
        Ok(())
    }
}

/// One node per distinct (normalized name, type). Records are folded in
/// (case, chunk) order, stable within a chunk; descriptions are joined with
/// [`DESCRIPTION_SEPARATOR`] and provenance is unioned in first-seen order.
pub fn merge_records(entities: &[EntityRecord]) -> BTreeMap<NodeKey, Node> {
    let mut ordered: Vec<&EntityRecord> = entities.iter().collect();
    ordered.sort_by(|a, b| a.source.cmp(&b.source));
    let mut nodes: BTreeMap<NodeKey, Node> = BTreeMap::new();
    for rec in ordered {
        let name = normalize_name(&rec.name);
        if name.is_empty() {
            continue;
        }
        let key = NodeKey::new(name.clone(), rec.entity_type);
        let node = nodes.entry(key).or_insert_with(|| Node {
            name,
            entity_type: rec.entity_type,
            description: String::new(),
            degree: 0,
            provenance: Vec::new(),
        });
        let desc = rec.description.trim();
        if !desc.is_empty() {
            if !node.description.is_empty() {
                node.description.push_str(DESCRIPTION_SEPARATOR);
            }
            node.description.push_str(desc);
        }
        if !node.provenance.contains(&rec.source) {
            node.provenance.push(rec.source.clone());
        }
    }
    nodes
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BuildWarnings {
    /// Relationships whose endpoint name matched no node.
    pub unmatched_endpoints: usize,
    /// Relationships whose endpoint name matched nodes of several types.
    pub ambiguous_endpoints: usize,
}

impl BuildWarnings {
    pub fn dropped_edges(&self) -> usize {
        self.unmatched_endpoints + self.ambiguous_endpoints
    }
}

enum Resolution {
    Unique(NodeKey),
    Missing,
    Ambiguous,
}

/// Merges entities into nodes and resolves each relationship endpoint by
/// normalized name. An endpoint must match exactly one node (of any type);
/// otherwise the edge is dropped and tallied. Parallel edges are kept.
pub fn build_graph(
    entities: &[EntityRecord],
    relationships: &[RelationshipRecord],
    case_id: &str,
    mode: Mode,
) -> (KnowledgeGraph, BuildWarnings) {
    let nodes = merge_records(entities);
    let mut by_name: BTreeMap<&str, BTreeSet<EntityType>> = BTreeMap::new();
    for k in nodes.keys() {
        by_name.entry(k.name.as_str()).or_default().insert(k.entity_type);
    }
    let resolve = |raw: &str| -> Resolution {
        let name = normalize_name(raw);
        match by_name.get(name.as_str()) {
            None => Resolution::Missing,
            Some(types) if types.len() == 1 => {
                Resolution::Unique(NodeKey::new(name.clone(), *types.iter().next().unwrap_or(&EntityType::Person)))
            }
            Some(_) => Resolution::Ambiguous,
        }
    };
    let mut ordered: Vec<&RelationshipRecord> = relationships.iter().collect();
    ordered.sort_by(|a, b| a.source.cmp(&b.source));
    let mut warnings = BuildWarnings::default();
    let mut edges = Vec::new();
    for r in ordered {
        let (s, t) = (resolve(&r.source_name), resolve(&r.target_name));
        match (s, t) {
            (Resolution::Unique(source), Resolution::Unique(target)) => edges.push(Edge {
                source,
                target,
                description: String::from(r.description.trim()),
                strength: r.strength,
                provenance: r.source.clone(),
            }),
            (Resolution::Ambiguous, _) | (_, Resolution::Ambiguous) => warnings.ambiguous_endpoints += 1,
            _ => warnings.unmatched_endpoints += 1,
        }
    }
    let mut graph = KnowledgeGraph { case_id: String::from(case_id), mode, nodes, edges };
    graph.finalize();
    (graph, warnings)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeSummary {
    pub node_count: usize,
    pub edge_count: usize,
    pub max_degree: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedNode {
    pub name: String,
    pub entity_type: EntityType,
    pub degree: usize,
}

/// Nodes by degree descending, ties broken by (type, name).
pub fn degree_stats(graph: &KnowledgeGraph) -> (Vec<RankedNode>, DegreeSummary) {
    let mut ranked: Vec<RankedNode> = graph
        .nodes
        .values()
        .map(|n| RankedNode { name: n.name.clone(), entity_type: n.entity_type, degree: n.degree })
        .collect();
    ranked.sort_by(|a, b| b.degree.cmp(&a.degree).then(a.entity_type.cmp(&b.entity_type)).then(a.name.cmp(&b.name)));
    let summary = DegreeSummary {
        node_count: graph.node_count(),
        edge_count: graph.edge_count(),
        max_degree: ranked.first().map_or(0, |n| n.degree),
    };
    (ranked, summary)
}
