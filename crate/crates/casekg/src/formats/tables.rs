//! Node and edge tables as CSV, in canonical graph order, with a lossless
//! importer.

use std::io::{Read, Write};

use casekg_core::extraction::RecordSource;
use casekg_core::graph::{Edge, GraphError, KnowledgeGraph, Node, NodeKey};
use casekg_core::{EntityType, Mode};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("table row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRow {
    pub name: String,
    #[serde(rename = "type")]
    pub entity_type: EntityType,
    pub description: String,
    pub degree: usize,
    pub chunks: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRow {
    pub source: String,
    pub source_type: EntityType,
    pub target: String,
    pub target_type: EntityType,
    pub description: String,
    pub strength: u8,
    pub chunk: usize,
}

pub fn node_rows(graph: &KnowledgeGraph) -> Vec<NodeRow> {
    graph
        .nodes
        .values()
        .map(|n| NodeRow {
            name: n.name.clone(),
            entity_type: n.entity_type,
            description: n.description.clone(),
            degree: n.degree,
            chunks: n.provenance.iter().map(|p| p.chunk_id.to_string()).collect::<Vec<_>>().join(";"),
        })
        .collect()
}

pub fn edge_rows(graph: &KnowledgeGraph) -> Vec<EdgeRow> {
    graph
        .edges
        .iter()
        .map(|e| EdgeRow {
            source: e.source.name.clone(),
            source_type: e.source.entity_type,
            target: e.target.name.clone(),
            target_type: e.target.entity_type,
            description: e.description.clone(),
            strength: e.strength,
            chunk: e.provenance.chunk_id,
        })
        .collect()
}

fn write_rows<W: Write, R: Serialize>(out: W, header: &[&str], rows: &[R]) -> Result<(), TableError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub const NODE_HEADER: [&str; 5] = ["name", "type", "description", "degree", "chunks"];
pub const EDGE_HEADER: [&str; 7] =
    ["source", "source_type", "target", "target_type", "description", "strength", "chunk"];

/// Writes both tables; empty graphs produce header-only files.
pub fn export_tables<N: Write, E: Write>(graph: &KnowledgeGraph, nodes: N, edges: E) -> Result<(), TableError> {
    write_rows(nodes, &NODE_HEADER, &node_rows(graph))?;
    write_rows(edges, &EDGE_HEADER, &edge_rows(graph))
}

fn read_rows<R: Read, T: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<T>, TableError> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().collect::<Result<Vec<T>, _>>().map_err(TableError::from)
}

pub fn import_tables<N: Read, E: Read>(
    case_id: &str,
    mode: Mode,
    nodes: N,
    edges: E,
) -> Result<KnowledgeGraph, TableError> {
    let src = |chunk_id| RecordSource { case_id: case_id.to_string(), chunk_id };
    let node_rows: Vec<NodeRow> = read_rows(nodes)?;
    let edge_rows: Vec<EdgeRow> = read_rows(edges)?;
    let mut nodes = Vec::with_capacity(node_rows.len());
    for (i, r) in node_rows.iter().enumerate() {
        let provenance = if r.chunks.is_empty() {
            Vec::new()
        } else {
            r.chunks
                .split(';')
                .map(|c| c.parse().map(src))
                .collect::<Result<_, _>>()
                .map_err(|_| TableError::Row { row: i + 1, message: format!("bad chunk list {:?}", r.chunks) })?
        };
        nodes.push(Node {
            name: r.name.clone(),
            entity_type: r.entity_type,
            description: r.description.clone(),
            degree: 0,
            provenance,
        });
    }
    let edges = edge_rows
        .into_iter()
        .map(|r| Edge {
            source: NodeKey::new(r.source, r.source_type),
            target: NodeKey::new(r.target, r.target_type),
            description: r.description,
            strength: r.strength,
            provenance: src(r.chunk),
        })
        .collect();
    let graph = KnowledgeGraph::from_parts(case_id, mode, nodes, edges)?;
    for (i, r) in node_rows.iter().enumerate() {
        let actual = graph.nodes[&NodeKey::new(r.name.clone(), r.entity_type)].degree;
        if actual != r.degree {
            return Err(TableError::Row {
                row: i + 1,
                message: format!("degree {} but {actual} incident edges", r.degree),
            });
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use casekg_core::extraction::{EntityRecord, RelationshipRecord};
    use casekg_core::graph::build_graph;

    fn export(g: &KnowledgeGraph) -> (String, String) {
        let (mut n, mut e) = (Vec::new(), Vec::new());
        export_tables(g, &mut n, &mut e).unwrap();
        (String::from_utf8(n).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn three_nodes_round_trip() {
        let src = |c| RecordSource { case_id: "c".into(), chunk_id: c };
        let ents: Vec<EntityRecord> = ["A, B", "C\"D", "E"]
            .iter()
            .enumerate()
            .map(|(i, n)| EntityRecord {
                name: n.to_string(),
                entity_type: EntityType::Person,
                description: "x\ny".into(),
                source: src(i),
            })
            .collect();
        let rels = vec![RelationshipRecord {
            source_name: "A, B".into(),
            target_name: "E".into(),
            description: "knows".into(),
            strength: 3,
            source: src(0),
        }];
        let g = build_graph(&ents, &rels, "c", Mode::Corekg).0;
        let (n, e) = export(&g);
        assert_eq!(n.lines().next().unwrap(), NODE_HEADER.join(","));
        let mut r = csv::Reader::from_reader(n.as_bytes());
        assert_eq!(r.records().count(), 3);
        assert_eq!(import_tables("c", Mode::Corekg, n.as_bytes(), e.as_bytes()).unwrap(), g);
    }

    #[test]
    fn empty_graph_header_only() {
        let g = KnowledgeGraph::empty("c", Mode::Baseline);
        let (n, e) = export(&g);
        assert_eq!(n, "name,type,description,degree,chunks\n");
        assert_eq!(e.lines().count(), 1);
        assert_eq!(import_tables("c", Mode::Baseline, n.as_bytes(), e.as_bytes()).unwrap(), g);
    }
}
