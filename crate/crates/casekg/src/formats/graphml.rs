//! Deterministic GraphML writer and a matching reader.
//!
//! Nodes are written in (type, name) order and edges in canonical edge order,
//! so equal graphs serialize to equal bytes. Provenance is stored as a
//! `;`-separated list of chunk ids; the case id is a graph-level attribute.

use std::fmt::Write as _;

use casekg_core::extraction::RecordSource;
use casekg_core::graph::{Edge, GraphError, KnowledgeGraph, Node, NodeKey};
use casekg_core::{EntityType, Mode};

#[derive(Debug, thiserror::Error)]
pub enum GraphmlError {
    #[error("invalid XML: {0}")]
    Xml(#[from] roxmltree::Error),
    #[error("GraphML structure: {0}")]
    Structure(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

const KEYS: [(&str, &str, &str, &str); 10] = [
    ("d0", "node", "name", "string"),
    ("d1", "node", "type", "string"),
    ("d2", "node", "description", "string"),
    ("d3", "node", "degree", "int"),
    ("d4", "node", "provenance", "string"),
    ("d5", "edge", "description", "string"),
    ("d6", "edge", "strength", "int"),
    ("d7", "edge", "provenance", "string"),
    ("d8", "graph", "case_id", "string"),
    ("d9", "graph", "mode", "string"),
];

/// Escapes text for element content and attribute values. Characters that
/// XML 1.0 cannot represent are replaced with U+FFFD.
pub fn escape_xml(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            '\r' => out.push_str("&#13;"),
            '\t' | '\n' => out.push(c),
            c if (c as u32) < 0x20 || c == '\u{FFFE}' || c == '\u{FFFF}' => out.push('\u{FFFD}'),
            c => out.push(c),
        }
    }
    out
}

fn chunk_list(sources: &[RecordSource]) -> String {
    sources.iter().map(|s| s.chunk_id.to_string()).collect::<Vec<_>>().join(";")
}

fn data(out: &mut String, indent: &str, key: &str, value: &str) {
    let _ = writeln!(out, "{indent}<data key=\"{key}\">{}</data>", escape_xml(value));
}

pub fn serialize_graphml(graph: &KnowledgeGraph) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n");
    for (id, target, name, ty) in KEYS {
        let _ = writeln!(out, "  <key id=\"{id}\" for=\"{target}\" attr.name=\"{name}\" attr.type=\"{ty}\"/>");
    }
    out.push_str("  <graph id=\"G\" edgedefault=\"directed\">\n");
    data(&mut out, "    ", "d8", &graph.case_id);
    data(&mut out, "    ", "d9", graph.mode.as_str());
    let mut ids = std::collections::BTreeMap::new();
    for (i, (key, node)) in graph.nodes.iter().enumerate() {
        ids.insert(key, i);
        let _ = writeln!(out, "    <node id=\"n{i}\">");
        data(&mut out, "      ", "d0", &node.name);
        data(&mut out, "      ", "d1", node.entity_type.as_str());
        data(&mut out, "      ", "d2", &node.description);
        data(&mut out, "      ", "d3", &node.degree.to_string());
        data(&mut out, "      ", "d4", &chunk_list(&node.provenance));
        out.push_str("    </node>\n");
    }
    for (i, e) in graph.edges.iter().enumerate() {
        let _ = writeln!(out, "    <edge id=\"e{i}\" source=\"n{}\" target=\"n{}\">", ids[&e.source], ids[&e.target]);
        data(&mut out, "      ", "d5", &e.description);
        data(&mut out, "      ", "d6", &e.strength.to_string());
        data(&mut out, "      ", "d7", &e.provenance.chunk_id.to_string());
        out.push_str("    </edge>\n");
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}

fn structure(msg: impl Into<String>) -> GraphmlError {
    GraphmlError::Structure(msg.into())
}

fn parse_chunks(case_id: &str, s: &str) -> Result<Vec<RecordSource>, GraphmlError> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(';')
        .map(|p| {
            p.parse()
                .map(|chunk_id| RecordSource { case_id: case_id.to_string(), chunk_id })
                .map_err(|_| structure(format!("bad provenance entry {p:?}")))
        })
        .collect()
}

/// Reads a document written by [`serialize_graphml`]. Data keys are resolved
/// through the `<key>` declarations, so key ids may differ.
pub fn parse_graphml(text: &str) -> Result<KnowledgeGraph, GraphmlError> {
    let doc = roxmltree::Document::parse(text)?;
    let root = doc.root_element();
    if root.tag_name().name() != "graphml" {
        return Err(structure("root element is not graphml"));
    }
    let mut key_names = std::collections::HashMap::new();
    for k in root.children().filter(|n| n.has_tag_name("key")) {
        let id = k.attribute("id").ok_or_else(|| structure("key without id"))?;
        let for_ = k.attribute("for").unwrap_or("all");
        let name = k.attribute("attr.name").ok_or_else(|| structure("key without attr.name"))?;
        key_names.insert(id.to_string(), (for_.to_string(), name.to_string()));
    }
    let graph_el =
        root.children().find(|n| n.has_tag_name("graph")).ok_or_else(|| structure("missing graph element"))?;
    let fields = |el: roxmltree::Node| -> std::collections::HashMap<String, String> {
        el.children()
            .filter(|n| n.has_tag_name("data"))
            .filter_map(|d| {
                let (_, name) = key_names.get(d.attribute("key")?)?;
                Some((name.clone(), d.text().unwrap_or("").to_string()))
            })
            .collect()
    };
    let gf = fields(graph_el);
    let case_id = gf.get("case_id").cloned().ok_or_else(|| structure("missing graph case_id"))?;
    let mode: Mode = gf
        .get("mode")
        .ok_or_else(|| structure("missing graph mode"))?
        .parse()
        .map_err(|_| structure("bad graph mode"))?;

    let mut id_to_key = std::collections::HashMap::new();
    let mut nodes = Vec::new();
    let mut recorded_degrees = Vec::new();
    for el in graph_el.children().filter(|n| n.has_tag_name("node")) {
        let id = el.attribute("id").ok_or_else(|| structure("node without id"))?;
        let f = fields(el);
        let get = |k: &str| f.get(k).cloned().ok_or_else(|| structure(format!("node {id} missing {k}")));
        let entity_type: EntityType = get("type")?.parse().map_err(|_| structure(format!("node {id} has bad type")))?;
        let node = Node {
            name: get("name")?,
            entity_type,
            description: f.get("description").cloned().unwrap_or_default(),
            degree: 0,
            provenance: parse_chunks(&case_id, f.get("provenance").map(String::as_str).unwrap_or(""))?,
        };
        if let Some(d) = f.get("degree") {
            let d: usize = d.parse().map_err(|_| structure(format!("node {id} has bad degree")))?;
            recorded_degrees.push((node.key(), d));
        }
        id_to_key.insert(id.to_string(), node.key());
        nodes.push(node);
    }
    let mut edges = Vec::new();
    for el in graph_el.children().filter(|n| n.has_tag_name("edge")) {
        let endpoint = |attr: &str| -> Result<NodeKey, GraphmlError> {
            let id = el.attribute(attr).ok_or_else(|| structure(format!("edge without {attr}")))?;
            id_to_key.get(id).cloned().ok_or_else(|| structure(format!("edge references unknown node {id}")))
        };
        let f = fields(el);
        let strength: u8 = f
            .get("strength")
            .ok_or_else(|| structure("edge missing strength"))?
            .parse()
            .map_err(|_| structure("bad edge strength"))?;
        let chunk_id = f.get("provenance").map(String::as_str).unwrap_or("0");
        edges.push(Edge {
            source: endpoint("source")?,
            target: endpoint("target")?,
            description: f.get("description").cloned().unwrap_or_default(),
            strength,
            provenance: RecordSource {
                case_id: case_id.clone(),
                chunk_id: chunk_id.parse().map_err(|_| structure("bad edge provenance"))?,
            },
        });
    }
    let graph = KnowledgeGraph::from_parts(case_id, mode, nodes, edges)?;
    for (key, recorded) in recorded_degrees {
        let actual = graph.nodes[&key].degree;
        if actual != recorded {
            return Err(GraphError::DegreeMismatch { key, recorded, actual }.into());
        }
    }
    Ok(graph)
}
