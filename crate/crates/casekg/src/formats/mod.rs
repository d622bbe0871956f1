//! On-disk formats: GraphML, CSV tables and expert annotation files.

pub mod annotations;
pub mod graphml;
pub mod tables;

pub use annotations::{load_lexicon, load_noise, load_overrides, AnnotationError, NoiseFile};
pub use graphml::{parse_graphml, serialize_graphml, GraphmlError};
pub use tables::{export_tables, import_tables, TableError};
