//! Filesystem, network and CLI side of the case knowledge-graph pipeline.
//!
//! The pure algorithms live in `casekg_core`; this crate adds corpus
//! discovery, the HTTP and scripted chat backends with an audit log, run
//! configuration, the staged pipeline driver with per-case artifacts, the
//! GraphML and CSV formats, and evaluation reports.

pub mod config;
pub mod corpus_io;
pub mod formats;
pub mod gateway;
pub mod layout;
pub mod pipeline;
pub mod report;
pub mod templates;
