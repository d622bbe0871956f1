//! Allocation-only core of the case-document knowledge-graph pipeline.
//!
//! Everything here is pure computation over in-memory values: opinion
//! extraction and token chunking, type-wise sequential coreference chaining
//! over an abstract chat gateway, extraction prompts and the delimiter
//! record parser, exact-match graph assembly, and the duplication / noise
//! evaluation metrics. Disk, network and CLI concerns live in the `casekg`
//! companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod coref;
pub mod corpus;
pub mod digest;
pub mod entity;
pub mod eval;
pub mod extraction;
pub mod gateway;
pub mod graph;

pub use entity::{normalize_name, EntityType, Mode};
