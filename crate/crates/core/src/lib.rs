//! # unischema
//!
//! An engine that integrates attribute names from many database schemas into
//! one global schema. Attributes are clustered along two axes:
//!
//! - **literal similarity** — edit distance, accelerated by q-gram inverted
//!   indexes with count filtering;
//! - **semantic similarity** — bounded-length paths in an "is a" knowledge
//!   graph, accelerated by bucket-hashed neighbor tables for power-of-two hop
//!   counts.
//!
//! The engine runs in batch mode (integrate a whole corpus at once) and
//! incremental mode (insert one schema into an existing integration state).
//! After joining, a resolve pass repairs transitivity violations by splitting
//! over-merged clusters under a tolerance diameter, applies value-based
//! verification rules, and queues ambiguous pairs for manual review.
//!
//! Data-parallel inner loops (per-concept BFS, per-probe candidate
//! generation, per-cluster splitting) run on rayon when the default
//! `parallel` feature is enabled; disabling it yields a dependency-free
//! sequential build. Every entry point takes an explicit [`Exec`] strategy so
//! the two paths can be compared directly (see `benches/`).

pub mod cluster;
pub mod ed_join;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod gram_index;
pub mod kb;
pub mod normalize;
pub mod pipeline;
pub mod resolve;
pub mod semantic_join;
pub mod text;

pub use cluster::{ClusterId, ClusterRegistry, ClusterSet};
pub use error::{Error, Result};
pub use exec::Exec;
pub use gram_index::InvertedIndex;
pub use kb::{KnowledgeGraph, NeighborTable};
pub use pipeline::{IntegrationParams, IntegrationState, Schema};
