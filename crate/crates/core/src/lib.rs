//! Two-stage iterative event coreference resolution.
//!
//! The pipeline: cluster documents by topic ([`docluster`]), score event-mention
//! pairs with neural classifiers ([`neural`], [`scorers`]), then iteratively merge
//! event clusters within and across documents while propagating arguments
//! ([`engine`]). Results are evaluated with standard coreference metrics
//! ([`metrics`]). [`synth`] builds deterministic synthetic corpora for tests and
//! experiments, and [`experiment`] wires everything into end-to-end runs.

pub mod corpus;
pub mod docluster;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod neural;
pub mod scorers;
pub mod synth;

pub use corpus::{ArgSets, Corpus, Document, EmbeddingTable, EventMention, PosTagset, Role};
pub use error::{Error, Result};
