//! Cross-lingual entity-centric coreference resolution.
//!
//! The pipeline: documents with gold mention spans are parsed ([`corpus`]),
//! mention-pair features are extracted ([`features`]) on top of multilingual
//! word vectors ([`embeddings`]), a small neural scorer ([`model`]) decides
//! whether two partially built entities corefer, and an incremental merging
//! decoder ([`resolver`]) produces clusterings that are evaluated with
//! MUC, B³ and CEAF-e ([`metrics`]).

pub mod cli;
pub mod corpus;
pub mod embeddings;
pub mod features;
pub mod metrics;
pub mod model;
pub mod resolver;
