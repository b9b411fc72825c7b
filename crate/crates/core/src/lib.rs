//! Hashtag recommendation over a heterogeneous user/hashtag/content/word/category
//! graph.
//!
//! The pipeline: [`graph::build_graph`] turns posts and a category taxonomy into a typed
//! graph; [`embed`] learns node vectors and user preferences; [`semantic`] encodes text
//! with a hierarchical bi-GRU; [`pipeline::train`] bundles everything into a
//! [`snapshot::ModelSnapshot`]; [`rank::SearchEngine`] answers ranked queries over it.

pub mod codec;
pub mod embed;
pub mod graph;
pub mod index;
pub mod ingest;
pub mod linalg;
pub mod pipeline;
pub mod rank;
pub mod semantic;
pub mod snapshot;
pub mod synthetic;
pub mod text;

pub use embed::{EmbedError, EmbeddingTable, TrainConfig};
pub use graph::{build_graph, EdgeKind, GraphError, HeteroGraph, Ingestion, NodeId, NodeKind};
pub use index::{build_index, HashtagRecord, IndexError, InvertedIndex, LookupMode};
pub use ingest::{CategoryRecord, Corpus, IngestError, PostRecord, Rejection};
pub use linalg::{Activation, Matrix};
pub use pipeline::{train, train_corpus, PipelineError, TrainReport};
pub use rank::{RankError, RankingOptions, RerankWeights, ScoredHashtag, SearchEngine, TrendReport, UserContext};
pub use semantic::{SemanticError, TextEncoder};
pub use snapshot::{ModelSnapshot, SnapshotError};

/// A vector or matrix had the wrong size.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("shape mismatch for {what}: expected {expected}, got {got}")]
pub struct ShapeError {
    pub what: &'static str,
    pub expected: usize,
    pub got: usize,
}

impl ShapeError {
    pub fn new(what: &'static str, expected: usize, got: usize) -> Self {
        Self { what, expected, got }
    }
}
