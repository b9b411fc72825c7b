//! Node embeddings: skip-gram over walks, neighbor aggregation into user
//! preferences, and the finite-difference harness that checks every gradient.

mod aggregate;
pub mod gradcheck;
mod preference;
mod skipgram;

pub use aggregate::{
    aggregate, aggregate_content_preference, aggregate_hashtag_preference, propagate, AggregateCache,
    AggregationWeights,
};
pub use gradcheck::{grad_check, GradCase, GradOp, GradReport};
pub use preference::{
    preference_inputs, train_preference, user_preferences, PreferenceModel, PreferenceReport, UserPreference,
};
pub use skipgram::{sgns_grad, sgns_loss, skipgram_loss, train_tag2vec, SgnsGrad, Tag2VecReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{GraphError, HeteroGraph, NodeId, NodeKind};
use crate::linalg::{Activation, Matrix};
use crate::ShapeError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("empty neighborhood")]
    EmptyNeighborhood,
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("training diverged at step {step}: non-finite {what}")]
    Diverged { step: u64, what: &'static str },
    #[error("non-finite gradient at coordinate {coordinate}")]
    NonFiniteGradient { coordinate: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("graph is empty")]
    EmptyGraph,
}

/// Negative sampling distribution over nodes of the context's kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NegativeDistribution {
    #[default]
    Uniform,
    /// Proportional to degree^0.75.
    Unigram075,
}

/// Training hyper-parameters for every learned component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dim: usize,
    pub walks_per_node: usize,
    pub walk_length: usize,
    /// Skip-gram context radius.
    pub window: usize,
    pub negatives: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub negative_distribution: NegativeDistribution,
    /// Depth of neighbor aggregation: 1 or 2.
    pub gcn_layers: usize,
    pub activation: Activation,
    pub preference_epochs: usize,
    pub preference_learning_rate: f64,
    pub preference_negatives: usize,
    /// Let preference training also move the hashtag and content vectors.
    pub unfreeze_embeddings: bool,
    pub semantic_epochs: usize,
    pub semantic_learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            dim: 32,
            walks_per_node: 5,
            walk_length: 20,
            window: 4,
            negatives: 5,
            learning_rate: 0.025,
            epochs: 5,
            seed: 42,
            negative_distribution: NegativeDistribution::Uniform,
            gcn_layers: 1,
            activation: Activation::Tanh,
            preference_epochs: 5,
            preference_learning_rate: 0.05,
            preference_negatives: 3,
            unfreeze_embeddings: false,
            semantic_epochs: 5,
            semantic_learning_rate: 0.05,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), EmbedError> {
        let positive = [
            ("dim", self.dim),
            ("walks_per_node", self.walks_per_node),
            ("walk_length", self.walk_length),
            ("window", self.window),
            ("negatives", self.negatives),
            ("epochs", self.epochs),
            ("preference_negatives", self.preference_negatives),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(EmbedError::Config(format!("{name} must be positive")));
            }
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("preference_learning_rate", self.preference_learning_rate),
            ("semantic_learning_rate", self.semantic_learning_rate),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EmbedError::Config(format!("{name} must be a positive number")));
            }
        }
        if self.window > self.walk_length {
            return Err(EmbedError::Config("window must not exceed walk_length".into()));
        }
        if !self.dim.is_multiple_of(2) {
            return Err(EmbedError::Config(
                "dim must be even (text encoder hidden size is dim/2)".into(),
            ));
        }
        if !(1..=2).contains(&self.gcn_layers) {
            return Err(EmbedError::Config("gcn_layers must be 1 or 2".into()));
        }
        if self.unfreeze_embeddings && self.gcn_layers != 1 {
            return Err(EmbedError::Config("unfreeze_embeddings requires gcn_layers = 1".into()));
        }
        Ok(())
    }

    /// Bound of the uniform initializer, `0.5 / dim`.
    pub fn init_bound(&self) -> f64 {
        0.5 / self.dim as f64
    }
}

/// One input vector and one context vector per graph node, rows in global node order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    offsets: [usize; 5],
    counts: [usize; 5],
    vectors: Matrix,
    context: Matrix,
}

impl EmbeddingTable {
    /// Uniform `[-0.5/dim, 0.5/dim]` initialization from `seed`.
    pub fn init(graph: &HeteroGraph, dim: usize, seed: u64) -> Self {
        let counts = graph.node_counts();
        let total = graph.total_nodes();
        let bound = 0.5 / dim as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vectors = Matrix::uniform(total, dim, bound, &mut rng);
        let context = Matrix::uniform(total, dim, bound, &mut rng);
        Self::from_parts(counts, vectors, context)
    }

    pub fn from_parts(counts: [usize; 5], vectors: Matrix, context: Matrix) -> Self {
        let mut offsets = [0; 5];
        for k in 1..5 {
            offsets[k] = offsets[k - 1] + counts[k - 1];
        }
        Self {
            dim: vectors.cols(),
            offsets,
            counts,
            vectors,
            context,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn node_counts(&self) -> [usize; 5] {
        self.counts
    }

    pub fn contains(&self, n: NodeId) -> bool {
        (n.ordinal as usize) < self.counts[n.kind.index()]
    }

    pub fn row_index(&self, n: NodeId) -> Result<usize, GraphError> {
        if !self.contains(n) {
            return Err(GraphError::UnknownNode(n));
        }
        Ok(self.offsets[n.kind.index()] + n.ordinal as usize)
    }

    pub fn vector(&self, n: NodeId) -> Result<&[f64], GraphError> {
        Ok(self.vectors.row(self.row_index(n)?))
    }

    pub fn context_vector(&self, n: NodeId) -> Result<&[f64], GraphError> {
        Ok(self.context.row(self.row_index(n)?))
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn vectors_mut(&mut self) -> &mut Matrix {
        &mut self.vectors
    }

    pub fn context_vectors(&self) -> &Matrix {
        &self.context
    }

    pub fn kind_rows(&self, kind: NodeKind) -> std::ops::Range<usize> {
        let start = self.offsets[kind.index()];
        start..start + self.counts[kind.index()]
    }

    pub fn is_finite(&self) -> bool {
        self.vectors.is_finite() && self.context.is_finite()
    }
}
