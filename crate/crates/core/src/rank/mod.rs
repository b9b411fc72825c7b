//! Fusion of user preferences, keyword similarity and statistical re-ranking.

mod engine;
mod fusion;
mod score;
mod trending;

pub use engine::{Keyword, SearchEngine, TrendReport, UserContext};
pub use fusion::{FusionCache, FusionLayer};
pub use score::{min_max, rerank, result_order, similarity, RankingOptions, RerankWeights, ScoredHashtag};
pub use trending::{histogram, midpoint, trending, HISTOGRAM_BUCKETS};

use crate::ShapeError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RankError {
    #[error("query has no usable tokens")]
    EmptyQuery,
    #[error("unknown category {0:?}")]
    UnknownCategory(String),
    #[error("unknown hashtag {0:?}")]
    UnknownHashtag(String),
    #[error("invalid window: start {start} is not before end {end}")]
    InvalidWindow { start: i64, end: i64 },
    #[error("invalid ranking options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}
