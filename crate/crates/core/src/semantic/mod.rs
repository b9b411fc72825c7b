//! Hierarchical bidirectional-GRU text encoder.

mod encoder;
mod gru;
mod train;
mod vocab;

pub use encoder::{BiGru, BiGruTrace, SentenceVector, TextEncoder};
pub use gru::{gru_step, GruCache, GruParams};
pub use train::{document_loss, document_loss_grad, train_encoder, EncoderExample, EncoderGrads, CLIP_NORM};
pub use vocab::{Vocab, PAD, UNK};

use thiserror::Error;

use crate::ShapeError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SemanticError {
    #[error("empty sentence")]
    EmptySentence,
    #[error("token id {0} is outside the vocabulary")]
    InvalidToken(u32),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error("encoder training diverged in epoch {epoch}")]
    Diverged { epoch: usize },
}
