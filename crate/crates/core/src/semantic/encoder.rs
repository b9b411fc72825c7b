use rand::Rng;

use super::gru::{GruCache, GruParams};
use super::vocab::Vocab;
use super::SemanticError;
use crate::linalg::{axpy, Matrix};
use crate::text;
use crate::ShapeError;

/// Concatenated final forward and backward states, `2H` wide.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceVector(pub Vec<f64>);

impl SentenceVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Forward and backward GRUs over the same sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct BiGru {
    pub forward: GruParams,
    pub backward: GruParams,
}

/// Per-step caches of both directions. `backward[s]` processed position `T-1-s`.
#[derive(Debug, Clone)]
pub struct BiGruTrace {
    forward: Vec<GruCache>,
    backward: Vec<GruCache>,
    pub output: Vec<f64>,
}

impl BiGru {
    pub fn new(forward: GruParams, backward: GruParams) -> Result<Self, ShapeError> {
        if forward.input_dim() != backward.input_dim() {
            return Err(ShapeError::new(
                "backward GRU input",
                forward.input_dim(),
                backward.input_dim(),
            ));
        }
        if forward.hidden_dim() != backward.hidden_dim() {
            return Err(ShapeError::new(
                "backward GRU hidden",
                forward.hidden_dim(),
                backward.hidden_dim(),
            ));
        }
        Ok(Self { forward, backward })
    }

    pub fn uniform<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, bound: f64, rng: &mut R) -> Self {
        Self {
            forward: GruParams::uniform(input_dim, hidden_dim, bound, rng),
            backward: GruParams::uniform(input_dim, hidden_dim, bound, rng),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            forward: GruParams::zeros(input_dim, hidden_dim),
            backward: GruParams::zeros(input_dim, hidden_dim),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.forward.input_dim()
    }

    pub fn hidden_dim(&self) -> usize {
        self.forward.hidden_dim()
    }

    pub fn output_dim(&self) -> usize {
        2 * self.hidden_dim()
    }

    /// Same parameters with the directions exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            forward: self.backward.clone(),
            backward: self.forward.clone(),
        }
    }

    pub fn encode(&self, inputs: &[&[f64]]) -> Result<Vec<f64>, SemanticError> {
        Ok(self.trace(inputs)?.output)
    }

    pub fn trace(&self, inputs: &[&[f64]]) -> Result<BiGruTrace, SemanticError> {
        if inputs.is_empty() {
            return Err(SemanticError::EmptySentence);
        }
        let h0 = vec![0.0; self.hidden_dim()];
        let run = |p: &GruParams, order: &mut dyn Iterator<Item = &&[f64]>| -> Result<Vec<GruCache>, ShapeError> {
            let mut caches: Vec<GruCache> = Vec::with_capacity(inputs.len());
            for x in order {
                let h = caches.last().map_or(&h0, |c| &c.h);
                let c = p.step_cached(x, h)?;
                caches.push(c);
            }
            Ok(caches)
        };
        let forward = run(&self.forward, &mut inputs.iter())?;
        let backward = run(&self.backward, &mut inputs.iter().rev())?;
        let mut output = forward.last().expect("non-empty").h.clone();
        output.extend_from_slice(&backward.last().expect("non-empty").h);
        Ok(BiGruTrace {
            forward,
            backward,
            output,
        })
    }

    /// Back-propagation through time from `dout` (gradient w.r.t. the 2H output).
    /// Accumulates into `grads`; returns per-position input gradients when `need_dx`.
    pub fn backward(
        &self,
        trace: &BiGruTrace,
        dout: &[f64],
        grads: &mut BiGru,
        need_dx: bool,
    ) -> Option<Vec<Vec<f64>>> {
        let h = self.hidden_dim();
        let len = trace.forward.len();
        let mut dxs = need_dx.then(|| vec![vec![0.0; self.input_dim()]; len]);
        let mut dh = dout[..h].to_vec();
        for t in (0..len).rev() {
            let (dx, dprev) = self
                .forward
                .backward(&trace.forward[t], &dh, &mut grads.forward, need_dx);
            if let (Some(dxs), Some(dx)) = (dxs.as_mut(), dx) {
                axpy(1.0, &dx, &mut dxs[t]);
            }
            dh = dprev;
        }
        let mut dh = dout[h..].to_vec();
        for s in (0..len).rev() {
            let (dx, dprev) = self
                .backward
                .backward(&trace.backward[s], &dh, &mut grads.backward, need_dx);
            if let (Some(dxs), Some(dx)) = (dxs.as_mut(), dx) {
                axpy(1.0, &dx, &mut dxs[len - 1 - s]);
            }
            dh = dprev;
        }
        dxs
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &BiGru) {
        self.forward.add_scaled(alpha, &other.forward);
        self.backward.add_scaled(alpha, &other.backward);
    }

    pub fn squared_norm(&self) -> f64 {
        self.forward.squared_norm() + self.backward.squared_norm()
    }

    pub fn scale(&mut self, alpha: f64) {
        self.forward.scale(alpha);
        self.backward.scale(alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.forward.is_finite() && self.backward.is_finite()
    }
}

/// Hierarchical encoder: a word-level bi-GRU turns each sentence into a
/// [`SentenceVector`], a sentence-level bi-GRU turns the sentence sequence into a
/// document vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoder {
    pub vocab: Vocab,
    /// One row per vocabulary id; the reserved rows are zero.
    pub embeddings: Matrix,
    pub word: BiGru,
    pub sentence: BiGru,
}

impl TextEncoder {
    pub fn new(vocab: Vocab, embeddings: Matrix, word: BiGru, sentence: BiGru) -> Result<Self, ShapeError> {
        if embeddings.rows() != vocab.len() {
            return Err(ShapeError::new("token embedding rows", vocab.len(), embeddings.rows()));
        }
        if embeddings.cols() != word.input_dim() {
            return Err(ShapeError::new(
                "token embedding width",
                word.input_dim(),
                embeddings.cols(),
            ));
        }
        if sentence.input_dim() != word.output_dim() {
            return Err(ShapeError::new(
                "sentence-level input",
                word.output_dim(),
                sentence.input_dim(),
            ));
        }
        Ok(Self {
            vocab,
            embeddings,
            word,
            sentence,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.sentence.output_dim()
    }

    fn token_rows(&self, tokens: &[u32]) -> Result<Vec<&[f64]>, SemanticError> {
        tokens
            .iter()
            .map(|&t| {
                if (t as usize) < self.embeddings.rows() {
                    Ok(self.embeddings.row(t as usize))
                } else {
                    Err(SemanticError::InvalidToken(t))
                }
            })
            .collect()
    }

    /// Word-level encoding of one tokenized sentence.
    pub fn encode_sentence(&self, tokens: &[u32]) -> Result<SentenceVector, SemanticError> {
        let rows = self.token_rows(tokens)?;
        Ok(SentenceVector(self.word.encode(&rows)?))
    }

    /// Sentence-level encoding of a sequence of sentence vectors.
    pub fn encode_document(&self, sentences: &[SentenceVector]) -> Result<Vec<f64>, SemanticError> {
        let rows: Vec<&[f64]> = sentences.iter().map(SentenceVector::as_slice).collect();
        self.sentence.encode(&rows)
    }

    /// Both levels over a document of tokenized sentences. Empty sentences are skipped.
    pub fn encode_ids(&self, sentences: &[Vec<u32>]) -> Result<Vec<f64>, SemanticError> {
        let vecs = sentences
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| self.encode_sentence(s))
            .collect::<Result<Vec<_>, _>>()?;
        self.encode_document(&vecs)
    }

    /// Single-sentence document from already tokenized words (hashtags, category names,
    /// keywords). Zero vector when there are no tokens.
    pub fn encode_phrase<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        if tokens.is_empty() {
            return vec![0.0; self.output_dim()];
        }
        let ids = self.vocab.encode(tokens);
        self.encode_ids(&[ids]).expect("vocabulary ids are valid")
    }

    /// Splits free text into sentences and encodes it. Zero vector when empty.
    pub fn encode_text(&self, text_in: &str) -> Vec<f64> {
        let sentences: Vec<Vec<u32>> = text::sentences(text_in).iter().map(|s| self.vocab.encode(s)).collect();
        if sentences.is_empty() {
            return vec![0.0; self.output_dim()];
        }
        self.encode_ids(&sentences).expect("vocabulary ids are valid")
    }
}
