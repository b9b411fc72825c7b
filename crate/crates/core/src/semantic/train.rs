use log::debug;

use super::encoder::{BiGru, TextEncoder};
use super::SemanticError;
use crate::linalg::dot;

/// Global gradient-norm clip applied per example.
pub const CLIP_NORM: f64 = 5.0;

/// A tokenized document and the graph vector its encoding should match.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderExample {
    pub sentences: Vec<Vec<u32>>,
    pub target: Vec<f64>,
}

/// Gradients for both recurrent levels.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub word: BiGru,
    pub sentence: BiGru,
}

impl EncoderGrads {
    pub fn zeros_like(enc: &TextEncoder) -> Self {
        Self {
            word: BiGru::zeros(enc.word.input_dim(), enc.word.hidden_dim()),
            sentence: BiGru::zeros(enc.sentence.input_dim(), enc.sentence.hidden_dim()),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.word.squared_norm() + self.sentence.squared_norm()).sqrt()
    }
}

/// `0.5 ‖encode(doc) − target‖²`.
pub fn document_loss(enc: &TextEncoder, ex: &EncoderExample) -> Result<f64, SemanticError> {
    let out = enc.encode_ids(&ex.sentences)?;
    Ok(half_sq_dist(&out, &ex.target))
}

fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

/// Loss and full BPTT gradient through both levels. Token embeddings stay frozen.
pub fn document_loss_grad(enc: &TextEncoder, ex: &EncoderExample) -> Result<(f64, EncoderGrads), SemanticError> {
    if ex.target.len() != enc.output_dim() {
        return Err(crate::ShapeError::new("encoder target", enc.output_dim(), ex.target.len()).into());
    }
    let mut word_traces = Vec::new();
    for s in ex.sentences.iter().filter(|s| !s.is_empty()) {
        let rows = s
            .iter()
            .map(|&t| {
                if (t as usize) < enc.embeddings.rows() {
                    Ok(enc.embeddings.row(t as usize))
                } else {
                    Err(SemanticError::InvalidToken(t))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        word_traces.push(enc.word.trace(&rows)?);
    }
    let sent_inputs: Vec<&[f64]> = word_traces.iter().map(|t| t.output.as_slice()).collect();
    let doc = enc.sentence.trace(&sent_inputs)?;
    let diff: Vec<f64> = doc.output.iter().zip(&ex.target).map(|(o, t)| o - t).collect();
    let loss = 0.5 * dot(&diff, &diff);

    let mut grads = EncoderGrads::zeros_like(enc);
    let dsent = enc
        .sentence
        .backward(&doc, &diff, &mut grads.sentence, true)
        .expect("requested input gradients");
    for (trace, d) in word_traces.iter().zip(&dsent) {
        enc.word.backward(trace, d, &mut grads.word, false);
    }
    Ok((loss, grads))
}

/// Plain SGD over the examples in order, one step per example, with global norm
/// clipping at [`CLIP_NORM`]. Returns the mean loss of each epoch.
pub fn train_encoder(
    enc: &mut TextEncoder,
    examples: &[EncoderExample],
    epochs: usize,
    learning_rate: f64,
) -> Result<Vec<f64>, SemanticError> {
    let mut epoch_losses = Vec::with_capacity(epochs);
    if examples.is_empty() {
        return Ok(epoch_losses);
    }
    for epoch in 0..epochs {
        let mut total = 0.0;
        for ex in examples {
            let (loss, mut g) = document_loss_grad(enc, ex)?;
            let n = g.norm();
            if !n.is_finite() || !loss.is_finite() {
                return Err(SemanticError::Diverged { epoch });
            }
            if n > CLIP_NORM {
                g.word.scale(CLIP_NORM / n);
                g.sentence.scale(CLIP_NORM / n);
            }
            enc.word.add_scaled(-learning_rate, &g.word);
            enc.sentence.add_scaled(-learning_rate, &g.sentence);
            total += loss;
        }
        if !enc.word.is_finite() || !enc.sentence.is_finite() {
            return Err(SemanticError::Diverged { epoch });
        }
        let mean = total / examples.len() as f64;
        debug!("encoder epoch {epoch}: mean loss {mean:.6}");
        epoch_losses.push(mean);
    }
    Ok(epoch_losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::gradcheck::{check_differentiable, Differentiable};
    use crate::linalg::Matrix;
    use crate::semantic::Vocab;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (TextEncoder, EncoderExample) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vocab = Vocab::from_words(["aa", "bb", "cc", "dd"]);
        let emb = Matrix::uniform(vocab.len(), 4, 0.8, &mut rng);
        let enc = TextEncoder::new(
            vocab,
            emb,
            BiGru::uniform(4, 2, 0.5, &mut rng),
            BiGru::uniform(4, 2, 0.5, &mut rng),
        )
        .unwrap();
        let target = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
        let ex = EncoderExample {
            sentences: vec![vec![2, 3, 4], vec![5, 1]],
            target,
        };
        (enc, ex)
    }

    struct EncoderLoss(TextEncoder, EncoderExample);

    impl EncoderLoss {
        fn with(&self, flat: &[f64]) -> TextEncoder {
            let mut e = self.0.clone();
            let mut off = 0;
            for p in [
                &mut e.word.forward,
                &mut e.word.backward,
                &mut e.sentence.forward,
                &mut e.sentence.backward,
            ] {
                let n = p.param_count();
                p.load_flat(&flat[off..off + n]);
                off += n;
            }
            e
        }
    }

    impl Differentiable for EncoderLoss {
        fn params(&self) -> Vec<f64> {
            let e = &self.0;
            [
                &e.word.forward,
                &e.word.backward,
                &e.sentence.forward,
                &e.sentence.backward,
            ]
            .iter()
            .flat_map(|p| p.flatten())
            .collect()
        }

        fn loss(&self, params: &[f64]) -> f64 {
            document_loss(&self.with(params), &self.1).unwrap()
        }

        fn gradient(&self, params: &[f64]) -> Vec<f64> {
            let (_, g) = document_loss_grad(&self.with(params), &self.1).unwrap();
            [
                &g.word.forward,
                &g.word.backward,
                &g.sentence.forward,
                &g.sentence.backward,
            ]
            .iter()
            .flat_map(|p| p.flatten())
            .collect()
        }
    }

    #[test]
    fn bptt_matches_finite_differences() {
        for seed in 0..3 {
            let (enc, ex) = setup(seed);
            let report = check_differentiable(&EncoderLoss(enc, ex), 1e-5).unwrap();
            assert!(report.max_relative_error <= 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn training_reduces_loss() {
        let (mut enc, ex) = setup(11);
        let other = EncoderExample {
            sentences: vec![vec![4, 5]],
            target: vec![0.3, -0.2, 0.1, 0.4],
        };
        let before = document_loss(&enc, &ex).unwrap() + document_loss(&enc, &other).unwrap();
        let losses = train_encoder(&mut enc, &[ex.clone(), other.clone()], 40, 0.1).unwrap();
        let after = document_loss(&enc, &ex).unwrap() + document_loss(&enc, &other).unwrap();
        assert_eq!(losses.len(), 40);
        assert!(after < 0.5 * before, "{before} -> {after}");
    }

    #[test]
    fn target_shape_and_empty_documents() {
        let (enc, mut ex) = setup(1);
        ex.target.pop();
        assert!(matches!(document_loss_grad(&enc, &ex), Err(SemanticError::Shape(_))));
        let empty = EncoderExample {
            sentences: vec![vec![]],
            target: vec![0.0; 4],
        };
        assert_eq!(
            document_loss_grad(&enc, &empty).unwrap_err(),
            SemanticError::EmptySentence
        );
    }
}
