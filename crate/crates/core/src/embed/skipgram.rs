//! Skip-gram with negative sampling over typed random walks.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbedError, EmbeddingTable, NegativeDistribution, TrainConfig};
use crate::graph::{splitmix64, HeteroGraph, NodeId, NodeKind};
use crate::linalg::{axpy, dot, neg_log_sigmoid, sigmoid};

/// `-ln σ(c·o) - Σ ln σ(-c·n)` for center `c`, context `o` and negatives `n`.
pub fn sgns_loss(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = neg_log_sigmoid(dot(center, context));
    for n in negatives {
        loss += neg_log_sigmoid(-dot(center, n));
    }
    loss
}

/// Analytic gradient of [`sgns_loss`].
#[derive(Debug, Clone, PartialEq)]
pub struct SgnsGrad {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn sgns_grad(center: &[f64], context: &[f64], negatives: &[&[f64]]) -> (f64, SgnsGrad) {
    let loss = sgns_loss(center, context, negatives);
    let g_pos = sigmoid(dot(center, context)) - 1.0;
    let mut d_center: Vec<f64> = context.iter().map(|x| g_pos * x).collect();
    let d_context: Vec<f64> = center.iter().map(|x| g_pos * x).collect();
    let mut d_neg = Vec::with_capacity(negatives.len());
    for n in negatives {
        let g = sigmoid(dot(center, n));
        axpy(g, n, &mut d_center);
        d_neg.push(center.iter().map(|x| g * x).collect());
    }
    (
        loss,
        SgnsGrad {
            center: d_center,
            context: d_context,
            negatives: d_neg,
        },
    )
}

/// Skip-gram loss for one `(center, context)` pair, reading center vectors for
/// `center` and context vectors for `context` and `negatives`.
pub fn skipgram_loss(
    center: NodeId,
    context: NodeId,
    negatives: &[NodeId],
    table: &EmbeddingTable,
) -> Result<f64, EmbedError> {
    let c = table.vector(center)?;
    let o = table.context_vector(context)?;
    let negs = negatives
        .iter()
        .map(|&n| table.context_vector(n))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sgns_loss(c, o, &negs))
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tag2VecReport {
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub pairs: u64,
}

enum KindSampler {
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
    Empty,
}

impl KindSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> Option<u32> {
        match self {
            KindSampler::Uniform(n) => Some(rng.random_range(0..*n) as u32),
            KindSampler::Weighted(w) => Some(w.sample(rng) as u32),
            KindSampler::Empty => None,
        }
    }
}

fn samplers(graph: &HeteroGraph, dist: NegativeDistribution) -> [KindSampler; 5] {
    std::array::from_fn(|k| {
        let kind = NodeKind::ALL[k];
        let n = graph.node_count(kind);
        if n == 0 {
            return KindSampler::Empty;
        }
        match dist {
            NegativeDistribution::Uniform => KindSampler::Uniform(n),
            NegativeDistribution::Unigram075 => {
                let weights: Vec<f64> = (0..n as u32)
                    .map(|o| (graph.degree(NodeId::new(kind, o)).unwrap_or(0) as f64).powf(0.75))
                    .collect();
                WeightedIndex::new(&weights).map_or(KindSampler::Uniform(n), KindSampler::Weighted)
            }
        }
    })
}

pub(crate) fn walk_seed(seed: u64, epoch: usize, walk: usize) -> u64 {
    splitmix64(seed ^ splitmix64(((epoch as u64) << 32) | walk as u64))
}

/// Trains center and context vectors with plain SGD.
///
/// Every epoch samples `walks_per_node` walks from each non-isolated node, and every
/// pair within `window` positions is one update with `negatives` samples drawn from
/// the context node's kind. Deterministic for a given graph and config.
pub fn train_tag2vec(graph: &HeteroGraph, cfg: &TrainConfig) -> Result<(EmbeddingTable, Tag2VecReport), EmbedError> {
    cfg.validate()?;
    if graph.is_empty() {
        return Err(EmbedError::EmptyGraph);
    }
    let mut table = EmbeddingTable::init(graph, cfg.dim, cfg.seed);
    let samplers = samplers(graph, cfg.negative_distribution);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x5eed_6e67));
    let dim = cfg.dim;
    let lr = cfg.learning_rate;
    let mut report = Tag2VecReport::default();
    let mut step: u64 = 0;
    let mut d_center = vec![0.0; dim];
    let mut negatives: Vec<usize> = Vec::with_capacity(cfg.negatives);

    for epoch in 0..cfg.epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_pairs = 0u64;
        for w in 0..cfg.walks_per_node {
            let seed = walk_seed(cfg.seed, epoch, w);
            for start in graph.nodes() {
                if graph.degree(start)? == 0 {
                    continue;
                }
                let walk = graph.random_walk(start, cfg.walk_length, seed)?;
                let nodes = &walk.nodes;
                for (i, &center) in nodes.iter().enumerate() {
                    let lo = i.saturating_sub(cfg.window);
                    let hi = (i + cfg.window).min(nodes.len() - 1);
                    let ci = table.row_index(center)?;
                    for (j, &context) in nodes.iter().enumerate().take(hi + 1).skip(lo) {
                        if j == i {
                            continue;
                        }
                        negatives.clear();
                        for _ in 0..cfg.negatives {
                            if let Some(o) = samplers[context.kind.index()].sample(&mut rng) {
                                negatives.push(table.row_index(NodeId::new(context.kind, o))?);
                            }
                        }
                        let oi = table.row_index(context)?;
                        let loss = sgd_pair(&mut table, ci, oi, &negatives, lr, &mut d_center);
                        if !loss.is_finite() || !table.vectors.row(ci).iter().all(|v| v.is_finite()) {
                            return Err(EmbedError::Diverged {
                                step,
                                what: "embedding",
                            });
                        }
                        epoch_loss += loss;
                        epoch_pairs += 1;
                        step += 1;
                    }
                }
            }
        }
        if !table.is_finite() {
            return Err(EmbedError::Diverged {
                step,
                what: "embedding table",
            });
        }
        let mean = if epoch_pairs == 0 {
            0.0
        } else {
            epoch_loss / epoch_pairs as f64
        };
        log::debug!("tag2vec epoch {epoch}: mean loss {mean:.6} over {epoch_pairs} pairs");
        if epoch > 0 && epoch < 3 {
            let prev = report.epoch_losses[epoch - 1];
            if mean > prev {
                log::warn!("tag2vec epoch {epoch}: mean loss rose from {prev:.6} to {mean:.6}");
            }
        }
        report.epoch_losses.push(mean);
        report.pairs += epoch_pairs;
    }
    Ok((table, report))
}

/// One SGD update for a pair. Returns the loss before the update.
fn sgd_pair(
    table: &mut EmbeddingTable,
    center: usize,
    context: usize,
    negatives: &[usize],
    lr: f64,
    d_center: &mut [f64],
) -> f64 {
    d_center.fill(0.0);
    let mut loss = 0.0;
    let c = table.vectors.row(center).to_vec();
    for (target, label) in std::iter::once((context, 1.0)).chain(negatives.iter().map(|&n| (n, 0.0))) {
        let out = table.context.row_mut(target);
        let score = dot(&c, out);
        loss += if label == 1.0 {
            neg_log_sigmoid(score)
        } else {
            neg_log_sigmoid(-score)
        };
        let g = sigmoid(score) - label;
        axpy(g, out, d_center);
        axpy(-lr * g, &c, out);
    }
    axpy(-lr, d_center, table.vectors.row_mut(center));
    loss
}
