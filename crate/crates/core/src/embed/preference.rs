//! User preference model: aggregate hashtag and content neighbors, fuse them, and
//! train the maps so the fused user vector scores the user's own hashtags above
//! randomly drawn ones.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::aggregate::{aggregate_backward, aggregate_cached, propagate, AggregateCache, AggregationWeights};
use super::{EmbedError, EmbeddingTable, TrainConfig};
use crate::graph::{splitmix64, EdgeKind, HeteroGraph, NodeId, NodeKind};
use crate::linalg::{axpy, dot, neg_log_sigmoid, sigmoid, Activation, Matrix};
use crate::rank::FusionLayer;

#[derive(Debug, Clone, PartialEq)]
pub struct UserPreference {
    pub hashtag: Vec<f64>,
    pub content: Vec<f64>,
    /// No hashtag neighbors: the hashtag preference is the zero vector.
    pub cold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceModel {
    pub weights: AggregationWeights,
    pub fusion: FusionLayer,
    pub report: PreferenceReport,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PreferenceReport {
    pub epoch_losses: Vec<f64>,
    pub cold_users: usize,
}

/// Neighbor vectors fed to aggregation: the trained vectors for one layer, or one
/// propagation step over the graph for two.
pub fn preference_inputs(graph: &HeteroGraph, table: &EmbeddingTable, layers: usize) -> Matrix {
    if layers >= 2 {
        propagate(graph, table.vectors())
    } else {
        table.vectors().clone()
    }
}

fn neighbor_rows<'a>(graph: &HeteroGraph, inputs: &'a Matrix, user: NodeId, kind: EdgeKind) -> Vec<&'a [f64]> {
    graph
        .neighbors(user, kind)
        .expect("user from graph")
        .iter()
        .map(|&n| inputs.row(graph.global_index(n)))
        .collect()
}

/// Hashtag and content preference of every user, in user ordinal order. Missing
/// neighborhoods yield zero vectors.
pub fn user_preferences(
    graph: &HeteroGraph,
    inputs: &Matrix,
    weights: &AggregationWeights,
    activation: Activation,
) -> Vec<UserPreference> {
    let dim = weights.dim();
    (0..graph.node_count(NodeKind::User) as u32)
        .map(|o| {
            let user = NodeId::user(o);
            let hs = neighbor_rows(graph, inputs, user, EdgeKind::UserHashtag);
            let cs = neighbor_rows(graph, inputs, user, EdgeKind::UserContent);
            let agg = |w: &Matrix, rows: &[&[f64]]| match aggregate_cached(w, rows, activation) {
                Ok(c) => c.out,
                Err(_) => vec![0.0; dim],
            };
            UserPreference {
                hashtag: agg(&weights.hashtag, &hs),
                content: agg(&weights.content, &cs),
                cold: hs.is_empty(),
            }
        })
        .collect()
}

/// One user's training example.
pub(crate) struct UserExample<'a> {
    pub hashtags: Vec<&'a [f64]>,
    pub contents: Vec<&'a [f64]>,
    /// `(positive, negatives)` pairs.
    pub targets: Vec<(&'a [f64], Vec<&'a [f64]>)>,
}

pub(crate) struct PreferenceGrads {
    pub weights: AggregationWeights,
    pub fusion: FusionLayer,
    pub d_hashtag_mean: Vec<f64>,
    pub d_content_mean: Option<Vec<f64>>,
    /// Gradient for each target vector, in `targets` order (positive then negatives).
    pub d_targets: Vec<Vec<Vec<f64>>>,
}

struct Forward {
    hashtag: AggregateCache,
    content: Option<AggregateCache>,
    fused: crate::rank::FusionCache,
}

fn forward(
    weights: &AggregationWeights,
    fusion: &FusionLayer,
    activation: Activation,
    ex: &UserExample<'_>,
) -> Result<Forward, EmbedError> {
    let hashtag = aggregate_cached(&weights.hashtag, &ex.hashtags, activation)?;
    let content = match aggregate_cached(&weights.content, &ex.contents, activation) {
        Ok(c) => Some(c),
        Err(EmbedError::EmptyNeighborhood) => None,
        Err(e) => return Err(e),
    };
    let zero = vec![0.0; weights.dim()];
    let u_c = content.as_ref().map_or(&zero, |c| &c.out);
    let fused = fusion.forward(u_c, &hashtag.out)?;
    Ok(Forward {
        hashtag,
        content,
        fused,
    })
}

#[cfg(test)]
pub(crate) fn user_loss(
    weights: &AggregationWeights,
    fusion: &FusionLayer,
    activation: Activation,
    ex: &UserExample<'_>,
) -> Result<f64, EmbedError> {
    let f = forward(weights, fusion, activation, ex)?;
    let u = &f.fused.out;
    Ok(ex
        .targets
        .iter()
        .map(|(pos, negs)| neg_log_sigmoid(dot(u, pos)) + negs.iter().map(|n| neg_log_sigmoid(-dot(u, n))).sum::<f64>())
        .sum())
}

pub(crate) fn user_loss_grad(
    weights: &AggregationWeights,
    fusion: &FusionLayer,
    activation: Activation,
    ex: &UserExample<'_>,
) -> Result<(f64, PreferenceGrads), EmbedError> {
    let dim = weights.dim();
    let f = forward(weights, fusion, activation, ex)?;
    let u = &f.fused.out;
    let mut loss = 0.0;
    let mut du = vec![0.0; dim];
    let mut d_targets = Vec::with_capacity(ex.targets.len());
    for (pos, negs) in &ex.targets {
        let s = dot(u, pos);
        loss += neg_log_sigmoid(s);
        let g = sigmoid(s) - 1.0;
        axpy(g, pos, &mut du);
        let mut dt = vec![u.iter().map(|x| g * x).collect::<Vec<_>>()];
        for n in negs {
            let s = dot(u, n);
            loss += neg_log_sigmoid(-s);
            let g = sigmoid(s);
            axpy(g, n, &mut du);
            dt.push(u.iter().map(|x| g * x).collect());
        }
        d_targets.push(dt);
    }
    let mut gfusion = fusion.zeros_like();
    let dinput = fusion.backward(&f.fused, &du, &mut gfusion);
    let (du_c, du_h) = dinput.split_at(dim);
    let mut gweights = AggregationWeights {
        hashtag: Matrix::zeros(dim, dim),
        content: Matrix::zeros(dim, dim),
    };
    let d_hashtag_mean = aggregate_backward(&weights.hashtag, &f.hashtag, du_h, activation, &mut gweights.hashtag);
    let d_content_mean = f
        .content
        .as_ref()
        .map(|c| aggregate_backward(&weights.content, c, du_c, activation, &mut gweights.content));
    Ok((
        loss,
        PreferenceGrads {
            weights: gweights,
            fusion: gfusion,
            d_hashtag_mean,
            d_content_mean,
            d_targets,
        },
    ))
}

/// Trains aggregation and fusion weights with SGD, one step per non-cold user.
///
/// Each of a user's hashtags is a positive for the fused user vector, contrasted with
/// `preference_negatives` uniformly drawn hashtags. Embeddings stay fixed unless
/// `unfreeze_embeddings` is set.
pub fn train_preference(
    graph: &HeteroGraph,
    table: &mut EmbeddingTable,
    cfg: &TrainConfig,
) -> Result<PreferenceModel, EmbedError> {
    cfg.validate()?;
    let dim = cfg.dim;
    let bound = cfg.init_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0xa66e_6a7e));
    let mut weights = AggregationWeights::init(dim, bound, &mut rng);
    let mut fusion = FusionLayer::init(dim, bound, cfg.activation, &mut rng);
    let n_hashtags = graph.node_count(NodeKind::Hashtag);
    let mut report = PreferenceReport::default();
    let lr = cfg.preference_learning_rate;
    let mut inputs = preference_inputs(graph, table, cfg.gcn_layers);
    let mut step = 0u64;

    for user in 0..graph.node_count(NodeKind::User) as u32 {
        if graph.neighbors(NodeId::user(user), EdgeKind::UserHashtag)?.is_empty() {
            report.cold_users += 1;
        }
    }

    for epoch in 0..cfg.preference_epochs {
        let mut epoch_loss = 0.0;
        let mut terms = 0usize;
        for user in (0..graph.node_count(NodeKind::User) as u32).map(NodeId::user) {
            let positives = graph.neighbors(user, EdgeKind::UserHashtag)?;
            if positives.is_empty() || n_hashtags == 0 {
                continue;
            }
            let negatives: Vec<Vec<NodeId>> = positives
                .iter()
                .map(|_| {
                    (0..cfg.preference_negatives)
                        .map(|_| NodeId::hashtag(rng.random_range(0..n_hashtags) as u32))
                        .collect()
                })
                .collect();
            let (loss, grads) = {
                let row = |n: NodeId| table.vector(n).expect("node from graph");
                let ex = UserExample {
                    hashtags: neighbor_rows(graph, &inputs, user, EdgeKind::UserHashtag),
                    contents: neighbor_rows(graph, &inputs, user, EdgeKind::UserContent),
                    targets: positives
                        .iter()
                        .zip(&negatives)
                        .map(|(&p, negs)| (row(p), negs.iter().map(|&n| row(n)).collect()))
                        .collect(),
                };
                user_loss_grad(&weights, &fusion, cfg.activation, &ex)?
            };
            if !loss.is_finite() {
                return Err(EmbedError::Diverged {
                    step,
                    what: "preference loss",
                });
            }
            epoch_loss += loss;
            terms += positives.len();

            axpy(-lr, grads.weights.hashtag.as_slice(), weights.hashtag.as_mut_slice());
            axpy(-lr, grads.weights.content.as_slice(), weights.content.as_mut_slice());
            axpy(-lr, grads.fusion.weight.as_slice(), fusion.weight.as_mut_slice());
            axpy(-lr, &grads.fusion.bias, &mut fusion.bias);

            if cfg.unfreeze_embeddings {
                apply_embedding_grads(graph, table, user, positives, &negatives, &grads, lr);
            }
            if !(weights.is_finite() && fusion.is_finite()) {
                return Err(EmbedError::Diverged {
                    step,
                    what: "preference weights",
                });
            }
            step += 1;
        }
        if cfg.unfreeze_embeddings {
            if !table.is_finite() {
                return Err(EmbedError::Diverged {
                    step,
                    what: "embedding table",
                });
            }
            inputs = preference_inputs(graph, table, cfg.gcn_layers);
        }
        let mean = if terms == 0 { 0.0 } else { epoch_loss / terms as f64 };
        log::debug!("preference epoch {epoch}: mean loss {mean:.6}");
        report.epoch_losses.push(mean);
    }
    Ok(PreferenceModel {
        weights,
        fusion,
        report,
    })
}

fn apply_embedding_grads(
    graph: &HeteroGraph,
    table: &mut EmbeddingTable,
    user: NodeId,
    positives: &[NodeId],
    negatives: &[Vec<NodeId>],
    grads: &PreferenceGrads,
    lr: f64,
) {
    let mut update = |n: NodeId, scale: f64, g: &[f64]| {
        let r = table.row_index(n).expect("node from graph");
        axpy(-lr * scale, g, table.vectors_mut().row_mut(r));
    };
    let hs = graph.neighbors(user, EdgeKind::UserHashtag).expect("user from graph");
    for &h in hs {
        update(h, 1.0 / hs.len() as f64, &grads.d_hashtag_mean);
    }
    if let Some(dc) = &grads.d_content_mean {
        let cs = graph.neighbors(user, EdgeKind::UserContent).expect("user from graph");
        for &c in cs {
            update(c, 1.0 / cs.len() as f64, dc);
        }
    }
    for ((&p, negs), dt) in positives.iter().zip(negatives).zip(&grads.d_targets) {
        update(p, 1.0, &dt[0]);
        for (&n, g) in negs.iter().zip(&dt[1..]) {
            update(n, 1.0, g);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::gradcheck::{check_differentiable, Differentiable};
    use crate::embed::train_tag2vec;
    use crate::ingest::{Corpus, PostRecord};

    struct PreferenceLoss {
        dim: usize,
        activation: Activation,
        hashtags: Vec<Vec<f64>>,
        contents: Vec<Vec<f64>>,
        targets: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
    }

    impl PreferenceLoss {
        fn unpack(&self, p: &[f64]) -> (AggregationWeights, FusionLayer) {
            let d = self.dim;
            let (wh, rest) = p.split_at(d * d);
            let (wc, rest) = rest.split_at(d * d);
            let (wf, b) = rest.split_at(2 * d * d);
            (
                AggregationWeights {
                    hashtag: Matrix::from_vec(d, d, wh.to_vec()).unwrap(),
                    content: Matrix::from_vec(d, d, wc.to_vec()).unwrap(),
                },
                FusionLayer::new(
                    Matrix::from_vec(d, 2 * d, wf.to_vec()).unwrap(),
                    b.to_vec(),
                    self.activation,
                )
                .unwrap(),
            )
        }

        fn example(&self) -> UserExample<'_> {
            UserExample {
                hashtags: self.hashtags.iter().map(Vec::as_slice).collect(),
                contents: self.contents.iter().map(Vec::as_slice).collect(),
                targets: self
                    .targets
                    .iter()
                    .map(|(p, n)| (p.as_slice(), n.iter().map(Vec::as_slice).collect()))
                    .collect(),
            }
        }
    }

    impl Differentiable for PreferenceLoss {
        fn params(&self) -> Vec<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let d = self.dim;
            (0..(4 * d * d + d)).map(|_| rng.random_range(-0.6..0.6)).collect()
        }
        fn loss(&self, p: &[f64]) -> f64 {
            let (w, f) = self.unpack(p);
            user_loss(&w, &f, self.activation, &self.example()).unwrap()
        }
        fn gradient(&self, p: &[f64]) -> Vec<f64> {
            let (w, f) = self.unpack(p);
            let (_, g) = user_loss_grad(&w, &f, self.activation, &self.example()).unwrap();
            let mut out = g.weights.hashtag.as_slice().to_vec();
            out.extend_from_slice(g.weights.content.as_slice());
            out.extend_from_slice(g.fusion.weight.as_slice());
            out.extend_from_slice(&g.fusion.bias);
            out
        }
    }

    fn random_vecs(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn preference_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (activation, with_content) in [
            (Activation::Tanh, true),
            (Activation::Identity, false),
            (Activation::Tanh, false),
        ] {
            let d = 3;
            let case = PreferenceLoss {
                dim: d,
                activation,
                hashtags: random_vecs(&mut rng, 3, d),
                contents: if with_content {
                    random_vecs(&mut rng, 2, d)
                } else {
                    vec![]
                },
                targets: (0..2)
                    .map(|_| (random_vecs(&mut rng, 1, d).remove(0), random_vecs(&mut rng, 2, d)))
                    .collect(),
            };
            let report = check_differentiable(&case, 1e-5).unwrap();
            assert!(report.max_relative_error <= 1e-6, "{activation:?}: {report:?}");
        }
    }

    fn corpus() -> Corpus {
        let posts = (0..12)
            .map(|i| PostRecord {
                id: format!("p{i}"),
                user: format!("u{}", i % 4),
                text: if i % 2 == 0 {
                    "red shoes sale".into()
                } else {
                    "glow skin serum".into()
                },
                hashtags: if i % 2 == 0 {
                    vec!["#shoes".into(), "#red".into()]
                } else {
                    vec!["#glow".into()]
                },
                timestamp: i,
            })
            .collect();
        Corpus::from_records(posts, vec![])
    }

    #[test]
    fn training_reduces_loss_and_stays_finite() {
        let g = crate::graph::build_graph(&corpus()).graph;
        let cfg = TrainConfig {
            dim: 8,
            epochs: 2,
            walk_length: 6,
            window: 2,
            preference_epochs: 30,
            preference_learning_rate: 0.2,
            ..TrainConfig::default()
        };
        let (mut table, _) = train_tag2vec(&g, &cfg).unwrap();
        let frozen = table.clone();
        let model = train_preference(&g, &mut table, &cfg).unwrap();
        assert_eq!(table, frozen, "embeddings are frozen by default");
        let losses = &model.report.epoch_losses;
        assert!(losses.last().unwrap() < losses.first().unwrap(), "{losses:?}");
        assert!(model.weights.is_finite() && model.fusion.is_finite());
    }

    #[test]
    fn unfrozen_training_moves_embeddings() {
        let g = crate::graph::build_graph(&corpus()).graph;
        let cfg = TrainConfig {
            dim: 8,
            epochs: 1,
            walk_length: 6,
            window: 2,
            preference_epochs: 3,
            unfreeze_embeddings: true,
            ..TrainConfig::default()
        };
        let (mut table, _) = train_tag2vec(&g, &cfg).unwrap();
        let before = table.clone();
        train_preference(&g, &mut table, &cfg).unwrap();
        assert_ne!(table, before);
        assert!(table.is_finite());
    }

    #[test]
    fn cold_users_get_zero_hashtag_preference() {
        let mut posts = corpus();
        posts.posts.push(crate::ingest::Located {
            line: 99,
            record: PostRecord {
                id: "lonely".into(),
                user: "quiet".into(),
                text: "nothing tagged".into(),
                hashtags: vec![],
                timestamp: 0,
            },
        });
        let g = crate::graph::build_graph(&posts).graph;
        let cfg = TrainConfig {
            dim: 4,
            ..TrainConfig::default()
        };
        let table = EmbeddingTable::init(&g, 4, 1);
        let weights = AggregationWeights::identity(4);
        let prefs = user_preferences(&g, &preference_inputs(&g, &table, 1), &weights, cfg.activation);
        let quiet = g.find(NodeKind::User, "quiet").unwrap();
        let p = &prefs[quiet.ordinal as usize];
        assert!(p.cold);
        assert_eq!(p.hashtag, vec![0.0; 4]);
        assert!(p.content.iter().any(|&x| x != 0.0));
        assert_eq!(prefs.iter().filter(|p| p.cold).count(), 1);
    }
}
