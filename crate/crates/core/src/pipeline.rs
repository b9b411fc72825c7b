//! Corpus to snapshot: graph, Tag2Vec, preference model, text encoder, index.

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::fnv64;
use crate::embed::{
    preference_inputs, train_preference, train_tag2vec, user_preferences, EmbedError, EmbeddingTable, TrainConfig,
    UserPreference,
};
use crate::graph::{build_graph, splitmix64, EdgeKind, HeteroGraph, Ingestion, NodeId, NodeKind};
use crate::index::{build_index, HashtagRecord, IndexError};
use crate::ingest::{Corpus, Rejection};
use crate::linalg::axpy;
use crate::semantic::{train_encoder, BiGru, EncoderExample, SemanticError, TextEncoder, Vocab};
use crate::snapshot::{token_embeddings, CategoryEntry, ModelSnapshot, SnapshotError, SnapshotMeta, UserContexts};
use crate::text::Lexicon;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub node_counts: [usize; 5],
    pub edge_counts: [usize; 6],
    pub tag2vec_losses: Vec<f64>,
    pub preference_losses: Vec<f64>,
    pub cold_users: usize,
    pub encoder_examples: usize,
    pub encoder_losses: Vec<f64>,
    pub rejected: Vec<Rejection>,
}

/// Stable hash of the configuration's JSON form.
pub fn config_hash(cfg: &TrainConfig) -> u64 {
    fnv64(&serde_json::to_vec(cfg).expect("config serializes"))
}

pub fn train_corpus(corpus: &Corpus, cfg: &TrainConfig) -> Result<(ModelSnapshot, TrainReport), PipelineError> {
    train(&build_graph(corpus), cfg)
}

fn ids(vocab: &Vocab, words: &[String]) -> Vec<u32> {
    words.iter().filter_map(|w| vocab.get(w)).collect()
}

fn encoder_examples(ing: &Ingestion, table: &EmbeddingTable, vocab: &Vocab, lexicon: &Lexicon) -> Vec<EncoderExample> {
    let g = &ing.graph;
    let linked = |n: NodeId| g.degree(n).unwrap_or(0) > 0;
    let mut out = Vec::new();
    let mut push = |node: NodeId, sentences: Vec<Vec<u32>>| {
        let sentences: Vec<Vec<u32>> = sentences.into_iter().filter(|s| !s.is_empty()).collect();
        if !sentences.is_empty() && linked(node) {
            out.push(EncoderExample {
                sentences,
                target: table.vector(node).expect("node from graph").to_vec(),
            });
        }
    };
    for (o, h) in ing.hashtags.iter().enumerate() {
        push(NodeId::hashtag(o as u32), vec![ids(vocab, &h.words)]);
    }
    for (o, c) in ing.categories.iter().enumerate() {
        push(
            NodeId::category(o as u32),
            vec![ids(vocab, &lexicon.tokenize_query(&c.name))],
        );
    }
    for (o, c) in ing.contents.iter().enumerate() {
        push(
            NodeId::content(o as u32),
            c.sentences.iter().map(|s| vocab.encode(s)).collect(),
        );
    }
    out
}

fn mean_preference<'a>(prefs: impl Iterator<Item = &'a UserPreference>, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let (mut h, mut c) = (vec![0.0; dim], vec![0.0; dim]);
    let mut n = 0usize;
    for p in prefs {
        axpy(1.0, &p.hashtag, &mut h);
        axpy(1.0, &p.content, &mut c);
        n += 1;
    }
    if n > 0 {
        let inv = 1.0 / n as f64;
        h.iter_mut().chain(c.iter_mut()).for_each(|v| *v *= inv);
    }
    (h, c)
}

fn user_contexts(g: &HeteroGraph, prefs: &[UserPreference], dim: usize) -> UserContexts {
    let (global_hashtag, global_content) = mean_preference(prefs.iter().filter(|p| !p.cold), dim);
    let per_hashtag = (0..g.node_count(NodeKind::Hashtag) as u32)
        .map(|o| {
            let users = g
                .neighbors(NodeId::hashtag(o), EdgeKind::UserHashtag)
                .expect("hashtag from graph");
            mean_preference(users.iter().map(|u| &prefs[u.ordinal as usize]), dim)
        })
        .collect();
    UserContexts {
        global_hashtag,
        global_content,
        per_hashtag,
    }
}

/// Trains every component and returns the snapshot as it will be after a save and
/// reload (floats rounded through `f32`).
pub fn train(ing: &Ingestion, cfg: &TrainConfig) -> Result<(ModelSnapshot, TrainReport), PipelineError> {
    cfg.validate()?;
    let g = &ing.graph;
    let dim = cfg.dim;
    info!("graph: nodes {:?}, edges {:?}", g.node_counts(), g.edge_counts());

    let (mut table, t2v) = train_tag2vec(g, cfg)?;
    let pref = train_preference(g, &mut table, cfg)?;

    let vocab = Vocab::from_words(g.labels(NodeKind::Word));
    let lexicon = vocab.lexicon();
    let hidden = dim / 2;
    let bound = 1.0 / (hidden as f64).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(cfg.seed ^ 0x5e3a_7c01));
    let word = BiGru::uniform(dim, hidden, bound, &mut rng);
    let sentence = BiGru::uniform(2 * hidden, hidden, bound, &mut rng);
    let mut encoder = TextEncoder::new(vocab, token_embeddings(&table), word, sentence).expect("consistent dims");
    let examples = encoder_examples(ing, &table, &encoder.vocab, &lexicon);
    let encoder_losses = train_encoder(&mut encoder, &examples, cfg.semantic_epochs, cfg.semantic_learning_rate)?;

    let inputs = preference_inputs(g, &table, cfg.gcn_layers);
    let prefs = user_preferences(g, &inputs, &pref.weights, cfg.activation);
    let user_context = user_contexts(g, &prefs, dim);

    let records = ing.hashtags.iter().enumerate().map(|(o, h)| HashtagRecord {
        id: o as u32,
        text: h.text.clone(),
        tokens: ids(&encoder.vocab, &h.words),
        post_count: h.timestamps.len() as u64,
        timestamps: h.timestamps.clone(),
        node: NodeId::hashtag(o as u32),
    });
    let index = build_index(records)?;
    let categories = ing
        .categories
        .iter()
        .enumerate()
        .map(|(o, c)| CategoryEntry {
            id: c.id.clone(),
            name: c.name.clone(),
            parent: c.parent.clone(),
            hashtags: g
                .neighbors(NodeId::category(o as u32), EdgeKind::HashtagCategory)
                .expect("category from graph")
                .iter()
                .map(|n| n.ordinal)
                .collect(),
        })
        .collect();

    let counts = table.node_counts();
    let stored = EmbeddingTable::from_parts(counts, table.vectors().clone(), crate::linalg::Matrix::zeros(0, dim));
    let snapshot = ModelSnapshot {
        meta: SnapshotMeta {
            digest: g.digest(),
            created_at: ing
                .hashtags
                .iter()
                .filter_map(|h| h.timestamps.last())
                .copied()
                .max()
                .unwrap_or(0),
            config_hash: config_hash(cfg),
            config: cfg.clone(),
        },
        embeddings: stored,
        aggregation: pref.weights,
        encoder,
        fusion: pref.fusion,
        user_context,
        index,
        categories,
    }
    .quantized()?;

    let report = TrainReport {
        node_counts: g.node_counts(),
        edge_counts: g.edge_counts(),
        tag2vec_losses: t2v.epoch_losses,
        preference_losses: pref.report.epoch_losses,
        cold_users: pref.report.cold_users,
        encoder_examples: examples.len(),
        encoder_losses,
        rejected: ing.rejected.clone(),
    };
    Ok((snapshot, report))
}
