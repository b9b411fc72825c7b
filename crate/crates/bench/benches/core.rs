use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hashbridge_core::embed::aggregate;
use hashbridge_core::semantic::{BiGru, GruParams};
use hashbridge_core::synthetic::synthetic_corpus;
use hashbridge_core::{
    train_corpus, Activation, Matrix, ModelSnapshot, RankingOptions, SearchEngine, TrainConfig, UserContext,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_snapshot() -> ModelSnapshot {
    let cfg = TrainConfig {
        dim: 16,
        epochs: 1,
        walks_per_node: 2,
        walk_length: 10,
        semantic_epochs: 1,
        ..TrainConfig::default()
    };
    train_corpus(&synthetic_corpus(500, 40, 1), &cfg).unwrap().0
}

fn kernels(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let gru = GruParams::uniform(32, 16, 0.25, &mut rng);
    let (x, h) = (vec![0.1; 32], vec![0.0; 16]);
    c.bench_function("gru_step_32x16", |b| {
        b.iter(|| gru.step(black_box(&x), black_box(&h)).unwrap())
    });

    let bi = BiGru::uniform(32, 16, 0.25, &mut rng);
    let seq: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.01; 32]).collect();
    let refs: Vec<&[f64]> = seq.iter().map(Vec::as_slice).collect();
    c.bench_function("bigru_encode_12", |b| b.iter(|| bi.encode(black_box(&refs)).unwrap()));

    let w = Matrix::uniform(32, 32, 0.2, &mut rng);
    let nbrs: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64).sin(); 32]).collect();
    let nrefs: Vec<&[f64]> = nbrs.iter().map(Vec::as_slice).collect();
    c.bench_function("aggregate_50", |b| {
        b.iter(|| aggregate(&w, black_box(&nrefs), Activation::Tanh).unwrap())
    });
}

fn serving(c: &mut Criterion) {
    let snap = small_snapshot();
    c.bench_function("snapshot_to_bytes", |b| b.iter(|| snap.to_bytes()));
    let bytes = snap.to_bytes();
    c.bench_function("snapshot_from_bytes", |b| {
        b.iter(|| ModelSnapshot::from_bytes(black_box(&bytes)).unwrap())
    });
    let engine = SearchEngine::new(snap, UserContext::GlobalMean);
    let opts = RankingOptions::top(10);
    c.bench_function("rank_keyword", |b| {
        b.iter(|| engine.rank_hashtags(black_box("glow skin"), &opts).unwrap())
    });
    c.bench_function("rank_category", |b| {
        b.iter(|| engine.rank_for_category(black_box("t0"), &opts).unwrap())
    });
}

criterion_group!(benches, kernels, serving);
criterion_main!(benches);
