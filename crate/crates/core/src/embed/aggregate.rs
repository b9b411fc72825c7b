//! Mean-of-neighbors message passing into user preference vectors.
//!
//! `u = φ(W · mean_j(v_j))`, where `v_j` are the vectors of a user's hashtag (or
//! content) neighbors. The mean is summed in a canonical order so the result is
//! bit-identical under any permutation of the neighbor list.

use std::cmp::Ordering;

use rand::Rng;

use super::EmbedError;
use crate::graph::{EdgeKind, HeteroGraph};
use crate::linalg::{axpy, Activation, Matrix};
use crate::ShapeError;

/// Square maps from hashtag space and content space into user space.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationWeights {
    pub hashtag: Matrix,
    pub content: Matrix,
}

impl AggregationWeights {
    pub fn init<R: Rng + ?Sized>(dim: usize, bound: f64, rng: &mut R) -> Self {
        Self {
            hashtag: Matrix::uniform(dim, dim, bound, rng),
            content: Matrix::uniform(dim, dim, bound, rng),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            hashtag: Matrix::identity(dim),
            content: Matrix::identity(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.hashtag.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.hashtag.is_finite() && self.content.is_finite()
    }
}

/// Intermediate values of one aggregation, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct AggregateCache {
    pub mean: Vec<f64>,
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
    pub count: usize,
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

pub(crate) fn canonical_mean(neighbors: &[&[f64]], dim: usize) -> Result<Vec<f64>, EmbedError> {
    if neighbors.is_empty() {
        return Err(EmbedError::EmptyNeighborhood);
    }
    for v in neighbors {
        if v.len() != dim {
            return Err(ShapeError::new("neighbor vector", dim, v.len()).into());
        }
    }
    let mut order: Vec<&[f64]> = neighbors.to_vec();
    order.sort_by(|a, b| lexicographic(a, b));
    let mut sum = vec![0.0; dim];
    for v in order {
        axpy(1.0, v, &mut sum);
    }
    let inv = 1.0 / neighbors.len() as f64;
    for s in &mut sum {
        *s *= inv;
    }
    Ok(sum)
}

pub(crate) fn aggregate_cached(
    weight: &Matrix,
    neighbors: &[&[f64]],
    activation: Activation,
) -> Result<AggregateCache, EmbedError> {
    if weight.rows() != weight.cols() {
        return Err(ShapeError::new("square aggregation weight", weight.rows(), weight.cols()).into());
    }
    let mean = canonical_mean(neighbors, weight.cols())?;
    let pre = weight.matvec(&mean)?;
    let mut out = pre.clone();
    activation.apply_vec(&mut out);
    Ok(AggregateCache {
        mean,
        pre,
        out,
        count: neighbors.len(),
    })
}

/// `φ(W · mean(neighbors))`. Fails with [`EmbedError::EmptyNeighborhood`] when there
/// are no neighbors; callers treat that user as cold and use the zero vector.
pub fn aggregate(weight: &Matrix, neighbors: &[&[f64]], activation: Activation) -> Result<Vec<f64>, EmbedError> {
    Ok(aggregate_cached(weight, neighbors, activation)?.out)
}

/// User preference on hashtags from the user's hashtag neighbors.
pub fn aggregate_hashtag_preference(
    weights: &AggregationWeights,
    neighbors: &[&[f64]],
    activation: Activation,
) -> Result<Vec<f64>, EmbedError> {
    aggregate(&weights.hashtag, neighbors, activation)
}

/// User preference on contents from the user's content neighbors.
pub fn aggregate_content_preference(
    weights: &AggregationWeights,
    neighbors: &[&[f64]],
    activation: Activation,
) -> Result<Vec<f64>, EmbedError> {
    aggregate(&weights.content, neighbors, activation)
}

/// Back-propagates `dout` through one aggregation. Accumulates into `dweight` and
/// returns the gradient with respect to the neighbor mean; every neighbor receives
/// `dmean / count`.
pub(crate) fn aggregate_backward(
    weight: &Matrix,
    cache: &AggregateCache,
    dout: &[f64],
    activation: Activation,
    dweight: &mut Matrix,
) -> Vec<f64> {
    let dpre: Vec<f64> = dout
        .iter()
        .zip(cache.pre.iter().zip(&cache.out))
        .map(|(g, (&p, &o))| g * activation.derivative(p, o))
        .collect();
    dweight.add_outer(1.0, &dpre, &cache.mean);
    weight.matvec_t(&dpre).expect("shapes validated in forward pass")
}

/// One parameter-free propagation step: each node becomes the mean of itself and all
/// of its neighbors. Rows of `vectors` are in global node order.
pub fn propagate(graph: &HeteroGraph, vectors: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(vectors.rows(), vectors.cols());
    for node in graph.nodes() {
        let gi = graph.global_index(node);
        let row = out.row_mut(gi);
        row.copy_from_slice(vectors.row(gi));
        let mut count = 1.0;
        for kind in EdgeKind::ALL {
            for &nb in graph.neighbors(node, kind).expect("node from graph") {
                axpy(1.0, vectors.row(graph.global_index(nb)), row);
                count += 1.0;
            }
        }
        for v in row.iter_mut() {
            *v /= count;
        }
    }
    out
}
