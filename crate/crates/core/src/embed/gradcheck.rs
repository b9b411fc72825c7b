//! Central finite-difference verification of analytic gradients.
//!
//! Each [`GradCase`] exposes its parameters (and inputs) as one flat vector, a scalar
//! loss over that vector, and the analytic gradient computed by the same backward
//! code the trainers use. Losses for layer outputs are random linear probes `c · y`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::aggregate::{aggregate_backward, aggregate_cached};
use super::skipgram::{sgns_grad, sgns_loss};
use super::EmbedError;
use crate::linalg::{dot, Activation, Matrix};
use crate::rank::FusionLayer;
use crate::semantic::GruParams;

pub const MIN_EPSILON: f64 = 1e-7;
pub const MAX_EPSILON: f64 = 1e-3;
/// Gradient magnitudes below this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-8;

pub trait Differentiable {
    fn params(&self) -> Vec<f64>;
    fn loss(&self, params: &[f64]) -> f64;
    fn gradient(&self, params: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum GradOp {
    Aggregate,
    SkipGram,
    Fusion,
    Gru,
}

impl GradOp {
    pub const ALL: [GradOp; 4] = [GradOp::Aggregate, GradOp::SkipGram, GradOp::Fusion, GradOp::Gru];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradReport {
    pub max_relative_error: f64,
    pub worst_coordinate: usize,
    pub coordinates: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `f.gradient` with central differences at every coordinate.
pub fn check_differentiable(f: &dyn Differentiable, epsilon: f64) -> Result<GradReport, EmbedError> {
    if !(MIN_EPSILON..=MAX_EPSILON).contains(&epsilon) {
        return Err(EmbedError::Config(format!(
            "epsilon {epsilon:e} outside [{MIN_EPSILON:e}, {MAX_EPSILON:e}]"
        )));
    }
    let base = f.params();
    let analytic = f.gradient(&base);
    let mut report = GradReport {
        max_relative_error: 0.0,
        worst_coordinate: 0,
        coordinates: base.len(),
    };
    let mut probe = base.clone();
    for (i, &a) in analytic.iter().enumerate() {
        probe[i] = base[i] + epsilon;
        let up = f.loss(&probe);
        probe[i] = base[i] - epsilon;
        let down = f.loss(&probe);
        probe[i] = base[i];
        let numeric = (up - down) / (2.0 * epsilon);
        if !a.is_finite() || !numeric.is_finite() {
            return Err(EmbedError::NonFiniteGradient { coordinate: i });
        }
        let err = relative_error(a, numeric);
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_coordinate = i;
        }
    }
    Ok(report)
}

/// A concrete operation with its parameters, inputs and loss probe.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum GradCase {
    /// `c · φ(W · mean(neighbors))`; parameters are `W` then the neighbors.
    Aggregate {
        weight: Matrix,
        neighbors: Vec<Vec<f64>>,
        activation: Activation,
        probe: Vec<f64>,
    },
    /// Skip-gram negative-sampling loss; parameters are center, context, negatives.
    SkipGram {
        center: Vec<f64>,
        context: Vec<f64>,
        negatives: Vec<Vec<f64>>,
    },
    /// `c · fuse(u_content, u_hashtag)`; parameters are `W_nn`, `b_nn`, then both inputs.
    Fusion {
        layer: FusionLayer,
        u_content: Vec<f64>,
        u_hashtag: Vec<f64>,
        probe: Vec<f64>,
    },
    /// `c · gru_step(x, h_prev)`; parameters are the nine GRU tensors, then `x`, `h_prev`.
    Gru {
        params: GruParams,
        x: Vec<f64>,
        h_prev: Vec<f64>,
        probe: Vec<f64>,
    },
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-bound..=bound)).collect()
}

impl GradCase {
    /// A random instance of `op`. Matrices and inputs are uniform in `[-0.5, 0.5]`
    /// (skip-gram vectors in `[-0.1, 0.1]`), activations are `tanh`.
    pub fn random(op: GradOp, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = 4;
        match op {
            GradOp::Aggregate => GradCase::Aggregate {
                weight: Matrix::uniform(d, d, 0.5, &mut rng),
                neighbors: (0..3).map(|_| rand_vec(&mut rng, d, 0.5)).collect(),
                activation: Activation::Tanh,
                probe: rand_vec(&mut rng, d, 1.0),
            },
            GradOp::SkipGram => GradCase::SkipGram {
                center: rand_vec(&mut rng, d, 0.1),
                context: rand_vec(&mut rng, d, 0.1),
                negatives: (0..3).map(|_| rand_vec(&mut rng, d, 0.1)).collect(),
            },
            GradOp::Fusion => GradCase::Fusion {
                layer: FusionLayer::new(
                    Matrix::uniform(d, 2 * d, 0.5, &mut rng),
                    rand_vec(&mut rng, d, 0.5),
                    Activation::Tanh,
                )
                .expect("shapes are consistent"),
                u_content: rand_vec(&mut rng, d, 0.5),
                u_hashtag: rand_vec(&mut rng, d, 0.5),
                probe: rand_vec(&mut rng, d, 1.0),
            },
            GradOp::Gru => {
                let (e, h) = (3, 4);
                GradCase::Gru {
                    params: GruParams::uniform(e, h, 0.5, &mut rng),
                    x: rand_vec(&mut rng, e, 0.5),
                    h_prev: rand_vec(&mut rng, h, 0.5),
                    probe: rand_vec(&mut rng, h, 1.0),
                }
            }
        }
    }

    pub fn op(&self) -> GradOp {
        match self {
            GradCase::Aggregate { .. } => GradOp::Aggregate,
            GradCase::SkipGram { .. } => GradOp::SkipGram,
            GradCase::Fusion { .. } => GradOp::Fusion,
            GradCase::Gru { .. } => GradOp::Gru,
        }
    }
}

fn split_rows(flat: &[f64], rows: usize, cols: usize) -> Vec<Vec<f64>> {
    flat.chunks(cols).take(rows).map(<[f64]>::to_vec).collect()
}

impl Differentiable for GradCase {
    fn params(&self) -> Vec<f64> {
        match self {
            GradCase::Aggregate { weight, neighbors, .. } => {
                let mut p = weight.as_slice().to_vec();
                p.extend(neighbors.iter().flatten());
                p
            }
            GradCase::SkipGram {
                center,
                context,
                negatives,
            } => {
                let mut p = center.clone();
                p.extend_from_slice(context);
                p.extend(negatives.iter().flatten());
                p
            }
            GradCase::Fusion {
                layer,
                u_content,
                u_hashtag,
                ..
            } => {
                let mut p = layer.weight.as_slice().to_vec();
                p.extend_from_slice(&layer.bias);
                p.extend_from_slice(u_content);
                p.extend_from_slice(u_hashtag);
                p
            }
            GradCase::Gru { params, x, h_prev, .. } => {
                let mut p = params.flatten();
                p.extend_from_slice(x);
                p.extend_from_slice(h_prev);
                p
            }
        }
    }

    fn loss(&self, p: &[f64]) -> f64 {
        match self {
            GradCase::Aggregate {
                weight,
                neighbors,
                activation,
                probe,
            } => {
                let d = weight.rows();
                let (w, rest) = p.split_at(d * d);
                let w = Matrix::from_vec(d, d, w.to_vec()).expect("sizes from params()");
                let nb = split_rows(rest, neighbors.len(), d);
                let refs: Vec<&[f64]> = nb.iter().map(Vec::as_slice).collect();
                let out = aggregate_cached(&w, &refs, *activation).expect("valid case").out;
                dot(probe, &out)
            }
            GradCase::SkipGram { center, negatives, .. } => {
                let d = center.len();
                let c = &p[..d];
                let o = &p[d..2 * d];
                let nb = split_rows(&p[2 * d..], negatives.len(), d);
                let refs: Vec<&[f64]> = nb.iter().map(Vec::as_slice).collect();
                sgns_loss(c, o, &refs)
            }
            GradCase::Fusion { layer, probe, .. } => {
                let (l, uc, uh) = unpack_fusion(layer, p);
                dot(probe, &l.fuse(uc, uh).expect("valid case"))
            }
            GradCase::Gru { params, probe, .. } => {
                let (g, x, h) = unpack_gru(params, p);
                dot(probe, &g.step(x, h).expect("valid case"))
            }
        }
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        match self {
            GradCase::Aggregate {
                weight,
                neighbors,
                activation,
                probe,
            } => {
                let d = weight.rows();
                let (w, rest) = p.split_at(d * d);
                let w = Matrix::from_vec(d, d, w.to_vec()).expect("sizes from params()");
                let nb = split_rows(rest, neighbors.len(), d);
                let refs: Vec<&[f64]> = nb.iter().map(Vec::as_slice).collect();
                let cache = aggregate_cached(&w, &refs, *activation).expect("valid case");
                let mut dw = Matrix::zeros(d, d);
                let dmean = aggregate_backward(&w, &cache, probe, *activation, &mut dw);
                let mut g = dw.as_slice().to_vec();
                let share: Vec<f64> = dmean.iter().map(|v| v / neighbors.len() as f64).collect();
                for _ in 0..neighbors.len() {
                    g.extend_from_slice(&share);
                }
                g
            }
            GradCase::SkipGram { center, negatives, .. } => {
                let d = center.len();
                let nb = split_rows(&p[2 * d..], negatives.len(), d);
                let refs: Vec<&[f64]> = nb.iter().map(Vec::as_slice).collect();
                let (_, g) = sgns_grad(&p[..d], &p[d..2 * d], &refs);
                let mut out = g.center;
                out.extend(g.context);
                out.extend(g.negatives.into_iter().flatten());
                out
            }
            GradCase::Fusion { layer, probe, .. } => {
                let (l, uc, uh) = unpack_fusion(layer, p);
                let cache = l.forward(uc, uh).expect("valid case");
                let mut grads = l.zeros_like();
                let dinput = l.backward(&cache, probe, &mut grads);
                let mut out = grads.weight.as_slice().to_vec();
                out.extend(grads.bias);
                out.extend(dinput);
                out
            }
            GradCase::Gru { params, probe, .. } => {
                let (g, x, h) = unpack_gru(params, p);
                let cache = g.step_cached(x, h).expect("valid case");
                let mut grads = GruParams::zeros(g.input_dim(), g.hidden_dim());
                let (dx, dh) = g.backward(&cache, probe, &mut grads, true);
                let mut out = grads.flatten();
                out.extend(dx.expect("requested"));
                out.extend(dh);
                out
            }
        }
    }
}

fn unpack_fusion<'a>(layer: &FusionLayer, p: &'a [f64]) -> (FusionLayer, &'a [f64], &'a [f64]) {
    let d = layer.dim();
    let (w, rest) = p.split_at(2 * d * d);
    let (b, rest) = rest.split_at(d);
    let (uc, uh) = rest.split_at(d);
    let l = FusionLayer::new(
        Matrix::from_vec(d, 2 * d, w.to_vec()).expect("sizes from params()"),
        b.to_vec(),
        layer.activation,
    )
    .expect("sizes from params()");
    (l, uc, uh)
}

fn unpack_gru<'a>(params: &GruParams, p: &'a [f64]) -> (GruParams, &'a [f64], &'a [f64]) {
    let n = params.param_count();
    let mut g = params.clone();
    g.load_flat(&p[..n]);
    let (x, h) = p[n..].split_at(params.input_dim());
    (g, x, h)
}

/// Maximum relative error between the analytic gradient of `case` and central
/// differences with step `epsilon` (which must lie in `[1e-7, 1e-3]`).
pub fn grad_check(case: &GradCase, epsilon: f64) -> Result<GradReport, EmbedError> {
    check_differentiable(case, epsilon)
}
