use rand::Rng;

use crate::linalg::{Activation, Matrix};
use crate::ShapeError;

/// Fully connected layer over `concat(content_pref, hashtag_pref)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionLayer {
    /// `dim × 2·dim`; the first `dim` columns read the content preference.
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone)]
pub struct FusionCache {
    pub input: Vec<f64>,
    pub pre: Vec<f64>,
    pub out: Vec<f64>,
}

impl FusionLayer {
    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self, ShapeError> {
        if weight.cols() != 2 * weight.rows() {
            return Err(ShapeError::new(
                "fusion weight columns",
                2 * weight.rows(),
                weight.cols(),
            ));
        }
        if bias.len() != weight.rows() {
            return Err(ShapeError::new("fusion bias", weight.rows(), bias.len()));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    pub fn init<R: Rng + ?Sized>(dim: usize, bound: f64, activation: Activation, rng: &mut R) -> Self {
        Self {
            weight: Matrix::uniform(dim, 2 * dim, bound, rng),
            bias: vec![0.0; dim],
            activation,
        }
    }

    /// A layer that outputs zero for every input under `Identity`.
    pub fn zero(dim: usize) -> Self {
        Self {
            weight: Matrix::zeros(dim, 2 * dim),
            bias: vec![0.0; dim],
            activation: Activation::Identity,
        }
    }

    pub fn dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, u_content: &[f64], u_hashtag: &[f64]) -> Result<FusionCache, ShapeError> {
        let d = self.dim();
        for (what, v) in [("content preference", u_content), ("hashtag preference", u_hashtag)] {
            if v.len() != d {
                return Err(ShapeError::new(what, d, v.len()));
            }
        }
        let mut input = Vec::with_capacity(2 * d);
        input.extend_from_slice(u_content);
        input.extend_from_slice(u_hashtag);
        let mut pre = self.weight.matvec(&input)?;
        for (p, b) in pre.iter_mut().zip(&self.bias) {
            *p += b;
        }
        let mut out = pre.clone();
        self.activation.apply_vec(&mut out);
        Ok(FusionCache { input, pre, out })
    }

    /// `φ(W · concat(u_content, u_hashtag) + b)`.
    pub fn fuse(&self, u_content: &[f64], u_hashtag: &[f64]) -> Result<Vec<f64>, ShapeError> {
        Ok(self.forward(u_content, u_hashtag)?.out)
    }

    /// Accumulates parameter gradients into `grads` and returns `d concat(input)`.
    pub fn backward(&self, cache: &FusionCache, dout: &[f64], grads: &mut FusionLayer) -> Vec<f64> {
        let dpre: Vec<f64> = dout
            .iter()
            .zip(cache.pre.iter().zip(&cache.out))
            .map(|(g, (&p, &o))| g * self.activation.derivative(p, o))
            .collect();
        grads.weight.add_outer(1.0, &dpre, &cache.input);
        for (gb, d) in grads.bias.iter_mut().zip(&dpre) {
            *gb += d;
        }
        self.weight.matvec_t(&dpre).expect("shapes validated in forward pass")
    }

    /// Zero-valued gradient accumulator of the same shape.
    pub fn zeros_like(&self) -> FusionLayer {
        FusionLayer {
            weight: Matrix::zeros(self.weight.rows(), self.weight.cols()),
            bias: vec![0.0; self.bias.len()],
            activation: self.activation,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite() && self.bias.iter().all(|b| b.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn selector(dim: usize, content: bool) -> FusionLayer {
        let mut w = Matrix::zeros(dim, 2 * dim);
        let off = if content { 0 } else { dim };
        for i in 0..dim {
            w.set(i, off + i, 1.0);
        }
        FusionLayer::new(w, vec![0.0; dim], Activation::Identity).unwrap()
    }

    #[test]
    fn selectors_return_inputs_exactly() {
        let uc = [0.125, -3.5, 1e-9];
        let uh = [7.0, 0.3, -0.1];
        assert_eq!(selector(3, true).fuse(&uc, &uh).unwrap(), uc.to_vec());
        assert_eq!(selector(3, false).fuse(&uc, &uh).unwrap(), uh.to_vec());
    }

    #[test]
    fn two_dimensional_tanh_instance() {
        let w = Matrix::from_rows(&[vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 1.0, 1.0, 0.0]]).unwrap();
        let layer = FusionLayer::new(w, vec![0.1, -0.1], Activation::Tanh).unwrap();
        let out = layer.fuse(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        // Scripted: concat = [1,0,0,1]; W·concat = [2, 0]; + b = [2.1, -0.1].
        assert_eq!(out, vec![2.1f64.tanh(), (-0.1f64).tanh()]);
    }

    #[test]
    fn shape_errors() {
        assert!(FusionLayer::new(Matrix::zeros(2, 3), vec![0.0; 2], Activation::Tanh).is_err());
        assert!(FusionLayer::new(Matrix::zeros(2, 4), vec![0.0; 3], Activation::Tanh).is_err());
        assert!(selector(2, true).fuse(&[1.0], &[1.0, 2.0]).is_err());
    }
}
