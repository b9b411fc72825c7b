//! Gated recurrent unit with hand-written backward pass.
//!
//! ```text
//! z  = σ(W_z x + U_z h + b_z)
//! r  = σ(W_r x + U_r h + b_r)
//! n  = tanh(W_n x + r ⊙ (U_n h) + b_n)
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```

use rand::Rng;

use crate::linalg::{axpy, sigmoid, Matrix};
use crate::ShapeError;

#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_z: Matrix,
    pub w_r: Matrix,
    pub w_n: Matrix,
    pub u_z: Matrix,
    pub u_r: Matrix,
    pub u_n: Matrix,
    pub b_z: Vec<f64>,
    pub b_r: Vec<f64>,
    pub b_n: Vec<f64>,
}

/// Values of one step needed to back-propagate through it.
#[derive(Debug, Clone)]
pub struct GruCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub z: Vec<f64>,
    pub r: Vec<f64>,
    pub n: Vec<f64>,
    /// `U_n h_prev`, before the reset gate.
    pub un_h: Vec<f64>,
    pub h: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        let w = || Matrix::zeros(hidden_dim, input_dim);
        let u = || Matrix::zeros(hidden_dim, hidden_dim);
        Self {
            w_z: w(),
            w_r: w(),
            w_n: w(),
            u_z: u(),
            u_r: u(),
            u_n: u(),
            b_z: vec![0.0; hidden_dim],
            b_r: vec![0.0; hidden_dim],
            b_n: vec![0.0; hidden_dim],
        }
    }

    /// Uniform `[-bound, bound]` for every matrix and bias.
    pub fn uniform<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, bound: f64, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden_dim);
        for t in p.tensors_mut() {
            for v in t {
                *v = rng.random_range(-bound..=bound);
            }
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_z.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_z.rows()
    }

    /// The nine tensors in fixed order: `W_z, W_r, W_n, U_z, U_r, U_n, b_z, b_r, b_n`.
    pub fn tensors(&self) -> [&[f64]; 9] {
        [
            self.w_z.as_slice(),
            self.w_r.as_slice(),
            self.w_n.as_slice(),
            self.u_z.as_slice(),
            self.u_r.as_slice(),
            self.u_n.as_slice(),
            &self.b_z,
            &self.b_r,
            &self.b_n,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.w_z.as_mut_slice(),
            self.w_r.as_mut_slice(),
            self.w_n.as_mut_slice(),
            self.u_z.as_mut_slice(),
            self.u_r.as_mut_slice(),
            self.u_n.as_mut_slice(),
            &mut self.b_z,
            &mut self.b_r,
            &mut self.b_n,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    pub fn load_flat(&mut self, flat: &[f64]) {
        let mut off = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[off..off + t.len()]);
            off += t.len();
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn add_scaled(&mut self, alpha: f64, other: &GruParams) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            axpy(alpha, src, dst);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }

    pub fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= alpha;
            }
        }
    }

    fn check(&self, x: &[f64], h_prev: &[f64]) -> Result<(), ShapeError> {
        if x.len() != self.input_dim() {
            return Err(ShapeError::new("GRU input", self.input_dim(), x.len()));
        }
        if h_prev.len() != self.hidden_dim() {
            return Err(ShapeError::new("GRU hidden state", self.hidden_dim(), h_prev.len()));
        }
        Ok(())
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, ShapeError> {
        Ok(self.step_cached(x, h_prev)?.h)
    }

    pub fn step_cached(&self, x: &[f64], h_prev: &[f64]) -> Result<GruCache, ShapeError> {
        self.check(x, h_prev)?;
        let gate = |w: &Matrix, u: &Matrix, b: &[f64]| -> Vec<f64> {
            let wx = w.matvec(x).expect("checked");
            let uh = u.matvec(h_prev).expect("checked");
            wx.iter()
                .zip(&uh)
                .zip(b)
                .map(|((a, c), d)| sigmoid(a + c + d))
                .collect()
        };
        let z = gate(&self.w_z, &self.u_z, &self.b_z);
        let r = gate(&self.w_r, &self.u_r, &self.b_r);
        let un_h = self.u_n.matvec(h_prev)?;
        let wn_x = self.w_n.matvec(x)?;
        let n: Vec<f64> = (0..self.hidden_dim())
            .map(|i| (wn_x[i] + r[i] * un_h[i] + self.b_n[i]).tanh())
            .collect();
        let h: Vec<f64> = (0..self.hidden_dim())
            .map(|i| (1.0 - z[i]) * n[i] + z[i] * h_prev[i])
            .collect();
        Ok(GruCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            z,
            r,
            n,
            un_h,
            h,
        })
    }

    /// Back-propagates `dh` (gradient w.r.t. the step output). Accumulates parameter
    /// gradients into `grads`; returns `(dx, dh_prev)`, with `dx` only when `need_dx`.
    pub fn backward(
        &self,
        cache: &GruCache,
        dh: &[f64],
        grads: &mut GruParams,
        need_dx: bool,
    ) -> (Option<Vec<f64>>, Vec<f64>) {
        let hd = self.hidden_dim();
        let mut da_z = vec![0.0; hd];
        let mut da_r = vec![0.0; hd];
        let mut da_n = vec![0.0; hd];
        let mut dm = vec![0.0; hd];
        let mut dh_prev = vec![0.0; hd];
        for i in 0..hd {
            let (z, r, n) = (cache.z[i], cache.r[i], cache.n[i]);
            let dn = dh[i] * (1.0 - z);
            let dz = dh[i] * (cache.h_prev[i] - n);
            dh_prev[i] = dh[i] * z;
            da_n[i] = dn * (1.0 - n * n);
            let dr = da_n[i] * cache.un_h[i];
            dm[i] = da_n[i] * r;
            da_r[i] = dr * r * (1.0 - r);
            da_z[i] = dz * z * (1.0 - z);
        }
        grads.w_z.add_outer(1.0, &da_z, &cache.x);
        grads.w_r.add_outer(1.0, &da_r, &cache.x);
        grads.w_n.add_outer(1.0, &da_n, &cache.x);
        grads.u_z.add_outer(1.0, &da_z, &cache.h_prev);
        grads.u_r.add_outer(1.0, &da_r, &cache.h_prev);
        grads.u_n.add_outer(1.0, &dm, &cache.h_prev);
        axpy(1.0, &da_z, &mut grads.b_z);
        axpy(1.0, &da_r, &mut grads.b_r);
        axpy(1.0, &da_n, &mut grads.b_n);
        for (u, d) in [(&self.u_z, &da_z), (&self.u_r, &da_r), (&self.u_n, &dm)] {
            axpy(1.0, &u.matvec_t(d).expect("checked"), &mut dh_prev);
        }
        let dx = need_dx.then(|| {
            let mut dx = vec![0.0; self.input_dim()];
            for (w, d) in [(&self.w_z, &da_z), (&self.w_r, &da_r), (&self.w_n, &da_n)] {
                axpy(1.0, &w.matvec_t(d).expect("checked"), &mut dx);
            }
            dx
        });
        (dx, dh_prev)
    }
}

/// One recurrence step; see [`GruParams::step`].
pub fn gru_step(p: &GruParams, x: &[f64], h_prev: &[f64]) -> Result<Vec<f64>, ShapeError> {
    p.step(x, h_prev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_zero_state_stay_zero() {
        let p = GruParams::zeros(3, 2);
        assert_eq!(gru_step(&p, &[1.0, -2.0, 5.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn zero_params_halve_the_state() {
        let p = GruParams::zeros(2, 3);
        let h = gru_step(&p, &[0.7, 0.1], &[0.8, -0.4, 0.2]).unwrap();
        assert_eq!(h, vec![0.4, -0.2, 0.1]);
    }

    /// Independent scalar-loop evaluation of the recurrence.
    #[allow(clippy::needless_range_loop)]
    fn scripted_step(p: &GruParams, x: &[f64], h: &[f64]) -> Vec<f64> {
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let (e, hd) = (x.len(), h.len());
        let lin = |w: &Matrix, u: Option<&Matrix>, i: usize| {
            let mut s = 0.0;
            for j in 0..e {
                s += w.get(i, j) * x[j];
            }
            if let Some(u) = u {
                for j in 0..hd {
                    s += u.get(i, j) * h[j];
                }
            }
            s
        };
        (0..hd)
            .map(|i| {
                let z = sig(lin(&p.w_z, Some(&p.u_z), i) + p.b_z[i]);
                let r = sig(lin(&p.w_r, Some(&p.u_r), i) + p.b_r[i]);
                let mut unh = 0.0;
                for j in 0..hd {
                    unh += p.u_n.get(i, j) * h[j];
                }
                let n = (lin(&p.w_n, None, i) + r * unh + p.b_n[i]).tanh();
                (1.0 - z) * n + z * h[i]
            })
            .collect()
    }

    #[test]
    fn two_by_two_matches_scripted_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let p = GruParams::uniform(2, 2, 0.8, &mut rng);
        for (x, h) in [([0.5, -1.0], [0.0, 0.0]), ([0.1, 0.3], [0.4, -0.6])] {
            let out = gru_step(&p, &x, &h).unwrap();
            let oracle = scripted_step(&p, &x, &h);
            for (a, b) in out.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-14, "{out:?} vs {oracle:?}");
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let p = GruParams::zeros(2, 3);
        assert!(gru_step(&p, &[1.0], &[0.0; 3]).is_err());
        assert!(gru_step(&p, &[1.0, 2.0], &[0.0; 2]).is_err());
    }

    #[test]
    fn flatten_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = GruParams::uniform(3, 2, 1.0, &mut rng);
        let mut q = GruParams::zeros(3, 2);
        q.load_flat(&p.flatten());
        assert_eq!(p, q);
        assert_eq!(p.param_count(), 3 * 2 * 3 + 3 * 4 + 3 * 2);
    }
}
