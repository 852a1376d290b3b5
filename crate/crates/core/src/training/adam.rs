use crate::error::{bail, Result};
use crate::numerics::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with bias correction: `θ ← θ − lr · m̂ / (√v̂ + ε)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(learning_rate: f64, sizes: &[usize]) -> Self {
        Self {
            learning_rate,
            t: 0,
            m: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    /// Updates every tensor in place. A non-finite result is a numeric error and leaves
    /// the parameters untouched.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            bail!(Dimension, "optimizer tracks {} tensors, got {} params and {} grads", self.m.len(), params.len(), grads.len());
        }
        let t = self.t + 1;
        let c1 = 1.0 - BETA1.powf(t as f64);
        let c2 = 1.0 - BETA2.powf(t as f64);
        let mut m = self.m.clone();
        let mut v = self.v.clone();
        let mut updated = Vec::with_capacity(params.len());
        for (k, p) in params.iter().enumerate() {
            let g = &grads[k];
            if g.len() != p.len() || m[k].len() != p.len() {
                bail!(Dimension, "gradient {k} has {} entries for a tensor of {}", g.len(), p.len());
            }
            let mut data = p.data().to_vec();
            for i in 0..data.len() {
                m[k][i] = BETA1 * m[k][i] + (1.0 - BETA1) * g[i];
                v[k][i] = BETA2 * v[k][i] + (1.0 - BETA2) * g[i] * g[i];
                let mhat = m[k][i] / c1;
                let vhat = v[k][i] / c2;
                data[i] -= self.learning_rate * mhat / (vhat.sqrt() + EPSILON);
            }
            updated.push(Tensor::new(p.shape().to_vec(), data)?);
        }
        for (p, new) in params.iter_mut().zip(updated) {
            **p = new;
        }
        self.m = m;
        self.v = v;
        self.t = t;
        Ok(())
    }
}
