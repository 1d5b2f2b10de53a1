use crate::tensor::{Gradients, ParamStore};

use super::{Result, TrainError};

/// SGD with heavy-ball momentum and global L2-norm clipping.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    pub clip_norm: f64,
    velocity: Vec<Option<Vec<f64>>>,
}

impl Sgd {
    pub fn new(num_params: usize, lr: f64, momentum: f64, clip_norm: f64) -> Self {
        Self {
            lr,
            momentum,
            clip_norm,
            velocity: vec![None; num_params],
        }
    }

    pub fn velocity(&self, index: usize) -> Option<&[f64]> {
        self.velocity.get(index)?.as_deref()
    }

    /// Clips `grads` to `clip_norm` as a whole, then for every parameter that
    /// has a gradient: `v ← μ·v + g`, `p ← p − lr·v`. Returns the norm before
    /// clipping. Parameters without a gradient are left alone.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Gradients) -> Result<f64> {
        for (id, g) in grads.iter() {
            if g.iter().any(|x| !x.is_finite()) {
                return Err(TrainError::NonFiniteGradient(params.get(id).name.clone()));
            }
        }
        let norm = grads.l2_norm();
        let scale = if self.clip_norm > 0.0 && norm > self.clip_norm {
            self.clip_norm / norm
        } else {
            1.0
        };
        for (id, g) in grads.iter() {
            let v = self.velocity[id.index()].get_or_insert_with(|| vec![0.0; g.len()]);
            let p = params.value_mut(id).data_mut();
            for ((vi, gi), pi) in v.iter_mut().zip(g).zip(p.iter_mut()) {
                *vi = self.momentum * *vi + scale * gi;
                *pi -= self.lr * *vi;
            }
        }
        Ok(norm)
    }
}
