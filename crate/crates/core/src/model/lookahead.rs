use crate::tensor::{Graph, Tensor, TensorError, Var};

use super::gru::{gru_step, GruParams};
use super::Result;

/// Forward states `h_1..h_K`. `h_1` is given; each later state advances the
/// shared GRU with input `W · [h_{k-1}; 0]`, the backward half being unknown
/// during this sweep.
pub fn forward_sweep(g: &mut Graph, cell: &GruParams, proj: Var, h1: Var, k: usize) -> Result<Vec<Var>> {
    let d_h = g.shape(h1)[0];
    let zero = g.constant(Tensor::zeros(&[d_h]));
    let mut states = vec![h1];
    for _ in 1..k {
        let prev = *states.last().expect("nonempty");
        let joined = g.concat(&[prev, zero])?;
        let input = g.matmul(proj, joined)?;
        states.push(gru_step(g, cell, prev, input)?);
    }
    Ok(states)
}

/// Backward states, starting from the last forward state and stepping the
/// same GRU towards k = 1 with input `W · [fwd_{k+1}; bwd_{k+1}]`.
pub fn backward_sweep(g: &mut Graph, cell: &GruParams, proj: Var, forward: &[Var]) -> Result<Vec<Var>> {
    let k = forward.len();
    let mut states = vec![*forward.last().ok_or(TensorError::Empty("backward_sweep"))?; k];
    for i in (0..k - 1).rev() {
        let next = states[i + 1];
        let joined = g.concat(&[forward[i + 1], next])?;
        let input = g.matmul(proj, joined)?;
        states[i] = gru_step(g, cell, next, input)?;
    }
    Ok(states)
}

/// `[forward_k; backward_k]` for each step.
pub fn combine(g: &mut Graph, forward: &[Var], backward: &[Var]) -> Result<Vec<Var>> {
    if forward.len() != backward.len() {
        return Err(TensorError::ShapeMismatch {
            op: "combine",
            left: vec![forward.len()],
            right: vec![backward.len()],
        }
        .into());
    }
    forward
        .iter()
        .zip(backward)
        .map(|(&f, &b)| g.concat(&[f, b]).map_err(Into::into))
        .collect()
}
