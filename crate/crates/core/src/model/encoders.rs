use crate::corpus::{GoalVector, TokenId, Utterance};
use crate::tensor::{Graph, Tensor, Var};

use super::gru::{gru_step, GruParams};
use super::{ModelError, ModelParams, Result};

/// Runs a GRU from the zero state over `inputs`; both directions when a
/// reverse cell is given, their final states averaged.
fn run(g: &mut Graph, fwd: &GruParams, rev: Option<&GruParams>, inputs: &[Var], d_h: usize) -> Result<Var> {
    let zero = g.constant(Tensor::zeros(&[d_h]));
    let mut h = zero;
    for &x in inputs {
        h = gru_step(g, fwd, h, x)?;
    }
    let Some(rev) = rev else { return Ok(h) };
    let mut hr = zero;
    for &x in inputs.iter().rev() {
        hr = gru_step(g, rev, hr, x)?;
    }
    let sum = g.add(h, hr)?;
    Ok(g.scale(sum, 0.5)?)
}

/// One step per goal bit, each bit a 1-dimensional input.
pub fn encode_goals(g: &mut Graph, ids: &ModelParams, goals: &GoalVector, d_h: usize) -> Result<Var> {
    let inputs: Vec<Var> = goals
        .as_f64()
        .into_iter()
        .map(|b| g.constant(Tensor::vector(vec![b])))
        .collect();
    run(g, &ids.goal_gru, ids.reverse.as_ref().map(|r| &r.goal_gru), &inputs, d_h)
}

/// One step per utterance, each utterance the mean of its token embeddings.
/// An empty history encodes to zeros.
pub fn encode_history(g: &mut Graph, ids: &ModelParams, history: &[Utterance], d_h: usize) -> Result<Var> {
    let table = g.param(ids.embedding);
    let inputs = history
        .iter()
        .map(|u| g.mean_rows(table, u.tokens()))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    run(g, &ids.hist_gru, ids.reverse.as_ref().map(|r| &r.hist_gru), &inputs, d_h)
}

/// One step per token.
pub fn encode_current(g: &mut Graph, ids: &ModelParams, tokens: &[TokenId], d_h: usize) -> Result<Var> {
    if tokens.is_empty() {
        return Err(ModelError::EmptyUtterance);
    }
    let table = g.param(ids.embedding);
    let inputs = tokens
        .iter()
        .map(|&t| g.row(table, t))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    run(g, &ids.curr_gru, ids.reverse.as_ref().map(|r| &r.curr_gru), &inputs, d_h)
}
