use crate::corpus::{TokenId, BOS, EOS};
use crate::tensor::{Graph, ParamStore, Tensor, TensorError, Var};

use super::gru::gru_step;
use super::{ModelParams, Result};

/// Attention over the look-ahead states.
#[derive(Debug, Clone, Copy)]
pub struct Attention {
    /// Softmax weights `v`, one per step.
    pub weights: Var,
    /// Raw scores `e`; absent when attention was skipped.
    pub scores: Option<Var>,
    /// `r = Σ v_k · combined_k`.
    pub summary: Var,
}

/// Scores each projected state with `e_k = wa · tanh(projected_k)` and mixes
/// the combined (unprojected) states with the softmax of the scores.
pub fn attention(g: &mut Graph, wa: Var, projected: &[Var], combined: &[Var]) -> Result<Attention> {
    if projected.is_empty() || projected.len() != combined.len() {
        return Err(TensorError::Empty("attention").into());
    }
    let mut scores = Vec::with_capacity(projected.len());
    for &p in projected {
        let t = g.tanh(p)?;
        scores.push(g.dot(wa, t)?);
    }
    let scores = g.concat(&scores)?;
    let weights = g.softmax(scores)?;
    let summary = g.weighted_sum(weights, combined)?;
    Ok(Attention {
        weights,
        scores: Some(scores),
        summary,
    })
}

/// Vocabulary logits `E · (P · h)`.
fn logits(g: &mut Graph, ids: &ModelParams, h: Var) -> Result<Var> {
    let p = g.param(ids.output_proj);
    let e = g.param(ids.embedding);
    let ph = g.matmul(p, h)?;
    Ok(g.matmul(e, ph)?)
}

/// Teacher-forced summed NLL of `target`. The shared utterance GRU starts
/// from `context`, reads BOS, then each gold token.
pub fn decoder_nll(g: &mut Graph, ids: &ModelParams, context: Var, target: &[TokenId]) -> Result<Var> {
    let table = g.param(ids.embedding);
    let mut h = context;
    let mut x = g.row(table, BOS)?;
    let mut terms = Vec::with_capacity(target.len());
    for &y in target {
        h = gru_step(g, &ids.curr_gru, h, x)?;
        let l = logits(g, ids, h)?;
        terms.push(g.cross_entropy(l, y)?);
        x = g.row(table, y)?;
    }
    if terms.is_empty() {
        return Err(TensorError::Empty("decoder_nll").into());
    }
    Ok(g.add_n(&terms)?)
}

fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Greedy decoding: the most probable token at each step, lowest id on ties.
/// Stops after EOS; a sequence cut at `max_len` gets EOS as its last token.
pub fn decode_greedy(params: &ParamStore, ids: &ModelParams, context: &Tensor, max_len: usize) -> Result<Vec<TokenId>> {
    let mut g = Graph::inference(params);
    let table = g.param(ids.embedding);
    let mut h = g.constant(context.clone());
    let mut x = g.row(table, BOS)?;
    let mut out = Vec::new();
    while out.len() < max_len {
        h = gru_step(&mut g, &ids.curr_gru, h, x)?;
        let l = logits(&mut g, ids, h)?;
        let tok = argmax(g.value(l).data());
        out.push(tok);
        if tok == EOS {
            return Ok(out);
        }
        x = g.row(table, tok)?;
    }
    if let Some(last) = out.last_mut() {
        *last = EOS;
    } else {
        out.push(EOS);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::tests::{tiny_config, tiny_vocab};
    use super::super::{Model, ModelConfig};
    use super::*;
    use crate::tensor::softmax;

    #[test]
    fn single_state_gets_full_weight() {
        let m = Model::new(tiny_config(), tiny_vocab(), 1).unwrap();
        let mut g = Graph::inference(&m.params);
        let wa = g.param(m.ids().attention);
        let p = g.constant(Tensor::vector(vec![0.3, 0.1, -0.4, 2.0, 0.0]));
        let c = g.constant(Tensor::vector((0..10).map(|i| i as f64 * 0.1).collect()));
        let a = attention(&mut g, wa, &[p], &[c]).unwrap();
        assert_eq!(g.value(a.weights).data(), &[1.0]);
        assert_eq!(g.value(a.summary).data(), g.value(c).data());
    }

    #[test]
    fn identical_states_share_weight_equally() {
        let m = Model::new(tiny_config(), tiny_vocab(), 1).unwrap();
        let mut g = Graph::inference(&m.params);
        let wa = g.param(m.ids().attention);
        let p = g.constant(Tensor::vector(vec![0.3, 0.1, -0.4, 2.0, 0.0]));
        let c = g.constant(Tensor::vector(vec![1.0; 10]));
        let a = attention(&mut g, wa, &[p, p, p], &[c, c, c]).unwrap();
        for &w in g.value(a.weights).data() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn attention_matches_formula() {
        let m = Model::new(tiny_config(), tiny_vocab(), 4).unwrap();
        let wa_v = m.params.value(m.ids().attention).data().to_vec();
        let mut g = Graph::inference(&m.params);
        let wa = g.param(m.ids().attention);
        let ps: Vec<Vec<f64>> = (0..3).map(|k| (0..5).map(|i| ((k * 5 + i) as f64).sin()).collect()).collect();
        let cs: Vec<Vec<f64>> = (0..3).map(|k| (0..10).map(|i| ((k * 10 + i) as f64).cos()).collect()).collect();
        let pv: Vec<Var> = ps.iter().map(|p| g.constant(Tensor::vector(p.clone()))).collect();
        let cv: Vec<Var> = cs.iter().map(|c| g.constant(Tensor::vector(c.clone()))).collect();
        let a = attention(&mut g, wa, &pv, &cv).unwrap();
        let e: Vec<f64> = ps.iter().map(|p| p.iter().zip(&wa_v).map(|(x, w)| w * x.tanh()).sum()).collect();
        let v = softmax(&e);
        let r: Vec<f64> = (0..10).map(|i| (0..3).map(|k| v[k] * cs[k][i]).sum()).collect();
        for (x, y) in g.value(a.weights).data().iter().zip(&v) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in g.value(a.summary).data().iter().zip(&r) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn eos_biased_model_stops_immediately() {
        let mut m = Model::new(ModelConfig { init_scale: 0.0, ..tiny_config() }, tiny_vocab(), 0).unwrap();
        // h after one step from zero with zero weights is zero, so make the
        // logits depend only on the embedding of EOS through a constant context
        let ids = m.ids().clone();
        let table = m.params.value_mut(ids.embedding);
        table.data_mut()[EOS * 4] = 1.0;
        let proj = m.params.value_mut(ids.output_proj);
        proj.data_mut()[0] = 1.0; // P[0][0]
        let ctx = Tensor::vector(vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        // zero GRU halves the state: h = 0.5 * ctx, logit(EOS) = 0.5, all others 0
        assert_eq!(m.decode(&ctx).unwrap(), vec![EOS]);
    }

    #[test]
    fn decoding_is_deterministic_and_bounded() {
        let m = Model::new(tiny_config(), tiny_vocab(), 6).unwrap();
        let ctx = Tensor::vector(vec![0.2, -0.3, 0.9, 0.1, -0.6]);
        let a = m.decode(&ctx).unwrap();
        assert_eq!(a, m.decode(&ctx).unwrap());
        assert!(a.len() <= 6);
        assert_eq!(a.last(), Some(&EOS));
    }
}
