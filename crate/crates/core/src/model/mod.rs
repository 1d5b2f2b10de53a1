//! Encoders, look-ahead module, attention, decoder and completion classifier.
//!
//! All computation is expressed on a [`Graph`], so the same code serves
//! training (recording graphs) and inference ([`Graph::inference`]).

mod decoder;
mod encoders;
mod gru;
mod lookahead;

pub use decoder::{attention, decode_greedy, decoder_nll, Attention};
pub use gru::{gru_step, GruParams};
pub use lookahead::{backward_sweep, combine, forward_sweep};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{GoalVector, TokenId, Utterance, Vocabulary};
use crate::tensor::{Graph, ParamGroup, ParamId, ParamStore, Tensor, TensorError, Var};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("utterance is empty")]
    EmptyUtterance,
    #[error("goal vector has {got} bits, model expects {expected}")]
    GoalLength { expected: usize, got: usize },
    #[error("invalid model config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

fn default_embed_dim() -> usize {
    64
}
fn default_goal_hidden() -> usize {
    64
}
fn default_hidden() -> usize {
    256
}
fn default_k() -> usize {
    3
}
fn default_goal_bits() -> usize {
    6
}
fn default_max_decode_len() -> usize {
    30
}
fn default_true() -> bool {
    true
}
fn default_init_scale() -> f64 {
    0.1
}

/// Architecture hyperparameters. Field names double as config-file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_embed_dim")]
    pub embed_dim: usize,
    #[serde(default = "default_goal_hidden")]
    pub goal_hidden: usize,
    /// Hidden size of the utterance encoders, look-ahead GRU and decoder.
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    #[serde(default = "default_k")]
    pub lookahead_k: usize,
    #[serde(default = "default_goal_bits")]
    pub goal_bits: usize,
    #[serde(default = "default_max_decode_len")]
    pub max_decode_len: usize,
    /// `false` skips the look-ahead module and attention entirely.
    #[serde(default = "default_true")]
    pub use_lookahead: bool,
    /// Adds reverse-direction encoders whose final states are averaged in.
    #[serde(default)]
    pub bidirectional: bool,
    /// Weights are drawn from U(-init_scale, init_scale); biases start at zero.
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            embed_dim: default_embed_dim(),
            goal_hidden: default_goal_hidden(),
            hidden: default_hidden(),
            lookahead_k: default_k(),
            goal_bits: default_goal_bits(),
            max_decode_len: default_max_decode_len(),
            use_lookahead: true,
            bidirectional: false,
            init_scale: default_init_scale(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("embed_dim", self.embed_dim),
            ("goal_hidden", self.goal_hidden),
            ("hidden", self.hidden),
            ("lookahead_k", self.lookahead_k),
            ("goal_bits", self.goal_bits),
            ("max_decode_len", self.max_decode_len),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(ModelError::Config(format!("{name} must be positive")));
            }
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(ModelError::Config("init_scale must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Length of the concatenated encoder output.
    pub fn encoder_dim(&self) -> usize {
        self.goal_hidden + 2 * self.hidden
    }

    /// Look-ahead horizon actually used by the forward path.
    pub fn effective_k(&self) -> usize {
        if self.use_lookahead {
            self.lookahead_k
        } else {
            1
        }
    }
}

/// Handles to every parameter, grouped as the architecture uses them.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub embedding: ParamId,
    pub goal_gru: GruParams,
    pub hist_gru: GruParams,
    pub curr_gru: GruParams,
    pub reverse: Option<ReverseEncoders>,
    pub adapter_weight: ParamId,
    pub adapter_bias: ParamId,
    pub lookahead_gru: GruParams,
    pub lookahead_proj: ParamId,
    pub attention: ParamId,
    pub r_adapter_weight: ParamId,
    pub r_adapter_bias: ParamId,
    pub output_proj: ParamId,
    pub classifier_weight: ParamId,
    pub classifier_bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct ReverseEncoders {
    pub goal_gru: GruParams,
    pub hist_gru: GruParams,
    pub curr_gru: GruParams,
}

type LayoutEntry = (String, ParamGroup, Vec<usize>);

fn gru_layout(out: &mut Vec<LayoutEntry>, prefix: &str, group: ParamGroup, d_in: usize, d_h: usize) {
    for gate in ["z", "r", "h"] {
        out.push((format!("{prefix}.w_{gate}"), group, vec![d_h, d_in]));
        out.push((format!("{prefix}.u_{gate}"), group, vec![d_h, d_h]));
        out.push((format!("{prefix}.b_{gate}"), group, vec![d_h]));
    }
}

/// Parameter names, groups and shapes in creation order.
pub fn parameter_layout(config: &ModelConfig, vocab_size: usize) -> Vec<LayoutEntry> {
    use ParamGroup::{Classifier, LanguageModel, Lookahead};
    let (de, gh, h) = (config.embed_dim, config.goal_hidden, config.hidden);
    let mut out: Vec<LayoutEntry> = vec![("embedding".into(), LanguageModel, vec![vocab_size, de])];
    gru_layout(&mut out, "goal_gru", Lookahead, 1, gh);
    gru_layout(&mut out, "hist_gru", Lookahead, de, h);
    gru_layout(&mut out, "curr_gru", LanguageModel, de, h);
    if config.bidirectional {
        gru_layout(&mut out, "goal_gru_rev", Lookahead, 1, gh);
        gru_layout(&mut out, "hist_gru_rev", Lookahead, de, h);
        gru_layout(&mut out, "curr_gru_rev", Lookahead, de, h);
    }
    out.push(("adapter.weight".into(), Lookahead, vec![h, config.encoder_dim()]));
    out.push(("adapter.bias".into(), Lookahead, vec![h]));
    gru_layout(&mut out, "lookahead_gru", Lookahead, h, h);
    out.push(("lookahead_proj".into(), Lookahead, vec![h, 2 * h]));
    out.push(("attention".into(), Lookahead, vec![h]));
    out.push(("r_adapter.weight".into(), Lookahead, vec![h, 2 * h]));
    out.push(("r_adapter.bias".into(), Lookahead, vec![h]));
    out.push(("output_proj".into(), LanguageModel, vec![de, h]));
    out.push(("classifier.weight".into(), Classifier, vec![2 * h]));
    out.push(("classifier.bias".into(), Classifier, vec![1]));
    out
}

impl ModelParams {
    fn resolve(store: &ParamStore, bidirectional: bool) -> Result<Self> {
        let id = |n: &str| store.id(n).map_err(ModelError::from);
        let gru = |p: &str| GruParams::resolve(store, p);
        Ok(Self {
            embedding: id("embedding")?,
            goal_gru: gru("goal_gru")?,
            hist_gru: gru("hist_gru")?,
            curr_gru: gru("curr_gru")?,
            reverse: if bidirectional {
                Some(ReverseEncoders {
                    goal_gru: gru("goal_gru_rev")?,
                    hist_gru: gru("hist_gru_rev")?,
                    curr_gru: gru("curr_gru_rev")?,
                })
            } else {
                None
            },
            adapter_weight: id("adapter.weight")?,
            adapter_bias: id("adapter.bias")?,
            lookahead_gru: gru("lookahead_gru")?,
            lookahead_proj: id("lookahead_proj")?,
            attention: id("attention")?,
            r_adapter_weight: id("r_adapter.weight")?,
            r_adapter_bias: id("r_adapter.bias")?,
            output_proj: id("output_proj")?,
            classifier_weight: id("classifier.weight")?,
            classifier_bias: id("classifier.bias")?,
        })
    }
}

/// Parameters, vocabulary and configuration of one dialogue agent.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ParamStore,
    ids: ModelParams,
}

/// Values produced by one encoder + look-ahead pass.
#[derive(Debug, Clone)]
pub struct ContextStates {
    /// Concatenated encoder output.
    pub encoded: Var,
    /// Adapted encoder output; the first forward look-ahead state.
    pub h1: Var,
    pub forward: Vec<Var>,
    pub backward: Vec<Var>,
    /// `[forward_k; backward_k]` per step.
    pub combined: Vec<Var>,
    /// Projection of each combined state; seeds the k-th future decoder.
    pub projected: Vec<Var>,
    pub attention: Attention,
    /// Decoder seed for the real next utterance.
    pub context: Var,
}

impl Model {
    /// Fresh model with seeded uniform initialization.
    pub fn new(config: ModelConfig, vocab: Vocabulary, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new_inclusive(-config.init_scale, config.init_scale);
        let mut store = ParamStore::new();
        for (name, group, shape) in parameter_layout(&config, vocab.len()) {
            let len: usize = shape.iter().product();
            let is_bias = name.contains(".b_") || name.ends_with(".bias");
            let data = if is_bias || config.init_scale == 0.0 {
                vec![0.0; len]
            } else {
                (0..len).map(|_| dist.sample(&mut rng)).collect()
            };
            store.insert(&name, group, Tensor::new(shape, data)?)?;
        }
        Self::from_parts(config, vocab, store)
    }

    /// Wraps an existing parameter store, checking names and shapes.
    pub fn from_parts(config: ModelConfig, vocab: Vocabulary, params: ParamStore) -> Result<Self> {
        config.validate()?;
        let layout = parameter_layout(&config, vocab.len());
        if layout.len() != params.len() {
            return Err(ModelError::Config(format!(
                "expected {} parameters, found {}",
                layout.len(),
                params.len()
            )));
        }
        for ((name, _, shape), (_, p)) in layout.iter().zip(params.iter()) {
            if *name != p.name {
                return Err(ModelError::Config(format!("expected parameter `{name}`, found `{}`", p.name)));
            }
            if shape.as_slice() != p.value.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "parameter",
                    left: shape.clone(),
                    right: p.value.shape().to_vec(),
                }
                .into());
            }
        }
        let ids = ModelParams::resolve(&params, config.bidirectional)?;
        Ok(Self {
            config,
            vocab,
            params,
            ids,
        })
    }

    pub fn ids(&self) -> &ModelParams {
        &self.ids
    }

    pub fn hidden(&self) -> usize {
        self.config.hidden
    }

    fn check_goals(&self, goals: &GoalVector) -> Result<()> {
        if goals.len() != self.config.goal_bits {
            return Err(ModelError::GoalLength {
                expected: self.config.goal_bits,
                got: goals.len(),
            });
        }
        Ok(())
    }

    pub fn encode_goals(&self, g: &mut Graph, goals: &GoalVector) -> Result<Var> {
        self.check_goals(goals)?;
        encoders::encode_goals(g, &self.ids, goals, self.config.goal_hidden)
    }

    pub fn encode_history(&self, g: &mut Graph, history: &[Utterance]) -> Result<Var> {
        encoders::encode_history(g, &self.ids, history, self.config.hidden)
    }

    pub fn encode_current(&self, g: &mut Graph, tokens: &[TokenId]) -> Result<Var> {
        encoders::encode_current(g, &self.ids, tokens, self.config.hidden)
    }

    /// `[h_goal; h_history; h_current]`.
    pub fn encode_sample(&self, g: &mut Graph, goals: &GoalVector, history: &[Utterance], current: &Utterance) -> Result<Var> {
        let hg = self.encode_goals(g, goals)?;
        let hu = self.encode_history(g, history)?;
        let hc = self.encode_current(g, current.tokens())?;
        Ok(g.concat(&[hg, hu, hc])?)
    }

    /// Encoders, look-ahead sweeps, attention and the response context.
    pub fn context_states(&self, g: &mut Graph, goals: &GoalVector, history: &[Utterance], current: &Utterance) -> Result<ContextStates> {
        let encoded = self.encode_sample(g, goals, history, current)?;
        let aw = g.param(self.ids.adapter_weight);
        let ab = g.param(self.ids.adapter_bias);
        let h1 = g.matmul(aw, encoded)?;
        let h1 = g.add(h1, ab)?;
        let rw = g.param(self.ids.r_adapter_weight);
        let rb = g.param(self.ids.r_adapter_bias);
        if !self.config.use_lookahead {
            let combined = g.concat(&[h1, h1])?;
            let context = g.matmul(rw, combined)?;
            let context = g.add(context, rb)?;
            let weights = g.constant(Tensor::vector(vec![1.0]));
            return Ok(ContextStates {
                encoded,
                h1,
                forward: vec![h1],
                backward: vec![h1],
                combined: vec![combined],
                projected: Vec::new(),
                attention: Attention {
                    weights,
                    scores: None,
                    summary: combined,
                },
                context,
            });
        }
        let k = self.config.lookahead_k;
        let proj = g.param(self.ids.lookahead_proj);
        let forward = forward_sweep(g, &self.ids.lookahead_gru, proj, h1, k)?;
        let backward = backward_sweep(g, &self.ids.lookahead_gru, proj, &forward)?;
        let combined = combine(g, &forward, &backward)?;
        let projected = combined
            .iter()
            .map(|&c| g.matmul(proj, c))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let wa = g.param(self.ids.attention);
        let attention = attention(g, wa, &projected, &combined)?;
        let context = g.matmul(rw, attention.summary)?;
        let context = g.add(context, rb)?;
        Ok(ContextStates {
            encoded,
            h1,
            forward,
            backward,
            combined,
            projected,
            attention,
            context,
        })
    }

    /// Summed token NLL of `target` given a decoder seed.
    pub fn decoder_nll(&self, g: &mut Graph, context: Var, target: &[TokenId]) -> Result<Var> {
        decoder_nll(g, &self.ids, context, target)
    }

    /// Greedy decoding from a decoder seed; always ends in EOS.
    pub fn decode(&self, context: &Tensor) -> Result<Vec<TokenId>> {
        decode_greedy(&self.params, &self.ids, context, self.config.max_decode_len)
    }

    /// Logit of the completion classifier on (current, next) utterances.
    pub fn completion_logit(&self, g: &mut Graph, current: &[TokenId], next: &[TokenId]) -> Result<Var> {
        let a = self.encode_current(g, current)?;
        let b = self.encode_current(g, next)?;
        let both = g.concat(&[a, b])?;
        let w = g.param(self.ids.classifier_weight);
        let bias = g.param(self.ids.classifier_bias);
        let s = g.dot(w, both)?;
        Ok(g.add(s, bias)?)
    }

    pub fn completion_probability(&self, current: &[TokenId], next: &[TokenId]) -> Result<f64> {
        let mut g = Graph::inference(&self.params);
        let logit = self.completion_logit(&mut g, current, next)?;
        Ok(crate::tensor::sigmoid(g.value(logit).item()))
    }

    /// Next utterance for the side holding `goals`, plus the classifier's
    /// belief that the dialogue ends with goals achieved.
    pub fn respond(&self, goals: &GoalVector, history: &[Utterance], current: &Utterance) -> Result<(Vec<TokenId>, f64)> {
        let mut g = Graph::inference(&self.params);
        let states = self.context_states(&mut g, goals, history, current)?;
        let tokens = self.decode(g.value(states.context))?;
        let p = self.completion_probability(current.tokens(), &tokens)?;
        Ok((tokens, p))
    }
}
