//! Joint loss, the alternating E/M schedule and the training loop.

mod optimizer;

pub use optimizer::Sgd;

use std::io::Write;

use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{prepare_samples, DialogueSession, EncodedSession, TokenId, TrainingSample, Vocabulary};
use crate::model::{Model, ModelConfig, ModelError};
use crate::tensor::{Gradients, Graph, ParamGroup, Tensor, TensorError, Var};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("non-finite gradient for `{0}`")]
    NonFiniteGradient(String),
    #[error("no training samples")]
    NoSamples,
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<TensorError> for TrainError {
    fn from(e: TensorError) -> Self {
        TrainError::Model(e.into())
    }
}

pub type Result<T> = std::result::Result<T, TrainError>;

/// When the learning rate starts halving.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayFrom {
    /// Halve after every epoch that does not improve the best validation loss.
    #[default]
    Best,
    /// Constant rate for `epochs`, then `decay_epochs` more epochs, halving each.
    Last,
}

fn d_alpha() -> f64 {
    0.05
}
fn d_beta() -> f64 {
    1.0
}
fn d_lr() -> f64 {
    1.0
}
fn d_momentum() -> f64 {
    0.1
}
fn d_clip() -> f64 {
    0.5
}
fn d_batch() -> usize {
    32
}
fn d_epochs() -> usize {
    400
}
fn d_true() -> bool {
    true
}
fn d_min_count() -> usize {
    5
}
fn d_val() -> f64 {
    0.1
}

/// Every knob of a training run. Serialized flat, so a config file is a
/// single table of these field names plus the model fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(flatten)]
    pub model: ModelConfig,
    /// Weight of the look-ahead prediction term.
    #[serde(default = "d_alpha")]
    pub alpha: f64,
    /// Weight of the completion-state term.
    #[serde(default = "d_beta")]
    pub beta: f64,
    #[serde(default = "d_lr")]
    pub lr: f64,
    #[serde(default = "d_momentum")]
    pub momentum: f64,
    #[serde(default = "d_clip")]
    pub clip_norm: f64,
    #[serde(default = "d_batch")]
    pub batch_size: usize,
    #[serde(default = "d_epochs")]
    pub epochs: usize,
    /// Extra halving epochs under `decay_from = last`.
    #[serde(default)]
    pub decay_epochs: usize,
    #[serde(default)]
    pub decay_from: DecayFrom,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "d_true")]
    pub use_state_loss: bool,
    /// Tokens seen fewer times in training data become `<unk>`.
    #[serde(default = "d_min_count")]
    pub min_count: usize,
    #[serde(default = "d_val")]
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            alpha: d_alpha(),
            beta: d_beta(),
            lr: d_lr(),
            momentum: d_momentum(),
            clip_norm: d_clip(),
            batch_size: d_batch(),
            epochs: d_epochs(),
            decay_epochs: 0,
            decay_from: DecayFrom::Best,
            seed: 0,
            use_state_loss: true,
            min_count: d_min_count(),
            val_fraction: d_val(),
        }
    }
}

/// The four model variants compared in experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Encoder-decoder with goals, no look-ahead, no state term.
    Seq2SeqGoal,
    GoalState,
    GoalLook,
    Full,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Seq2SeqGoal, Variant::GoalState, Variant::GoalLook, Variant::Full];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Seq2SeqGoal => "seq2seq_goal",
            Variant::GoalState => "goal_state",
            Variant::GoalLook => "goal_look",
            Variant::Full => "full",
        }
    }

    pub fn apply(self, config: &TrainConfig) -> TrainConfig {
        let mut c = config.clone();
        let (look, state) = match self {
            Variant::Seq2SeqGoal => (false, false),
            Variant::GoalState => (false, true),
            Variant::GoalLook => (true, false),
            Variant::Full => (true, true),
        };
        c.model.use_lookahead = look;
        c.use_state_loss = state;
        c
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        let checks = [
            (self.alpha >= 0.0 && self.alpha.is_finite(), "alpha must be >= 0"),
            (self.beta >= 0.0 && self.beta.is_finite(), "beta must be >= 0"),
            (self.lr > 0.0 && self.lr.is_finite(), "lr must be > 0"),
            ((0.0..1.0).contains(&self.momentum), "momentum must be in [0, 1)"),
            (self.clip_norm >= 0.0, "clip_norm must be >= 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.epochs >= 1, "epochs must be >= 1"),
            ((0.0..1.0).contains(&self.val_fraction), "val_fraction must be in [0, 1)"),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(TrainError::Config(msg.into()));
            }
        }
        Ok(())
    }

    /// Look-ahead weight actually applied.
    pub fn effective_alpha(&self) -> f64 {
        if self.model.use_lookahead {
            self.alpha
        } else {
            0.0
        }
    }

    /// State weight actually applied.
    pub fn effective_beta(&self) -> f64 {
        if self.use_state_loss {
            self.beta
        } else {
            0.0
        }
    }
}

/// Per-term values of the joint loss for one sample.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Unconditioned NLL of the current utterance plus NLL of the real next
    /// utterance given the response context.
    pub lm: f64,
    /// Summed NLL of the real future turns given their look-ahead states.
    pub lookahead: f64,
    /// Cross-entropy of the completion classifier against the session label.
    pub state: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn add(&mut self, o: &LossBreakdown) {
        self.lm += o.lm;
        self.lookahead += o.lookahead;
        self.state += o.state;
        self.total += o.total;
    }

    fn scaled(mut self, f: f64) -> Self {
        self.lm *= f;
        self.lookahead *= f;
        self.state *= f;
        self.total *= f;
        self
    }
}

struct LossVars {
    lm: Var,
    lookahead: Option<Var>,
    state: Option<Var>,
    total: Var,
}

fn zero_context(g: &mut Graph, model: &Model) -> Var {
    g.constant(Tensor::zeros(&[model.hidden()]))
}

/// Builds the whole joint loss on `g`. `generated` is the greedy next
/// utterance fed to the classifier; it is an input, not differentiated.
fn loss_vars(g: &mut Graph, model: &Model, sample: &TrainingSample, config: &TrainConfig, generated: &[TokenId]) -> Result<LossVars> {
    let zero = zero_context(g, model);
    let mut lm = model.decoder_nll(g, zero, sample.current.tokens())?;
    let states = model.context_states(g, &sample.goals, &sample.history, &sample.current)?;
    if let Some(next) = sample.next_turn() {
        let r = model.decoder_nll(g, states.context, next.tokens())?;
        lm = g.add(lm, r)?;
    }
    let mut terms = Vec::new();
    let alpha = config.effective_alpha();
    if alpha > 0.0 {
        for (k, &ctx) in states.projected.iter().enumerate() {
            if sample.future_mask[k] {
                terms.push(model.decoder_nll(g, ctx, sample.future[k].tokens())?);
            }
        }
    }
    let lookahead = if terms.is_empty() { None } else { Some(g.add_n(&terms)?) };
    let beta = config.effective_beta();
    let state = if beta > 0.0 {
        let logit = model.completion_logit(g, sample.current.tokens(), generated)?;
        Some(g.bce_with_logits(logit, sample.label as f64)?)
    } else {
        None
    };
    let mut parts = vec![lm];
    if let Some(la) = lookahead {
        parts.push(g.scale(la, alpha)?);
    }
    if let Some(s) = state {
        parts.push(g.scale(s, beta)?);
    }
    let total = g.add_n(&parts)?;
    Ok(LossVars {
        lm,
        lookahead,
        state,
        total,
    })
}

fn breakdown(g: &Graph, v: &LossVars) -> LossBreakdown {
    let val = |x: Option<Var>| x.map(|x| g.value(x).item()).unwrap_or(0.0);
    LossBreakdown {
        lm: g.value(v.lm).item(),
        lookahead: val(v.lookahead),
        state: val(v.state),
        total: g.value(v.total).item(),
    }
}

/// The next utterance the model would say for this sample.
pub fn generate_next(model: &Model, sample: &TrainingSample) -> Result<Vec<TokenId>> {
    let mut g = Graph::inference(&model.params);
    let states = model.context_states(&mut g, &sample.goals, &sample.history, &sample.current)?;
    Ok(model.decode(g.value(states.context))?)
}

/// Joint loss of one sample with its per-term breakdown.
pub fn compute_loss(model: &Model, sample: &TrainingSample, config: &TrainConfig) -> Result<LossBreakdown> {
    let generated = if config.effective_beta() > 0.0 {
        generate_next(model, sample)?
    } else {
        Vec::new()
    };
    loss_with_generated(model, sample, config, &generated)
}

/// Joint loss with the classifier's next-utterance input given.
pub fn loss_with_generated(model: &Model, sample: &TrainingSample, config: &TrainConfig, generated: &[TokenId]) -> Result<LossBreakdown> {
    let mut g = Graph::inference(&model.params);
    let v = loss_vars(&mut g, model, sample, config, generated)?;
    Ok(breakdown(&g, &v))
}

/// Joint loss and its gradient with the classifier input `generated` held fixed.
pub fn loss_and_gradients(
    model: &Model,
    sample: &TrainingSample,
    config: &TrainConfig,
    generated: &[TokenId],
) -> Result<(LossBreakdown, Gradients)> {
    let mut g = Graph::new(&model.params);
    let v = loss_vars(&mut g, model, sample, config, generated)?;
    let grads = g.backward(v.total)?;
    Ok((breakdown(&g, &v), grads))
}

/// Gradients of the look-ahead/response terms split at the decoder inputs.
#[derive(Debug, Clone)]
pub struct EmGradients {
    /// Look-ahead group gradients flowing through the decoder seeds, with the
    /// language model held fixed.
    pub e_step: Gradients,
    /// Language-model gradients with the decoder seeds held constant.
    pub m_step: Gradients,
    /// Decoder seeds used, per sample: response context, then one per future step.
    pub contexts: Vec<Vec<Tensor>>,
    /// Summed response + α·look-ahead loss.
    pub loss: f64,
    /// Number of samples that contributed.
    pub count: usize,
}

/// Minibatch updates: LM pre-step, E-step, M-step, then the state step.
pub struct Trainer {
    pub model: Model,
    pub config: TrainConfig,
    optimizer: Sgd,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        let optimizer = Sgd::new(model.params.len(), config.lr, config.momentum, config.clip_norm);
        Ok(Self {
            model,
            config,
            optimizer,
        })
    }

    pub fn lr(&self) -> f64 {
        self.optimizer.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.optimizer.lr = lr;
    }

    /// Applies averaged gradients.
    pub fn apply(&mut self, grads: &Gradients) -> Result<()> {
        self.optimizer.step(&mut self.model.params, grads)?;
        Ok(())
    }

    /// Unconditioned language-model loss of each current utterance.
    pub fn lm_gradients(&self, batch: &[&TrainingSample]) -> Result<(Gradients, f64)> {
        let mut total = Gradients::new(self.model.params.len());
        let mut loss = 0.0;
        for s in batch {
            let mut g = Graph::new(&self.model.params);
            let zero = zero_context(&mut g, &self.model);
            let nll = self.model.decoder_nll(&mut g, zero, s.current.tokens())?;
            loss += g.value(nll).item();
            total.merge(&g.backward(nll)?);
        }
        total.restrict(&self.model.params, ParamGroup::LanguageModel);
        total.scale(1.0 / batch.len() as f64);
        Ok((total, loss))
    }

    /// One forward through encoders and look-ahead; the decoder seeds are cut
    /// so the two halves of the gradient can be applied separately.
    pub fn em_gradients(&self, batch: &[&TrainingSample]) -> Result<EmGradients> {
        let n = self.model.params.len();
        let (mut e_step, mut m_step) = (Gradients::new(n), Gradients::new(n));
        let mut contexts = Vec::new();
        let (mut loss, mut count) = (0.0, 0);
        let alpha = self.config.effective_alpha();
        for s in batch {
            let mut g = Graph::new(&self.model.params);
            let states = self.model.context_states(&mut g, &s.goals, &s.history, &s.current)?;
            let mut terms = Vec::new();
            let mut seeds = Vec::new();
            if let Some(next) = s.next_turn() {
                let ctx = g.detach(states.context)?;
                seeds.push(g.value(ctx).clone());
                terms.push(self.model.decoder_nll(&mut g, ctx, next.tokens())?);
            }
            if alpha > 0.0 {
                for (k, &p) in states.projected.iter().enumerate() {
                    if s.future_mask[k] {
                        let ctx = g.detach(p)?;
                        seeds.push(g.value(ctx).clone());
                        let nll = self.model.decoder_nll(&mut g, ctx, s.future[k].tokens())?;
                        terms.push(g.scale(nll, alpha)?);
                    }
                }
            }
            if terms.is_empty() {
                continue;
            }
            let total = g.add_n(&terms)?;
            loss += g.value(total).item();
            let (above, below) = g.backward_split(total)?;
            m_step.merge(&above);
            e_step.merge(&below);
            contexts.push(seeds);
            count += 1;
        }
        e_step.restrict(&self.model.params, ParamGroup::Lookahead);
        m_step.restrict(&self.model.params, ParamGroup::LanguageModel);
        if count > 0 {
            e_step.scale(1.0 / count as f64);
            m_step.scale(1.0 / count as f64);
        }
        Ok(EmGradients {
            e_step,
            m_step,
            contexts,
            loss,
            count,
        })
    }

    /// Classifier loss on freshly generated next utterances. Gradients stop at
    /// the generated tokens but reach the utterance encoder.
    pub fn state_gradients(&self, batch: &[&TrainingSample]) -> Result<(Gradients, f64)> {
        let mut total = Gradients::new(self.model.params.len());
        let mut loss = 0.0;
        for s in batch {
            let generated = generate_next(&self.model, s)?;
            let mut g = Graph::new(&self.model.params);
            let logit = self.model.completion_logit(&mut g, s.current.tokens(), &generated)?;
            let bce = g.bce_with_logits(logit, s.label as f64)?;
            let scaled = g.scale(bce, self.config.effective_beta())?;
            loss += g.value(scaled).item();
            total.merge(&g.backward(scaled)?);
        }
        total.scale(1.0 / batch.len() as f64);
        Ok((total, loss))
    }

    /// Language-model step, E-step, M-step, then the state step.
    pub fn train_batch(&mut self, batch: &[&TrainingSample]) -> Result<f64> {
        let (lm, mut loss) = self.lm_gradients(batch)?;
        self.apply(&lm)?;
        let em = self.em_gradients(batch)?;
        loss += em.loss;
        if em.count > 0 {
            self.apply(&em.e_step)?;
            self.apply(&em.m_step)?;
        }
        if self.config.effective_beta() > 0.0 {
            let (st, l) = self.state_gradients(batch)?;
            loss += l;
            self.apply(&st)?;
        }
        Ok(loss)
    }

    /// One pass over `samples` in a seeded random order; returns the mean
    /// per-sample training loss.
    pub fn epoch(&mut self, samples: &[TrainingSample], seed: u64) -> Result<f64> {
        if samples.is_empty() {
            return Err(TrainError::NoSamples);
        }
        let mut order: Vec<&TrainingSample> = samples.iter().collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut loss = 0.0;
        for batch in order.chunks(self.config.batch_size) {
            loss += self.train_batch(batch)?;
        }
        Ok(loss / samples.len() as f64)
    }
}

/// Mean joint loss over `samples`.
pub fn mean_loss(model: &Model, samples: &[TrainingSample], config: &TrainConfig) -> Result<LossBreakdown> {
    let mut acc = LossBreakdown::default();
    for s in samples {
        acc.add(&compute_loss(model, s, config)?);
    }
    Ok(acc.scaled(1.0 / samples.len().max(1) as f64))
}

/// Splits sessions 90/10 (by default) at random, seeded.
pub fn split_sessions(sessions: &[DialogueSession], val_fraction: f64, seed: u64) -> (Vec<DialogueSession>, Vec<DialogueSession>) {
    let mut idx: Vec<usize> = (0..sessions.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0001));
    let n_val = ((sessions.len() as f64) * val_fraction).round() as usize;
    let n_val = n_val.min(sessions.len().saturating_sub(1));
    let (val, train) = idx.split_at(n_val);
    let pick = |ids: &[usize]| {
        let mut ids = ids.to_vec();
        ids.sort_unstable();
        ids.into_iter().map(|i| sessions[i].clone()).collect()
    };
    (pick(train), pick(val))
}

pub fn samples_for(sessions: &[DialogueSession], vocab: &Vocabulary, k: usize) -> Vec<TrainingSample> {
    sessions
        .iter()
        .flat_map(|s| prepare_samples(&EncodedSession::encode(s, vocab), k))
        .collect()
}

/// Learning rate between epochs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrSchedule {
    lr: f64,
    mode: DecayFrom,
    epochs: usize,
    seen_best: bool,
}

impl LrSchedule {
    pub fn new(config: &TrainConfig) -> Self {
        Self {
            lr: config.lr,
            mode: config.decay_from,
            epochs: config.epochs,
            seen_best: false,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Rate for the next epoch. Under `Best` the rate is kept while the
    /// validation loss keeps improving and halves after every epoch that
    /// does not; under `Last` it halves after each epoch past `epochs`.
    pub fn after_epoch(&mut self, epoch: usize, improved: bool) -> f64 {
        let halve = match self.mode {
            DecayFrom::Best => {
                let h = self.seen_best && !improved;
                self.seen_best |= improved;
                h
            }
            DecayFrom::Last => epoch >= self.epochs,
        };
        if halve {
            self.lr /= 2.0;
        }
        self.lr
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation loss.
    pub model: Model,
    pub best_epoch: usize,
    pub metrics: Vec<EpochMetrics>,
}

/// Writes the metrics log, one JSON object per line.
pub fn write_metrics<W: Write>(mut w: W, metrics: &[EpochMetrics]) -> std::io::Result<()> {
    for m in metrics {
        serde_json::to_writer(&mut w, m)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Builds the vocabulary from the training split, trains, and keeps the
/// parameters with the best validation loss.
pub fn train(corpus: &[DialogueSession], config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(TrainError::NoSamples);
    }
    let (train_set, val_set) = split_sessions(corpus, config.val_fraction, config.seed);
    let vocab = Vocabulary::build(&train_set, config.min_count).map_err(|e| TrainError::Config(e.to_string()))?;
    let model = Model::new(config.model.clone(), vocab, config.seed)?;
    train_model(model, &train_set, &val_set, config)
}

/// Trains an already initialized model.
pub fn train_model(
    model: Model,
    train_set: &[DialogueSession],
    val_set: &[DialogueSession],
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    let k = config.model.effective_k();
    let train_samples = samples_for(train_set, &model.vocab, k);
    let val_samples = samples_for(val_set, &model.vocab, k);
    if train_samples.is_empty() {
        return Err(TrainError::NoSamples);
    }
    let mut trainer = Trainer::new(model, config.clone())?;
    let total_epochs = match config.decay_from {
        DecayFrom::Best => config.epochs,
        DecayFrom::Last => config.epochs + config.decay_epochs,
    };
    let mut schedule = LrSchedule::new(config);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut metrics = Vec::with_capacity(total_epochs);
    for epoch in 1..=total_epochs {
        let lr = trainer.lr();
        let train_loss = trainer.epoch(&train_samples, config.seed.wrapping_add(epoch as u64))?;
        let val_loss = if val_samples.is_empty() {
            train_loss
        } else {
            mean_loss(&trainer.model, &val_samples, config)?.total
        };
        info!("epoch {epoch}: train {train_loss:.4} val {val_loss:.4} lr {lr}");
        metrics.push(EpochMetrics {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        let improved = best.as_ref().is_none_or(|(b, _, _)| val_loss < *b);
        if improved {
            best = Some((val_loss, epoch, trainer.model.clone()));
        }
        trainer.set_lr(schedule.after_epoch(epoch, improved));
    }
    let (_, best_epoch, model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model,
        best_epoch,
        metrics,
    })
}
