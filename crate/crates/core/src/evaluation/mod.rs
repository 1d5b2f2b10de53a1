//! Self-play between a trained agent and a goal-conditioned user simulator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, DialogueSession, GoalVector, Speaker, Turn, Utterance};
use crate::datagen::{goals_achieved, DialogueAct, GoalPool, Seating, Slots, TemplateBank, MAX_TURNS};
use crate::model::{Model, ModelError};

pub mod sweep;

pub use sweep::{sweep, sweep_table, SweepParam, SweepRow};

/// The token whose appearance ends a session.
pub const FAREWELL_TOKEN: &str = "bye";

/// Threshold on the agent's completion probability.
pub const DONE_THRESHOLD: f64 = 0.5;

/// One generated turn.
#[derive(Debug, Clone, PartialEq)]
pub struct Reply {
    pub text: String,
    /// Completion probability for the turn, when the speaker has a classifier.
    pub done_prob: Option<f64>,
}

/// Either side of a self-play session.
pub trait Responder {
    /// The turn that follows `turns`, spoken by the holder of `goals`.
    fn reply(&mut self, goals: &GoalVector, turns: &[Turn]) -> Result<Reply, ModelError>;

    /// The first turn of a session. Learned models never see an empty
    /// history during training, so the default is the rule-based request.
    fn open(&mut self, goals: &GoalVector, rng: &mut ChaCha8Rng) -> Result<String, ModelError> {
        Ok(opening_request(goals, &TemplateBank::default(), rng))
    }
}

/// The customer's initial table request for `goals`.
pub fn opening_request(goals: &GoalVector, bank: &TemplateBank, rng: &mut impl Rng) -> String {
    let slots = Slots::new(goals.get(0), goals.get(1));
    bank.realize(DialogueAct::Ask(Seating::Table), &slots, rng)
}

/// A trained checkpoint speaking with greedy decoding.
#[derive(Debug, Clone, Copy)]
pub struct ModelAgent<'m> {
    pub model: &'m Model,
}

impl<'m> ModelAgent<'m> {
    pub fn new(model: &'m Model) -> Self {
        Self { model }
    }
}

/// Encodes a text transcript into the model's history and current utterance.
pub fn encode_transcript(model: &Model, turns: &[Turn]) -> Option<(Vec<Utterance>, Utterance)> {
    let (last, rest) = turns.split_last()?;
    let history = rest
        .iter()
        .map(|t| model.vocab.encode_utterance(t.speaker, &t.text))
        .collect();
    Some((history, model.vocab.encode_utterance(last.speaker, &last.text)))
}

impl Responder for ModelAgent<'_> {
    fn reply(&mut self, goals: &GoalVector, turns: &[Turn]) -> Result<Reply, ModelError> {
        let (history, current) = encode_transcript(self.model, turns).ok_or(ModelError::EmptyUtterance)?;
        let (tokens, p) = self.model.respond(goals, &history, &current)?;
        Ok(Reply {
            text: self.model.vocab.decode(&tokens),
            done_prob: Some(p),
        })
    }
}

/// Why a session stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Farewell,
    Classifier,
    MaxTurns,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub session: DialogueSession,
    pub achieved: bool,
    pub ended_by: EndReason,
}

impl Transcript {
    pub fn turns(&self) -> usize {
        self.session.turns.len()
    }
}

pub fn has_farewell(text: &str) -> bool {
    tokenize(text).iter().any(|t| t == FAREWELL_TOKEN)
}

/// True when the last two turns are an agent offer and a customer confirmation,
/// so the agent's next turn may close the session.
fn after_agreement(turns: &[Turn], bank: &TemplateBank) -> bool {
    match turns {
        [.., offer, confirm] => {
            offer.speaker == Speaker::B
                && confirm.speaker == Speaker::A
                && matches!(bank.recognize(&offer.text), Some(DialogueAct::Offer(_)))
                && bank.recognize(&confirm.text) == Some(DialogueAct::Confirm)
        }
        _ => false,
    }
}

/// Plays one session. The simulator holds `goals_a` and opens as the
/// customer; the agent holds `goals_b`. Turns alternate until a farewell,
/// a confident completion from the agent right after an agreement, or
/// `max_turns`.
pub fn self_play(
    agent: &mut dyn Responder,
    simulator: &mut dyn Responder,
    goals_a: &GoalVector,
    goals_b: &GoalVector,
    max_turns: usize,
    seed: u64,
) -> Result<Transcript, ModelError> {
    let bank = TemplateBank::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut turns = vec![Turn::new(Speaker::A, simulator.open(goals_a, &mut rng)?)];
    let mut ended_by = EndReason::MaxTurns;
    if has_farewell(&turns[0].text) {
        ended_by = EndReason::Farewell;
    }
    while ended_by == EndReason::MaxTurns && turns.len() < max_turns {
        let speaker = turns.last().expect("opened").speaker.other();
        let candidate_final = speaker == Speaker::B && after_agreement(&turns, &bank);
        let reply = match speaker {
            Speaker::A => simulator.reply(goals_a, &turns)?,
            Speaker::B => agent.reply(goals_b, &turns)?,
        };
        let farewell = has_farewell(&reply.text);
        turns.push(Turn::new(speaker, reply.text));
        if farewell {
            ended_by = EndReason::Farewell;
        } else if candidate_final && reply.done_prob.is_some_and(|p| p > DONE_THRESHOLD) {
            ended_by = EndReason::Classifier;
        }
    }
    let achieved = goals_achieved(goals_a, goals_b, &turns, &bank);
    Ok(Transcript {
        session: DialogueSession {
            goals_a: goals_a.clone(),
            goals_b: goals_b.clone(),
            turns,
            outcome: achieved as u8,
        },
        achieved,
        ended_by,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_sessions: usize,
    pub achieved_ratio: f64,
    pub avg_turns: f64,
    pub transcripts: Vec<Transcript>,
    pub seed: u64,
}

impl EvalReport {
    pub fn from_transcripts(transcripts: Vec<Transcript>, seed: u64) -> Self {
        let n = transcripts.len();
        let achieved = transcripts.iter().filter(|t| t.achieved).count();
        let turns: usize = transcripts.iter().map(Transcript::turns).sum();
        let div = n.max(1) as f64;
        Self {
            n_sessions: n,
            achieved_ratio: achieved as f64 / div,
            avg_turns: turns as f64 / div,
            transcripts,
            seed,
        }
    }
}

/// Runs `n` seeded sessions with goals drawn from `pool`.
pub fn evaluate_with(
    agent: &mut dyn Responder,
    simulator: &mut dyn Responder,
    pool: &GoalPool,
    n: usize,
    seed: u64,
) -> Result<EvalReport, ModelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut transcripts = Vec::with_capacity(n);
    for _ in 0..n {
        let (a, b) = pool.sample(&mut rng);
        let session_seed = rng.gen();
        transcripts.push(self_play(agent, simulator, &a, &b, MAX_TURNS, session_seed)?);
    }
    Ok(EvalReport::from_transcripts(transcripts, seed))
}

/// Agent checkpoint against simulator checkpoint over the full goal pool.
pub fn evaluate(agent: &Model, simulator: &Model, n: usize, seed: u64) -> Result<EvalReport, ModelError> {
    if n == 0 {
        return Err(ModelError::Config("n must be at least 1".into()));
    }
    evaluate_with(&mut ModelAgent::new(agent), &mut ModelAgent::new(simulator), &GoalPool::full(), n, seed)
}
