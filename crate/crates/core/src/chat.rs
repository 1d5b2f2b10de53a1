//! Live human-vs-agent sessions shared by the HTTP service and the terminal chat.
//!
//! The human plays the customer, the agent the server, as in self-play.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DialogueSession, GoalVector, Speaker, Turn};
use crate::datagen::{DialogueAct, GoalPool, TemplateBank, MAX_TURNS};
use crate::evaluation::{has_farewell, ModelAgent, Responder, DONE_THRESHOLD};
use crate::model::{Model, ModelError};

#[derive(Debug, Error)]
pub enum ChatError {
    #[error("no session `{0}`")]
    NotFound(String),
    #[error("session `{0}` has ended")]
    Ended(String),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Ended,
}

/// Outcome marked by the human after a session ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Achieved,
    Failed,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatSession {
    pub id: String,
    /// Goals of the agent (server side).
    pub goals: GoalVector,
    /// Goals shown to the human (customer side).
    pub human_goals: GoalVector,
    pub turns: Vec<Turn>,
    pub status: SessionStatus,
    pub outcome: Option<Outcome>,
    /// Completion probability reported with the latest agent turn.
    pub done_prob: Option<f64>,
}

impl ChatSession {
    pub fn new(id: String, goals: GoalVector, human_goals: GoalVector) -> Self {
        Self {
            id,
            goals,
            human_goals,
            turns: Vec::new(),
            status: SessionStatus::Open,
            outcome: None,
            done_prob: None,
        }
    }

    /// The session as a corpus record. Needs an achieved/failed mark.
    pub fn to_record(&self) -> Result<DialogueSession, ChatError> {
        let outcome = match self.outcome {
            Some(Outcome::Achieved) => 1,
            Some(Outcome::Failed) => 0,
            Some(Outcome::Abandoned) => return Err(ChatError::BadRequest("abandoned sessions are not exported".into())),
            None => return Err(ChatError::BadRequest("mark the outcome before exporting".into())),
        };
        Ok(DialogueSession {
            goals_a: self.human_goals.clone(),
            goals_b: self.goals.clone(),
            turns: self.turns.clone(),
            outcome,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageReply {
    pub reply: String,
    pub done_prob: f64,
    pub status: SessionStatus,
}

/// Appends the human's `text` and the agent's answer to `session`, ending it
/// on a farewell from either side, a confident completion right after an
/// agreement, or the turn limit.
pub fn exchange(model: &Model, session: &mut ChatSession, text: &str) -> Result<MessageReply, ChatError> {
    if session.status == SessionStatus::Ended {
        return Err(ChatError::Ended(session.id.clone()));
    }
    let text = text.trim();
    if text.is_empty() {
        return Err(ChatError::BadRequest("message text is empty".into()));
    }
    let bank = TemplateBank::default();
    let candidate_final = matches!(
        session.turns.last().map(|t| bank.recognize(&t.text)),
        Some(Some(DialogueAct::Offer(_)))
    ) && bank.recognize(text) == Some(DialogueAct::Confirm);
    session.turns.push(Turn::new(Speaker::A, text));
    let reply = ModelAgent::new(model).reply(&session.goals, &session.turns)?;
    let done_prob = reply.done_prob.unwrap_or(0.0);
    let ends = has_farewell(text)
        || has_farewell(&reply.text)
        || (candidate_final && done_prob > DONE_THRESHOLD)
        || session.turns.len() + 1 >= MAX_TURNS;
    session.turns.push(Turn::new(Speaker::B, reply.text.clone()));
    session.done_prob = Some(done_prob);
    if ends {
        session.status = SessionStatus::Ended;
    }
    Ok(MessageReply {
        reply: reply.text,
        done_prob,
        status: session.status,
    })
}

/// Sessions over one read-only model. Each session has its own lock, so
/// requests to different sessions run side by side.
pub struct ChatEngine {
    model: Arc<Model>,
    pool: GoalPool,
    sessions: Mutex<HashMap<String, Arc<Mutex<ChatSession>>>>,
    rng: Mutex<ChaCha8Rng>,
}

impl ChatEngine {
    pub fn new(model: Arc<Model>, seed: u64) -> Self {
        Self {
            model,
            pool: GoalPool::full(),
            sessions: Mutex::new(HashMap::new()),
            rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    fn check_goals(&self, goals: &GoalVector) -> Result<(), ChatError> {
        if goals.len() != self.model.config.goal_bits {
            return Err(ChatError::BadRequest(format!(
                "goals need {} bits, got {}",
                self.model.config.goal_bits,
                goals.len()
            )));
        }
        Ok(())
    }

    /// Opens a session. Missing goal vectors are drawn from the pool.
    pub fn create(&self, goals: Option<GoalVector>, human_goals: Option<GoalVector>) -> Result<ChatSession, ChatError> {
        for g in goals.iter().chain(&human_goals) {
            self.check_goals(g)?;
        }
        let (id, sampled_human, sampled_agent) = {
            let mut rng = self.rng.lock().expect("rng lock");
            let (a, b) = self.pool.sample(&mut *rng);
            (format!("{:016x}", rng.gen::<u64>()), a, b)
        };
        let session = ChatSession::new(id.clone(), goals.unwrap_or(sampled_agent), human_goals.unwrap_or(sampled_human));
        self.sessions
            .lock()
            .expect("session map lock")
            .insert(id, Arc::new(Mutex::new(session.clone())));
        Ok(session)
    }

    fn handle(&self, id: &str) -> Result<Arc<Mutex<ChatSession>>, ChatError> {
        self.sessions
            .lock()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ChatError::NotFound(id.to_string()))
    }

    pub fn get(&self, id: &str) -> Result<ChatSession, ChatError> {
        Ok(self.handle(id)?.lock().expect("session lock").clone())
    }

    pub fn message(&self, id: &str, text: &str) -> Result<MessageReply, ChatError> {
        let handle = self.handle(id)?;
        let mut session = handle.lock().expect("session lock");
        exchange(&self.model, &mut session, text)
    }

    /// Ends the session (if still open) and records the human's mark.
    pub fn end(&self, id: &str, outcome: Option<Outcome>) -> Result<ChatSession, ChatError> {
        let handle = self.handle(id)?;
        let mut session = handle.lock().expect("session lock");
        session.status = SessionStatus::Ended;
        if outcome.is_some() {
            session.outcome = outcome;
        }
        Ok(session.clone())
    }

    pub fn export(&self, id: &str) -> Result<DialogueSession, ChatError> {
        let session = self.get(id)?;
        if session.status != SessionStatus::Ended {
            return Err(ChatError::BadRequest("session is still open".into()));
        }
        session.to_record()
    }
}
