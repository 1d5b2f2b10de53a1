//! Dialogue data model, vocabulary, training-sample preparation and corpus files.

mod io;
mod samples;
mod vocab;

pub use io::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use samples::{prepare_samples, TrainingSample};
pub use vocab::{tokenize, TokenId, Vocabulary, BOS, EOS, PAD, UNK};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("invalid session: {0}")]
    InvalidSession(String),
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Speaker {
    A,
    B,
}

impl Speaker {
    pub fn other(self) -> Self {
        match self {
            Speaker::A => Speaker::B,
            Speaker::B => Speaker::A,
        }
    }
}

/// Binary goal conditions of one agent. Serialized as an array of 0/1.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct GoalVector(Vec<bool>);

impl GoalVector {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn from_bits(bits: &[u8]) -> Option<Self> {
        bits.iter()
            .map(|b| match b {
                0 => Some(false),
                1 => Some(true),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Self)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn as_u8(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

impl Serialize for GoalVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.as_u8().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GoalVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<u8>::deserialize(d)?;
        GoalVector::from_bits(&raw).ok_or_else(|| serde::de::Error::custom("goal bits must be 0 or 1"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Self {
            speaker,
            text: text.into(),
        }
    }
}

/// One dialogue as stored on disk: both private goal vectors, the surface
/// turns and the outcome label (1 = goals achieved).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueSession {
    pub goals_a: GoalVector,
    pub goals_b: GoalVector,
    pub turns: Vec<Turn>,
    pub outcome: u8,
}

impl DialogueSession {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.outcome > 1 {
            return Err(format!("outcome must be 0 or 1, got {}", self.outcome));
        }
        for (i, pair) in self.turns.windows(2).enumerate() {
            if pair[0].speaker == pair[1].speaker {
                return Err(format!("turns {} and {} have the same speaker", i + 1, i + 2));
            }
        }
        Ok(())
    }

    pub fn num_turns(&self) -> usize {
        self.turns.len()
    }

    pub fn goals_of(&self, speaker: Speaker) -> &GoalVector {
        match speaker {
            Speaker::A => &self.goals_a,
            Speaker::B => &self.goals_b,
        }
    }
}

/// A tokenized utterance: non-empty id sequence ending in EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub speaker: Speaker,
    tokens: Vec<TokenId>,
}

impl Utterance {
    pub fn new(speaker: Speaker, tokens: Vec<TokenId>) -> Result<Self> {
        match tokens.last() {
            Some(&EOS) => {}
            _ => return Err(CorpusError::InvalidSession("utterance must end with EOS".into())),
        }
        if tokens.contains(&PAD) {
            return Err(CorpusError::InvalidSession("utterance contains PAD".into()));
        }
        Ok(Self { speaker, tokens })
    }

    /// The EOS-only utterance used to pad look-ahead slots past the session end.
    pub fn end_marker(speaker: Speaker) -> Self {
        Self {
            speaker,
            tokens: vec![EOS],
        }
    }

    pub fn tokens(&self) -> &[TokenId] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// A session after tokenization against a fixed vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSession {
    pub goals_a: GoalVector,
    pub goals_b: GoalVector,
    pub turns: Vec<Utterance>,
    pub outcome: u8,
}

impl EncodedSession {
    pub fn encode(session: &DialogueSession, vocab: &Vocabulary) -> Self {
        Self {
            goals_a: session.goals_a.clone(),
            goals_b: session.goals_b.clone(),
            turns: session
                .turns
                .iter()
                .map(|t| vocab.encode_utterance(t.speaker, &t.text))
                .collect(),
            outcome: session.outcome,
        }
    }

    pub fn goals_of(&self, speaker: Speaker) -> &GoalVector {
        match speaker {
            Speaker::A => &self.goals_a,
            Speaker::B => &self.goals_b,
        }
    }
}
