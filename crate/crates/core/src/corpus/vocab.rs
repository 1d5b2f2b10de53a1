use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{CorpusError, DialogueSession, Result, Speaker, Utterance};

pub type TokenId = usize;

pub const UNK: TokenId = 0;
pub const BOS: TokenId = 1;
pub const EOS: TokenId = 2;
pub const PAD: TokenId = 3;

const RESERVED: [&str; 4] = ["<unk>", "<s>", "</s>", "<pad>"];

/// Lowercases and splits on whitespace; punctuation becomes separate tokens.
/// Apostrophes inside a word are kept ("don't", "o'clock").
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    let lower = text.to_lowercase();
    let chars: Vec<char> = lower.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let inner_apostrophe = c == '\''
            && !word.is_empty()
            && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || inner_apostrophe {
            word.push(c);
            continue;
        }
        if !word.is_empty() {
            tokens.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            tokens.push(c.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Token/id bijection with reserved ids 0..3 for `<unk>`, `<s>`, `</s>`, `<pad>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, TokenId>,
    min_count: usize,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    tokens: Vec<String>,
    min_count: usize,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Self::from_tokens(r.tokens, r.min_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        Self {
            tokens: v.tokens,
            min_count: v.min_count,
        }
    }
}

impl Vocabulary {
    /// Ids ordered by descending training frequency, ties lexicographic.
    /// Tokens seen fewer than `min_count` times are left out and encode to UNK.
    pub fn build(corpus: &[DialogueSession], min_count: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(Self::build_from_texts(
            corpus.iter().flat_map(|s| s.turns.iter().map(|t| t.text.as_str())),
            min_count,
        ))
    }

    pub fn build_from_texts<'a>(texts: impl IntoIterator<Item = &'a str>, min_count: usize) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for text in texts {
            for tok in tokenize(text) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut kept: Vec<(String, usize)> = counts
            .into_iter()
            .filter(|(t, c)| *c >= min_count && !RESERVED.contains(&t.as_str()))
            .collect();
        kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        tokens.extend(kept.into_iter().map(|(t, _)| t));
        Self::from_tokens(tokens, min_count)
    }

    fn from_tokens(tokens: Vec<String>, min_count: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens,
            index,
            min_count,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn min_count(&self) -> usize {
        self.min_count
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> TokenId {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.tokens.get(id).map(String::as_str).unwrap_or(RESERVED[UNK])
    }

    /// Token ids of `text` followed by EOS.
    pub fn encode(&self, text: &str) -> Vec<TokenId> {
        let mut ids: Vec<TokenId> = tokenize(text).iter().map(|t| self.id(t)).collect();
        ids.push(EOS);
        ids
    }

    pub fn encode_utterance(&self, speaker: Speaker, text: &str) -> Utterance {
        Utterance::new(speaker, self.encode(text)).expect("encode always appends EOS and never emits PAD")
    }

    /// Surface text up to the first EOS; BOS and PAD are dropped.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        ids.iter()
            .take_while(|&&id| id != EOS)
            .filter(|&&id| id != BOS && id != PAD)
            .map(|&id| self.token(id))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
