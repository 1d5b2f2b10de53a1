use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{DialogueSession, GoalVector, Speaker, Turn};

use super::oracle::goals_achieved;
use super::restaurant::{AgentView, GOAL_BITS};
use super::templates::{count_words, Slots, TemplateBank};

/// Hard cap on dialogue length.
pub const MAX_TURNS: usize = 20;

/// Candidate goal vectors per role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoalPool {
    customer: Vec<GoalVector>,
    server: Vec<GoalVector>,
}

impl GoalPool {
    pub fn new(customer: Vec<GoalVector>, server: Vec<GoalVector>) -> Result<Self, String> {
        for (role, pool) in [("customer", &customer), ("server", &server)] {
            if pool.is_empty() {
                return Err(format!("{role} goal pool is empty"));
            }
            if let Some(g) = pool.iter().find(|g| g.len() != GOAL_BITS) {
                return Err(format!("{role} goal has {} bits, expected {GOAL_BITS}", g.len()));
            }
        }
        Ok(Self { customer, server })
    }

    /// Every combination of goal bits for both roles.
    pub fn full() -> Self {
        let all: Vec<GoalVector> = (0..1u32 << GOAL_BITS)
            .map(|m| GoalVector::new((0..GOAL_BITS).map(|i| m & (1 << i) != 0).collect()))
            .collect();
        Self {
            customer: all.clone(),
            server: all,
        }
    }

    pub fn customer(&self) -> &[GoalVector] {
        &self.customer
    }

    pub fn server(&self) -> &[GoalVector] {
        &self.server
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> (GoalVector, GoalVector) {
        let a = self.customer.choose(rng).expect("pool is nonempty").clone();
        let b = self.server.choose(rng).expect("pool is nonempty").clone();
        (a, b)
    }
}

impl Default for GoalPool {
    fn default() -> Self {
        Self::full()
    }
}

/// Plays both rule-based agents against each other. The customer speaks first.
pub fn generate_dialogue(goals_a: &GoalVector, goals_b: &GoalVector, templates: &TemplateBank, rng_seed: u64) -> DialogueSession {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (large, evening) = (goals_a.get(0), goals_a.get(1));
    let slots = Slots::new(large, evening);
    let mut customer = AgentView::customer(goals_a);
    let mut server = AgentView::server(goals_b, large, evening);
    let mut speaker = Speaker::A;
    let mut turns = Vec::new();
    while turns.len() < MAX_TURNS {
        let act = match speaker {
            Speaker::A => customer.next_act(),
            Speaker::B => server.next_act(),
        };
        turns.push(Turn::new(speaker, templates.realize(act, &slots, &mut rng)));
        if act.is_terminal() {
            break;
        }
        let understood = customer.observe(act) && server.observe(act);
        debug_assert!(understood, "{act:?} not explained by both views");
        speaker = speaker.other();
    }
    let outcome = goals_achieved(goals_a, goals_b, &turns, templates) as u8;
    DialogueSession {
        goals_a: goals_a.clone(),
        goals_b: goals_b.clone(),
        turns,
        outcome,
    }
}

/// Summary row for a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dialogues: usize,
    pub avg_turns_per_dialogue: f64,
    pub avg_words_per_turn: f64,
    pub number_of_words: usize,
    pub goal_achieved_pct: f64,
}

impl CorpusStats {
    pub fn of(sessions: &[DialogueSession]) -> Self {
        let dialogues = sessions.len();
        let turns: usize = sessions.iter().map(|s| s.turns.len()).sum();
        let words: usize = sessions
            .iter()
            .flat_map(|s| &s.turns)
            .map(|t| count_words(&t.text))
            .sum();
        let achieved = sessions.iter().filter(|s| s.outcome == 1).count();
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        Self {
            dialogues,
            avg_turns_per_dialogue: ratio(turns, dialogues),
            avg_words_per_turn: ratio(words, turns),
            number_of_words: words,
            goal_achieved_pct: 100.0 * ratio(achieved, dialogues),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub sessions: Vec<DialogueSession>,
    pub stats: CorpusStats,
}

/// `n` dialogues with goals drawn from `pool`; fully determined by `seed`.
pub fn generate_corpus(n: usize, seed: u64, pool: &GoalPool, templates: &TemplateBank) -> GeneratedCorpus {
    assert!(n >= 1, "need at least one dialogue");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sessions: Vec<DialogueSession> = (0..n)
        .map(|_| {
            let (a, b) = pool.sample(&mut rng);
            generate_dialogue(&a, &b, templates, rng.next_u64())
        })
        .collect();
    let stats = CorpusStats::of(&sessions);
    GeneratedCorpus { sessions, stats }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    fn g(bits: [u8; 6]) -> GoalVector {
        GoalVector::from_bits(&bits).unwrap()
    }

    fn normalized(s: &DialogueSession) -> Vec<String> {
        s.turns.iter().map(|t| tokenize(&t.text).join(" ")).collect()
    }

    #[test]
    fn compatible_goals_agree_quickly() {
        let s = generate_dialogue(&g([0, 1, 0, 0, 0, 0]), &g([0, 1, 0, 0, 0, 0]), &TemplateBank::default(), 1);
        assert_eq!(s.outcome, 1);
        assert_eq!(s.turns.len(), 5);
    }

    #[test]
    fn incompatible_goals_fail() {
        let s = generate_dialogue(&g([1, 1, 0, 0, 0, 0]), &g([1, 0, 0, 0, 0, 0]), &TemplateBank::default(), 1);
        assert_eq!(s.outcome, 0);
        assert!(s.turns.len() <= MAX_TURNS);
    }

    #[test]
    fn refused_table_then_bar_then_upgrades() {
        let bank = TemplateBank::default();
        let s = generate_dialogue(&g([1, 1, 0, 1, 1, 1]), &g([1, 0, 1, 0, 0, 1]), &bank, 7);
        let acts: Vec<_> = s.turns.iter().map(|t| bank.recognize(&t.text).unwrap()).collect();
        use super::super::{DialogueAct::*, Seating::*};
        assert_eq!(
            acts,
            [
                Ask(Table),
                Refuse(Table),
                Ask(Bar),
                Refuse(Bar),
                Ask(Premium),
                Refuse(Premium),
                Ask(Vip),
                Offer(Vip),
                Confirm,
                Acknowledge,
                Bye
            ]
        );
        assert_eq!(s.outcome, 1);
        assert!(s.validate().is_ok());
        assert!(normalized(&s)[0].contains("6 people") || normalized(&s)[0].contains("for 6"));
    }

    #[test]
    fn single_session_stats() {
        let c = generate_corpus(1, 5, &GoalPool::full(), &TemplateBank::default());
        let s = &c.sessions[0];
        assert_eq!(c.stats.dialogues, 1);
        assert_eq!(c.stats.avg_turns_per_dialogue, s.turns.len() as f64);
        let words: usize = s.turns.iter().map(|t| count_words(&t.text)).sum();
        assert_eq!(c.stats.number_of_words, words);
        assert_eq!(c.stats.goal_achieved_pct, 100.0 * s.outcome as f64);
    }

    #[test]
    fn same_seed_same_corpus() {
        let pool = GoalPool::full();
        let bank = TemplateBank::default();
        let a = generate_corpus(50, 9, &pool, &bank);
        let b = generate_corpus(50, 9, &pool, &bank);
        assert_eq!(a.sessions, b.sessions);
        assert_ne!(a.sessions, generate_corpus(50, 10, &pool, &bank).sessions);
    }

    #[test]
    fn pool_rejects_wrong_lengths() {
        assert!(GoalPool::new(vec![g([0; 6])], vec![]).is_err());
        assert!(GoalPool::new(vec![GoalVector::from_bits(&[1]).unwrap()], vec![g([0; 6])]).is_err());
    }
}
