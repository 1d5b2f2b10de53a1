use super::{EncodedSession, GoalVector, Utterance};

/// One supervised example: predict the turns after `current` given goals and history.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// Goals of the side that speaks next.
    pub goals: GoalVector,
    pub history: Vec<Utterance>,
    pub current: Utterance,
    /// Exactly K slots; slots past the session end hold EOS-only utterances.
    pub future: Vec<Utterance>,
    /// `true` where the future slot is a real turn.
    pub future_mask: Vec<bool>,
    pub label: u8,
}

impl TrainingSample {
    pub fn k(&self) -> usize {
        self.future.len()
    }

    /// The real next turn, if the session continues.
    pub fn next_turn(&self) -> Option<&Utterance> {
        if self.future_mask.first().copied().unwrap_or(false) {
            Some(&self.future[0])
        } else {
            None
        }
    }
}

/// Splits a session of T turns into T samples, one per turn taken as the
/// current utterance.
pub fn prepare_samples(session: &EncodedSession, k: usize) -> Vec<TrainingSample> {
    assert!(k >= 1, "look-ahead horizon must be at least 1");
    let turns = &session.turns;
    (0..turns.len())
        .map(|t| {
            let current = turns[t].clone();
            let next_speaker = current.speaker.other();
            let mut future = Vec::with_capacity(k);
            let mut future_mask = Vec::with_capacity(k);
            for j in 1..=k {
                match turns.get(t + j) {
                    Some(u) => {
                        future.push(u.clone());
                        future_mask.push(true);
                    }
                    None => {
                        let speaker = if j % 2 == 1 { next_speaker } else { current.speaker };
                        future.push(Utterance::end_marker(speaker));
                        future_mask.push(false);
                    }
                }
            }
            TrainingSample {
                goals: session.goals_of(next_speaker).clone(),
                history: turns[..t].to_vec(),
                current,
                future,
                future_mask,
                label: session.outcome,
            }
        })
        .collect()
}
