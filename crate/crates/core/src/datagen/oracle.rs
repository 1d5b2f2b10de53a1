use crate::corpus::{GoalVector, Speaker, Turn};

use super::restaurant::feasible;
use super::templates::TemplateBank;
use super::{DialogueAct, Seating};

/// The arrangement agreed on last: a server offer immediately followed by a
/// customer confirmation, both recognized from their surface text.
pub fn agreement(turns: &[Turn], bank: &TemplateBank) -> Option<Seating> {
    turns.windows(2).rev().find_map(|pair| {
        let (offer, reply) = (&pair[0], &pair[1]);
        if offer.speaker != Speaker::B || reply.speaker != Speaker::A {
            return None;
        }
        match (bank.recognize(&offer.text), bank.recognize(&reply.text)) {
            (Some(DialogueAct::Offer(s)), Some(DialogueAct::Confirm)) => Some(s),
            _ => None,
        }
    })
}

/// Outcome label: an agreement was stated and it satisfies both goal vectors.
pub fn goals_achieved(customer: &GoalVector, server: &GoalVector, turns: &[Turn], bank: &TemplateBank) -> bool {
    agreement(turns, bank).is_some_and(|s| feasible(s, customer, server))
}
