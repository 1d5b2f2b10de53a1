//! Synthetic restaurant-reservation dialogues between two rule-based agents.
//!
//! The customer (speaker A) and the server (speaker B) each hold a private
//! goal vector. At every turn the acting agent plans a shortest path to its
//! goal in its own view of the negotiation and utters the first action of
//! that plan through a template.

mod generator;
mod oracle;
mod restaurant;
mod strips;
mod templates;

pub use generator::{generate_corpus, generate_dialogue, CorpusStats, GeneratedCorpus, GoalPool, MAX_TURNS};
pub use oracle::{agreement, goals_achieved};
pub use restaurant::{
    customer_accepts, feasible, server_provides, AgentView, Role, CUSTOMER_GOAL_LABELS, GOAL_BITS,
    SERVER_GOAL_LABELS,
};
pub use strips::{plan, Domain, Plan, PlannerAction, PlanningState};
pub use templates::{count_words, Slots, TemplateBank};

use std::fmt;

/// The seating arrangements a reservation can settle on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Seating {
    /// A regular table at the requested time.
    Table,
    /// A regular table at the other time slot.
    Later,
    Bar,
    /// A regular table at a higher price.
    Premium,
    /// A bigger table in a private room.
    Vip,
}

impl Seating {
    pub const ALL: [Seating; 5] = [
        Seating::Table,
        Seating::Later,
        Seating::Bar,
        Seating::Premium,
        Seating::Vip,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Seating::Table => "table",
            Seating::Later => "later",
            Seating::Bar => "bar",
            Seating::Premium => "premium",
            Seating::Vip => "vip",
        }
    }
}

impl fmt::Display for Seating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// What an utterance does in the negotiation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DialogueAct {
    /// Customer asks for an arrangement; `Ask(Table)` is the opening request.
    Ask(Seating),
    /// Server agrees to provide the arrangement.
    Offer(Seating),
    Refuse(Seating),
    /// Customer takes the arrangement just offered. Together with the
    /// preceding `Offer` this is the agreement statement.
    Confirm,
    Acknowledge,
    /// Customer closes a successful negotiation.
    Bye,
    /// Customer ends without agreement.
    GiveUp,
    /// Server ends without agreement.
    Decline,
    /// Server closes a negotiation it considers finished.
    Farewell,
}

impl DialogueAct {
    /// Acts after which the dialogue is over.
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            DialogueAct::Bye | DialogueAct::GiveUp | DialogueAct::Decline | DialogueAct::Farewell
        )
    }
}
