use std::sync::OnceLock;

use crate::corpus::{GoalVector, Speaker};

use super::strips::{plan, Domain, Plan, PlannerAction, PlanningState};
use super::{DialogueAct, Seating};

/// Length of each agent's goal vector.
pub const GOAL_BITS: usize = 6;

pub const CUSTOMER_GOAL_LABELS: [&str; GOAL_BITS] = [
    "large_party",
    "evening",
    "flexible_time",
    "accepts_bar",
    "accepts_premium",
    "accepts_vip",
];

pub const SERVER_GOAL_LABELS: [&str; GOAL_BITS] = [
    "free_at_noon",
    "free_in_evening",
    "seats_large_party",
    "has_bar",
    "offers_premium",
    "offers_vip",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Customer,
    Server,
}

impl Role {
    pub fn speaker(self) -> Speaker {
        match self {
            Role::Customer => Speaker::A,
            Role::Server => Speaker::B,
        }
    }

    pub fn of(speaker: Speaker) -> Self {
        match speaker {
            Speaker::A => Role::Customer,
            Speaker::B => Role::Server,
        }
    }
}

pub fn customer_accepts(customer: &GoalVector, seating: Seating) -> bool {
    match seating {
        Seating::Table => true,
        Seating::Later => customer.get(2),
        Seating::Bar => customer.get(3),
        Seating::Premium => customer.get(4),
        Seating::Vip => customer.get(5),
    }
}

/// Whether the server can provide `seating` for a party of the given size at
/// the given time slot.
pub fn server_provides(server: &GoalVector, seating: Seating, large_party: bool, evening: bool) -> bool {
    let free_at = |evening: bool| if evening { server.get(1) } else { server.get(0) };
    let fits = !large_party || server.get(2);
    match seating {
        Seating::Table => free_at(evening) && fits,
        Seating::Later => free_at(!evening) && fits,
        Seating::Bar => server.get(3),
        Seating::Premium => server.get(4),
        Seating::Vip => server.get(5),
    }
}

/// An arrangement satisfies both goal vectors.
pub fn feasible(seating: Seating, customer: &GoalVector, server: &GoalVector) -> bool {
    customer_accepts(customer, seating) && server_provides(server, seating, customer.get(0), customer.get(1))
}

fn p(kind: &str, s: Seating) -> String {
    format!("{kind}_{}", s.name())
}

/// Actions both views share: the turn structure of the negotiation.
/// `customer_extra` and `server_extra` add the role-specific preconditions.
fn negotiation_domain(customer_extra: impl Fn(Seating) -> Vec<String>, server_extra: impl Fn(Seating) -> Vec<String>) -> Domain {
    let mut d = Domain::new();
    for s in Seating::ALL {
        let (open, pending, offered) = (p("open", s), p("pending", s), p("offered", s));
        let mut pre = vec!["turn_customer".to_string(), open.clone()];
        if s != Seating::Table {
            pre.push("declined_table".into());
        }
        pre.extend(customer_extra(s));
        d.add_action(
            &p("customer_ask", s),
            &refs(&pre),
            &[&pending, "turn_server"],
            &["turn_customer", &open],
            DialogueAct::Ask(s),
        );

        let mut pre = vec!["turn_server".to_string(), pending.clone()];
        pre.extend(server_extra(s));
        d.add_action(
            &p("server_offer", s),
            &refs(&pre),
            &[&offered, "turn_customer"],
            &["turn_server", &pending],
            DialogueAct::Offer(s),
        );

        let mut pre = vec!["turn_server".to_string(), pending.clone()];
        pre.extend(server_extra(s).into_iter().map(|c| c.replacen("can_", "cannot_", 1)));
        let mut add = vec!["turn_customer"];
        if s == Seating::Table {
            add.push("declined_table");
        }
        d.add_action(
            &p("server_refuse", s),
            &refs(&pre),
            &add,
            &["turn_server", &pending],
            DialogueAct::Refuse(s),
        );

        d.add_action(
            &p("customer_confirm", s),
            &["turn_customer", &offered],
            &["agreed", "turn_server"],
            &["turn_customer", &offered],
            DialogueAct::Confirm,
        );
    }
    d.add_action(
        "server_acknowledge",
        &["turn_server", "agreed"],
        &["acknowledged", "turn_customer"],
        &["turn_server"],
        DialogueAct::Acknowledge,
    );
    d
}

fn refs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}

/// Customer view: knows its own acceptances, assumes the server may grant anything.
fn customer_domain() -> &'static Domain {
    static D: OnceLock<Domain> = OnceLock::new();
    D.get_or_init(|| {
        negotiation_domain(
            |s| match s {
                Seating::Table => vec![],
                _ => vec![p("accepts", s)],
            },
            |_| vec![],
        )
    })
}

/// Server view: knows what it can provide, assumes the customer may ask for anything.
fn server_domain() -> &'static Domain {
    static D: OnceLock<Domain> = OnceLock::new();
    D.get_or_init(|| negotiation_domain(|_| vec![], |s| vec![p("can", s)]))
}

/// One agent's private planning state plus its goal.
#[derive(Debug, Clone)]
pub struct AgentView {
    pub role: Role,
    domain: &'static Domain,
    pub state: PlanningState,
    goal: u64,
}

impl AgentView {
    pub fn customer(goals: &GoalVector) -> Self {
        let domain = customer_domain();
        let mut props: Vec<String> = vec!["turn_customer".into()];
        props.extend(Seating::ALL.iter().map(|&s| p("open", s)));
        props.extend(
            Seating::ALL
                .iter()
                .filter(|&&s| s != Seating::Table && customer_accepts(goals, s))
                .map(|&s| p("accepts", s)),
        );
        Self {
            role: Role::Customer,
            domain,
            state: domain.state(&refs(&props)),
            goal: domain.mask("acknowledged"),
        }
    }

    /// The server learns party size and time slot from the opening request.
    pub fn server(goals: &GoalVector, large_party: bool, evening: bool) -> Self {
        let domain = server_domain();
        let mut props: Vec<String> = vec!["turn_customer".into()];
        for s in Seating::ALL {
            props.push(p("open", s));
            let kind = if server_provides(goals, s, large_party, evening) {
                "can"
            } else {
                "cannot"
            };
            props.push(p(kind, s));
        }
        Self {
            role: Role::Server,
            domain,
            state: domain.state(&refs(&props)),
            goal: domain.mask("acknowledged"),
        }
    }

    pub fn domain(&self) -> &'static Domain {
        self.domain
    }

    pub fn goal(&self) -> u64 {
        self.goal
    }

    pub fn plan(&self) -> Plan {
        plan(self.domain, self.state, self.goal)
    }

    /// First action of the current plan, or the designated closing act when the
    /// goal is already met or cannot be reached.
    pub fn next_act(&self) -> DialogueAct {
        match self.plan() {
            Plan::Found(steps) if steps.is_empty() => match self.role {
                Role::Customer => DialogueAct::Bye,
                Role::Server => DialogueAct::Farewell,
            },
            Plan::Found(steps) => self.domain.actions()[steps[0]].act,
            Plan::Unreachable => match self.role {
                Role::Customer => DialogueAct::GiveUp,
                Role::Server => DialogueAct::Decline,
            },
        }
    }

    /// Applies the effects of an act uttered by either side. Returns `false`
    /// when no action of this view explains the act in the current state.
    pub fn observe(&mut self, act: DialogueAct) -> bool {
        if act.is_terminal() {
            return true;
        }
        let found: Option<&PlannerAction> = self
            .domain
            .actions()
            .iter()
            .find(|a| a.act == act && a.applicable(self.state));
        match found {
            Some(a) => {
                self.state = self.state.apply(a);
                true
            }
            None => false,
        }
    }
}
