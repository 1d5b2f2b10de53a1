//! Ground STRIPS planning over at most 64 propositions.

use std::collections::{HashMap, VecDeque};

use super::DialogueAct;

/// A set of true propositions, one bit per proposition of the owning domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PlanningState(pub u64);

impl PlanningState {
    pub fn holds(self, mask: u64) -> bool {
        self.0 & mask == mask
    }

    pub fn apply(self, action: &PlannerAction) -> Self {
        PlanningState((self.0 & !action.delete) | action.add)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannerAction {
    pub name: String,
    pub pre: u64,
    pub add: u64,
    pub delete: u64,
    /// Dialogue act realized when this action is executed.
    pub act: DialogueAct,
}

impl PlannerAction {
    pub fn applicable(&self, state: PlanningState) -> bool {
        state.holds(self.pre)
    }
}

/// A closed proposition universe plus the searchable action set.
#[derive(Debug, Clone)]
pub struct Domain {
    props: Vec<String>,
    actions: Vec<PlannerAction>,
}

impl Domain {
    pub fn new() -> Self {
        Self {
            props: Vec::new(),
            actions: Vec::new(),
        }
    }

    /// Declares (or looks up) a proposition and returns its bit.
    pub fn prop(&mut self, name: &str) -> u64 {
        if let Some(i) = self.props.iter().position(|p| p == name) {
            return 1 << i;
        }
        assert!(self.props.len() < 64, "domain limited to 64 propositions");
        self.props.push(name.to_string());
        1 << (self.props.len() - 1)
    }

    /// Bit of an already declared proposition.
    pub fn mask(&self, name: &str) -> u64 {
        let i = self
            .props
            .iter()
            .position(|p| p == name)
            .unwrap_or_else(|| panic!("undeclared proposition `{name}`"));
        1 << i
    }

    pub fn add_action(&mut self, name: &str, pre: &[&str], add: &[&str], delete: &[&str], act: DialogueAct) {
        let mut collect = |names: &[&str]| names.iter().fold(0u64, |m, n| m | self.prop(n));
        let (pre, add, delete) = (collect(pre), collect(add), collect(delete));
        debug_assert_eq!(add & delete, 0, "action {name} adds and deletes the same proposition");
        self.actions.push(PlannerAction {
            name: name.to_string(),
            pre,
            add,
            delete,
            act,
        });
        self.actions.sort_by(|a, b| a.name.cmp(&b.name));
    }

    pub fn props(&self) -> &[String] {
        &self.props
    }

    /// Actions in lexicographic name order.
    pub fn actions(&self) -> &[PlannerAction] {
        &self.actions
    }

    pub fn action(&self, name: &str) -> Option<&PlannerAction> {
        self.actions.iter().find(|a| a.name == name)
    }

    pub fn state(&self, true_props: &[&str]) -> PlanningState {
        PlanningState(true_props.iter().fold(0, |m, p| m | self.mask(p)))
    }

    pub fn describe(&self, state: PlanningState) -> Vec<&str> {
        (0..self.props.len())
            .filter(|i| state.0 & (1 << i) != 0)
            .map(|i| self.props[i].as_str())
            .collect()
    }
}

impl Default for Domain {
    fn default() -> Self {
        Self::new()
    }
}

/// Outcome of a plan search; unreachability is an ordinary result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Plan {
    Found(Vec<usize>),
    Unreachable,
}

impl Plan {
    pub fn len(&self) -> Option<usize> {
        match self {
            Plan::Found(steps) => Some(steps.len()),
            Plan::Unreachable => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }
}

/// Shortest action sequence from `state` to any state containing `goal`.
///
/// Breadth-first over ground states, expanding actions in name order and
/// keeping the first path to each state, so among equally short plans the one
/// whose name sequence sorts first is returned.
pub fn plan(domain: &Domain, state: PlanningState, goal: u64) -> Plan {
    if state.holds(goal) {
        return Plan::Found(Vec::new());
    }
    let mut parent: HashMap<PlanningState, (PlanningState, usize)> = HashMap::new();
    let mut queue = VecDeque::from([state]);
    parent.insert(state, (state, usize::MAX));
    while let Some(s) = queue.pop_front() {
        for (i, action) in domain.actions().iter().enumerate() {
            if !action.applicable(s) {
                continue;
            }
            let next = s.apply(action);
            if parent.contains_key(&next) {
                continue;
            }
            parent.insert(next, (s, i));
            if next.holds(goal) {
                let mut steps = vec![i];
                let mut cur = s;
                while cur != state {
                    let (prev, a) = parent[&cur];
                    steps.push(a);
                    cur = prev;
                }
                steps.reverse();
                return Plan::Found(steps);
            }
            queue.push_back(next);
        }
    }
    Plan::Unreachable
}
