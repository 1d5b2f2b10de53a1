mod common;

use lookahead_core::datagen::{
    feasible, generate_corpus, plan, AgentView, GoalPool, Plan, PlanningState, Seating, TemplateBank,
    MAX_TURNS,
};

#[test]
fn plan_lengths_match_backward_search() {
    let n = common::check_planner_against_bfs().unwrap();
    assert!(n > 100, "only {n} states checked");
}

#[test]
fn next_act_is_head_of_lexicographically_first_shortest_plan() {
    for view in common::initial_views().into_iter().take(80) {
        let domain = view.domain();
        let states = common::reachable(domain, view.state.0);
        let dist = common::distances_to_goal(domain, &states, view.goal());
        for &s in &states {
            let Some(&d) = dist.get(&s) else { continue };
            if d == 0 {
                continue;
            }
            let first = domain
                .actions()
                .iter()
                .filter(|a| s & a.pre == a.pre)
                .filter(|a| dist.get(&((s & !a.delete) | a.add)) == Some(&(d - 1)))
                .map(|a| a.name.as_str())
                .min()
                .unwrap();
            let Plan::Found(steps) = plan(domain, PlanningState(s), view.goal()) else { panic!() };
            assert_eq!(domain.actions()[steps[0]].name, first);
            let mut v = view.clone();
            v.state = PlanningState(s);
            assert_eq!(v.next_act(), domain.actions()[steps[0]].act);
        }
    }
}

#[test]
fn outcome_is_one_exactly_when_some_arrangement_suits_both() {
    let corpus = generate_corpus(400, 11, &GoalPool::full(), &TemplateBank::default());
    for s in &corpus.sessions {
        let possible = Seating::ALL.iter().any(|&x| feasible(x, &s.goals_a, &s.goals_b));
        assert_eq!(s.outcome == 1, possible, "{s:?}");
        assert!(s.validate().is_ok());
        assert!(s.turns.len() <= MAX_TURNS);
    }
    println!("{}", serde_json::to_string(&corpus.stats).unwrap());
}

#[test]
fn agent_views_never_disagree_on_what_was_said() {
    let bank = TemplateBank::default();
    let corpus = generate_corpus(200, 3, &GoalPool::full(), &bank);
    for s in &corpus.sessions {
        let (a, b) = (&s.goals_a, &s.goals_b);
        let mut customer = AgentView::customer(a);
        let mut server = AgentView::server(b, a.get(0), a.get(1));
        for t in &s.turns {
            let act = bank.recognize(&t.text).unwrap();
            if act.is_terminal() {
                break;
            }
            assert!(customer.observe(act) && server.observe(act));
        }
    }
}
