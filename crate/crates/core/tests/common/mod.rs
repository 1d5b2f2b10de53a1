#![allow(dead_code)]

use std::collections::{HashMap, HashSet, VecDeque};

use lookahead_core::corpus::GoalVector;
use lookahead_core::datagen::{AgentView, Domain, PlanningState};

/// Every state reachable from `start` with the domain's actions.
pub fn reachable(domain: &Domain, start: u64) -> HashSet<u64> {
    let mut seen = HashSet::from([start]);
    let mut queue = VecDeque::from([start]);
    while let Some(s) = queue.pop_front() {
        for a in domain.actions() {
            if s & a.pre == a.pre {
                let n = (s & !a.delete) | a.add;
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
    }
    seen
}

/// Distance to the nearest goal state for each state of `states`, computed
/// backwards from all goal states at once. Missing entries are unreachable.
pub fn distances_to_goal(domain: &Domain, states: &HashSet<u64>, goal: u64) -> HashMap<u64, usize> {
    let mut preds: HashMap<u64, Vec<u64>> = HashMap::new();
    for &s in states {
        for a in domain.actions() {
            if s & a.pre == a.pre {
                preds.entry((s & !a.delete) | a.add).or_default().push(s);
            }
        }
    }
    let mut dist: HashMap<u64, usize> = states.iter().filter(|&&s| s & goal == goal).map(|&s| (s, 0)).collect();
    let mut queue: VecDeque<u64> = dist.keys().copied().collect();
    while let Some(s) = queue.pop_front() {
        let d = dist[&s];
        for &p in preds.get(&s).map(Vec::as_slice).unwrap_or(&[]) {
            if !dist.contains_key(&p) {
                dist.insert(p, d + 1);
                queue.push_back(p);
            }
        }
    }
    dist
}

/// All initial views of the shipped domain: every customer goal vector and
/// every server goal vector under every request.
pub fn initial_views() -> Vec<AgentView> {
    let goals: Vec<GoalVector> = (0..64u32)
        .map(|m| GoalVector::new((0..6).map(|i| m & (1 << i) != 0).collect()))
        .collect();
    let mut views: Vec<AgentView> = goals.iter().map(AgentView::customer).collect();
    for g in &goals {
        for large in [false, true] {
            for evening in [false, true] {
                views.push(AgentView::server(g, large, evening));
            }
        }
    }
    views
}

/// Checks plan length against the backward search on every state reachable
/// from every initial view. Returns the number of (state, goal) pairs checked.
pub fn check_planner_against_bfs() -> Result<usize, String> {
    let mut checked = HashSet::new();
    for view in initial_views() {
        let domain = view.domain();
        let states = reachable(domain, view.state.0);
        let dist = distances_to_goal(domain, &states, view.goal());
        for &s in &states {
            if !checked.insert((domain as *const Domain as usize, s, view.goal())) {
                continue;
            }
            let got = lookahead_core::datagen::plan(domain, PlanningState(s), view.goal()).len();
            let want = dist.get(&s).copied();
            if got != want {
                return Err(format!("state {:?}: plan {got:?}, oracle {want:?}", domain.describe(PlanningState(s))));
            }
        }
    }
    Ok(checked.len())
}

use lookahead_core::corpus::{prepare_samples, DialogueSession, EncodedSession, Speaker, TrainingSample, Turn, Vocabulary};
use lookahead_core::model::{Model, ModelConfig};
use lookahead_core::tensor::{Graph, ParamGroup, Tensor};
use lookahead_core::training::{generate_next, loss_and_gradients, loss_with_generated, TrainConfig, Trainer};

/// Eight words plus the four reserved tokens.
pub const MICRO_WORDS: &str = "hi table bar yes no ok bye please";

pub fn micro_sessions() -> Vec<DialogueSession> {
    let session = |a: [bool; 3], b: [bool; 3], turns: &[&str], outcome: u8| DialogueSession {
        goals_a: GoalVector::new(a.to_vec()),
        goals_b: GoalVector::new(b.to_vec()),
        turns: turns
            .iter()
            .enumerate()
            .map(|(i, t)| Turn::new(if i % 2 == 0 { Speaker::A } else { Speaker::B }, *t))
            .collect(),
        outcome,
    };
    vec![
        session([true, false, true], [false, true, true], &["hi table please", "no table", "bar please", "yes bar ok", "ok bye"], 1),
        session([false, false, true], [true, true, false], &["hi bar please", "no bar", "bye"], 0),
    ]
}

pub fn micro_config() -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            embed_dim: 4,
            goal_hidden: 4,
            hidden: 8,
            lookahead_k: 2,
            goal_bits: 3,
            max_decode_len: 6,
            init_scale: 0.3,
            ..ModelConfig::default()
        },
        batch_size: 2,
        epochs: 2,
        min_count: 1,
        ..TrainConfig::default()
    }
}

pub fn micro_model(config: &TrainConfig, seed: u64) -> (Model, Vec<TrainingSample>) {
    let sessions = micro_sessions();
    let vocab = Vocabulary::build_from_texts([MICRO_WORDS], 1);
    assert_eq!(vocab.len(), 12);
    let model = Model::new(config.model.clone(), vocab, seed).unwrap();
    let samples = sessions
        .iter()
        .flat_map(|s| prepare_samples(&EncodedSession::encode(s, &model.vocab), config.model.effective_k()))
        .collect();
    (model, samples)
}

/// Floor on the denominator of the relative error, for entries whose true
/// gradient is zero or close to it.
pub const FD_FLOOR: f64 = 1e-5;

#[derive(Debug, Default)]
pub struct FdReport {
    pub checked: usize,
    pub max_rel: f64,
    pub worst: String,
}

/// Central differences for every scalar of every parameter on every sample,
/// against the analytic gradient of the full loss.
pub fn finite_difference_check(config: &TrainConfig, seed: u64, eps: f64) -> FdReport {
    let (mut model, samples) = micro_model(config, seed);
    let mut report = FdReport::default();
    for (si, sample) in samples.iter().enumerate() {
        let generated = generate_next(&model, sample).unwrap();
        let (_, grads) = loss_and_gradients(&model, sample, config, &generated).unwrap();
        let ids: Vec<_> = model.params.ids().collect();
        for id in ids {
            let n = model.params.value(id).len();
            let analytic = grads.get(id).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; n]);
            for i in 0..n {
                let orig = model.params.value(id).data()[i];
                model.params.value_mut(id).data_mut()[i] = orig + eps;
                let up = loss_with_generated(&model, sample, config, &generated).unwrap().total;
                model.params.value_mut(id).data_mut()[i] = orig - eps;
                let down = loss_with_generated(&model, sample, config, &generated).unwrap().total;
                model.params.value_mut(id).data_mut()[i] = orig;
                let numeric = (up - down) / (2.0 * eps);
                let a = analytic[i];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FD_FLOOR);
                report.checked += 1;
                if rel > report.max_rel {
                    report.max_rel = rel;
                    report.worst = format!("sample {si} {}[{i}]: analytic {a:e} numeric {numeric:e}", model.params.get(id).name);
                }
            }
        }
    }
    report
}

fn bits(v: &[Vec<f64>]) -> Vec<u64> {
    v.iter().flatten().map(|x| x.to_bits()).collect()
}

/// Applies one E-step and one M-step and checks what each may not touch.
pub fn check_em_isolation(config: &TrainConfig, seed: u64) -> Result<(), String> {
    let (model, samples) = micro_model(config, seed);
    let mut trainer = Trainer::new(model, config.clone()).map_err(|e| e.to_string())?;
    let batch: Vec<&TrainingSample> = samples.iter().collect();
    let em = trainer.em_gradients(&batch).map_err(|e| e.to_string())?;
    if em.count == 0 {
        return Err("no sample contributed".into());
    }
    if em.e_step.l2_norm() == 0.0 || em.m_step.l2_norm() == 0.0 {
        return Err("degenerate gradients".into());
    }

    // the M-step gradient must be what the decoder sees with the seeds as plain constants
    let alpha = config.effective_alpha();
    let m = &trainer.model;
    let mut expected = lookahead_core::tensor::Gradients::new(m.params.len());
    let mut contributing = samples.iter().filter(|s| s.next_turn().is_some());
    for seeds in &em.contexts {
        let s = contributing.next().ok_or("seed count mismatch")?;
        let mut g = Graph::new(&m.params);
        let mut slots = Vec::new();
        if let Some(next) = s.next_turn() {
            slots.push((next.tokens(), 1.0));
        }
        if alpha > 0.0 {
            for k in 0..s.k() {
                if s.future_mask[k] {
                    slots.push((s.future[k].tokens(), alpha));
                }
            }
        }
        if slots.len() != seeds.len() {
            return Err("seed count mismatch".into());
        }
        // the seeds must equal a fresh forward, bit for bit
        let states = m.context_states(&mut g, &s.goals, &s.history, &s.current).map_err(|e| e.to_string())?;
        let mut fresh: Vec<Tensor> = Vec::new();
        if s.next_turn().is_some() {
            fresh.push(g.value(states.context).clone());
        }
        if alpha > 0.0 {
            for k in 0..s.k() {
                if s.future_mask[k] {
                    fresh.push(g.value(states.projected[k]).clone());
                }
            }
        }
        if &fresh != seeds {
            return Err("decoder seeds differ from a fresh forward".into());
        }
        let mut g = Graph::new(&m.params);
        let mut terms = Vec::new();
        for ((tokens, w), seed) in slots.iter().zip(seeds) {
            let c = g.constant(seed.clone());
            let nll = m.decoder_nll(&mut g, c, tokens).map_err(|e| e.to_string())?;
            terms.push(g.scale(nll, *w).map_err(|e| e.to_string())?);
        }
        let total = g.add_n(&terms).map_err(|e| e.to_string())?;
        expected.merge(&g.backward(total).map_err(|e| e.to_string())?);
    }
    expected.restrict(&m.params, ParamGroup::LanguageModel);
    expected.scale(1.0 / em.count as f64);
    for id in m.params.ids() {
        let (a, b) = (em.m_step.get(id), expected.get(id));
        let close = match (a, b) {
            (Some(a), Some(b)) => a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + y.abs())),
            (None, None) => true,
            _ => false,
        };
        if !close {
            return Err(format!("M-step gradient of {} depends on more than the frozen states", m.params.get(id).name));
        }
    }

    let lm_before = trainer.model.params.snapshot(ParamGroup::LanguageModel);
    let la_before = trainer.model.params.snapshot(ParamGroup::Lookahead);
    trainer.apply(&em.e_step).map_err(|e| e.to_string())?;
    if bits(&trainer.model.params.snapshot(ParamGroup::LanguageModel)) != bits(&lm_before) {
        return Err("E-step changed language-model parameters".into());
    }
    let la_after_e = trainer.model.params.snapshot(ParamGroup::Lookahead);
    if bits(&la_after_e) == bits(&la_before) {
        return Err("E-step did not move the look-ahead parameters".into());
    }
    trainer.apply(&em.m_step).map_err(|e| e.to_string())?;
    if bits(&trainer.model.params.snapshot(ParamGroup::Lookahead)) != bits(&la_after_e) {
        return Err("M-step changed look-ahead parameters".into());
    }
    if bits(&trainer.model.params.snapshot(ParamGroup::LanguageModel)) == bits(&lm_before) {
        return Err("M-step did not move the language model".into());
    }
    Ok(())
}
