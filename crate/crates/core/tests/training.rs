mod common;

use common::*;
use lookahead_core::datagen::{generate_corpus, GoalPool, TemplateBank};
use lookahead_core::model::{Model, ModelConfig};
use lookahead_core::training::{compute_loss, mean_loss, split_sessions, train, train_model, write_metrics, TrainConfig, Trainer, Variant};

#[test]
fn zero_weights_leave_the_language_model_term() {
    let config = TrainConfig {
        alpha: 0.0,
        beta: 0.0,
        ..micro_config()
    };
    let (model, samples) = micro_model(&config, 3);
    for s in &samples {
        let l = compute_loss(&model, s, &config).unwrap();
        assert_eq!(l.total, l.lm);
        assert_eq!(l.lookahead, 0.0);
        assert_eq!(l.state, 0.0);
    }
}

#[test]
fn terms_are_nonnegative_and_weighted() {
    let config = micro_config();
    let (model, samples) = micro_model(&config, 3);
    for s in &samples {
        let l = compute_loss(&model, s, &config).unwrap();
        assert!(l.lm > 0.0 && l.lookahead >= 0.0 && l.state > 0.0);
        let want = l.lm + config.alpha * l.lookahead + config.beta * l.state;
        assert!((l.total - want).abs() < 1e-12 * want);
        if s.next_turn().is_none() {
            assert_eq!(l.lookahead, 0.0, "masked slots contribute nothing");
        }
    }
}

#[test]
fn gradient_matches_finite_differences() {
    for bidirectional in [false, true] {
        let mut config = micro_config();
        config.model.bidirectional = bidirectional;
        let r = finite_difference_check(&config, 11, 1e-5);
        println!("bidirectional={bidirectional}: {} scalars, max rel {:e} at {}", r.checked, r.max_rel, r.worst);
        assert!(r.checked > 1000);
        assert!(r.max_rel < 1e-4, "bidirectional={bidirectional}: {} ({})", r.max_rel, r.worst);
    }
}

#[test]
fn e_and_m_steps_touch_only_their_group() {
    check_em_isolation(&micro_config(), 5).unwrap();
}

#[test]
fn training_is_deterministic() {
    let config = TrainConfig {
        batch_size: 1,
        ..micro_config()
    };
    let run = || {
        let (model, samples) = micro_model(&config, 9);
        let one = vec![samples[1].clone()];
        let mut t = Trainer::new(model, config.clone()).unwrap();
        let mut trajectory = Vec::new();
        for e in 0..2 {
            t.epoch(&one, e).unwrap();
            trajectory.push(t.model.params.clone());
        }
        trajectory
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_ne!(a[0], a[1]);
}

#[test]
fn one_epoch_returns_the_first_checkpoint() {
    let corpus = generate_corpus(20, 4, &GoalPool::full(), &TemplateBank::default());
    let config = TrainConfig {
        model: ModelConfig {
            embed_dim: 8,
            goal_hidden: 8,
            hidden: 12,
            lookahead_k: 2,
            ..ModelConfig::default()
        },
        epochs: 1,
        seed: 2,
        ..TrainConfig::default()
    };
    let out = train(&corpus.sessions, &config).unwrap();
    assert_eq!(out.best_epoch, 1);
    assert_eq!(out.metrics.len(), 1);
    assert_eq!(out.metrics[0].lr, 1.0);
    let mut buf = Vec::new();
    write_metrics(&mut buf, &out.metrics).unwrap();
    let line: serde_json::Value = serde_json::from_slice(buf.split(|&b| b == b'\n').next().unwrap()).unwrap();
    for key in ["epoch", "train_loss", "val_loss", "lr"] {
        assert!(line.get(key).is_some(), "{key}");
    }
}

#[test]
fn toy_corpus_loss_drops() {
    let corpus = generate_corpus(50, 8, &GoalPool::full(), &TemplateBank::default());
    let config = TrainConfig {
        model: ModelConfig {
            embed_dim: 16,
            goal_hidden: 16,
            hidden: 24,
            lookahead_k: 2,
            ..ModelConfig::default()
        },
        epochs: 20,
        seed: 1,
        min_count: 1,
        ..TrainConfig::default()
    };
    let out = train(&corpus.sessions, &config).unwrap();
    let (first, last) = (out.metrics[0].train_loss, out.metrics[19].train_loss);
    assert!(last <= 0.8 * first, "epoch 1 {first}, epoch 20 {last}");
}

#[test]
fn baseline_variant_has_no_lookahead_or_state_terms() {
    let corpus = generate_corpus(10, 1, &GoalPool::full(), &TemplateBank::default());
    let base = Variant::Seq2SeqGoal.apply(&TrainConfig {
        model: ModelConfig {
            embed_dim: 6,
            goal_hidden: 6,
            hidden: 8,
            ..ModelConfig::default()
        },
        min_count: 1,
        ..TrainConfig::default()
    });
    let (tr, _) = split_sessions(&corpus.sessions, 0.1, 0);
    let vocab = lookahead_core::corpus::Vocabulary::build(&tr, 1).unwrap();
    let model = Model::new(base.model.clone(), vocab, 0).unwrap();
    let samples = lookahead_core::training::samples_for(&tr, &model.vocab, base.model.effective_k());
    let l = mean_loss(&model, &samples, &base).unwrap();
    assert_eq!((l.lookahead, l.state), (0.0, 0.0));
    let out = train_model(model, &tr, &[], &TrainConfig { epochs: 2, ..base }).unwrap();
    assert_eq!(out.metrics.len(), 2);
}
