use std::collections::BTreeSet;

use lrnn::dataset::{Dataset, Example, Query};
use lrnn::io::{default_pattern, generate_planted, serialize_template, GeneratorConfig};
use lrnn::structure::*;
use lrnn::train::{evaluate, train_weights, LossKind, TrainConfig};
use lrnn::{Atom, Clause, Execution, HeadKind, Template, WeightStore};

fn planted(seed: u64, n: usize) -> Dataset {
    generate_planted(&GeneratorConfig::new(seed, n, default_pattern())).unwrap()
}

fn quick_train() -> TrainConfig {
    TrainConfig { epochs: 60, execution: Execution::Sequential, ..Default::default() }
}

fn rule(text_head: Atom, body: &[(&str, &[&str])]) -> Clause {
    Clause::new(text_head, body.iter().map(|(p, a)| Atom::parse_args(p, a)).collect())
}

fn pos() -> Atom {
    Atom::parse_args("pos", &[])
}

/// Layer-1 template after one accepted rule with invented predicates.
fn one_iteration_state(data: &Dataset) -> (Template, WeightStore) {
    let mut t = create_layer1_rules(data, 2).unwrap();
    let r = rule(pos(), &[("bond", &["A", "B"]), ("c", &["A"])]);
    t.push(r.clone()).unwrap();
    for c in invent_predicates(&r, &mut t, 2, 1, &BTreeSet::new()).unwrap() {
        t.push(c).unwrap();
    }
    let mut w = WeightStore::uniform(t.len(), 3);
    for k in t.keys_with_kind(HeadKind::Latent) {
        w.set_frozen(k, true);
    }
    (t, w)
}

#[test]
fn cached_scores_equal_uncached_scores() {
    let data = planted(1, 40);
    let (t, w) = one_iteration_state(&data);
    let cfg = quick_train();
    let cached = Scorer::new(&t, &w, &data, &cfg, true).unwrap();
    let plain = Scorer::new(&t, &w, &data, &cfg, false).unwrap();
    assert!(cached.is_cached() && !plain.is_cached());
    assert!((cached.current_log_loss().unwrap() - plain.current_log_loss().unwrap()).abs() < 1e-9);
    assert!((cached.baseline().unwrap() - plain.baseline().unwrap()).abs() < 1e-9);
    let candidates = [
        rule(pos(), &[("o", &["A"])]),
        rule(pos(), &[("bond", &["A", "B"]), ("c", &["A"]), ("o", &["B"])]),
        rule(pos(), &[("alpha2_1", &["A"]), ("h", &["A"])]),
        rule(pos(), &[("alpha1_2", &["A"]), ("bond", &["A", "B"]), ("alpha2_2", &["B"])]),
        rule(pos(), &[("bond", &["A", "A"])]),
    ];
    for c in &candidates {
        let a = cached.score(c).unwrap();
        let b = plain.score(c).unwrap();
        assert_eq!(a.inert, b.inert, "{c}");
        assert!((a.score - b.score).abs() < 1e-9, "{c}: {} vs {}", a.score, b.score);
        for (x, y) in a.weights.values().iter().zip(b.weights.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn cached_scores_equal_uncached_with_conjunction_placement() {
    let data = planted(2, 30);
    let (t, w) = one_iteration_state(&data);
    let mut cfg = quick_train();
    cfg.network.placement = lrnn::RuleWeightPlacement::Conjunction;
    let c = rule(pos(), &[("bond", &["A", "B"]), ("alpha1_1", &["B"])]);
    let a = Scorer::new(&t, &w, &data, &cfg, true).unwrap().score(&c).unwrap();
    let b = Scorer::new(&t, &w, &data, &cfg, false).unwrap().score(&c).unwrap();
    assert!((a.score - b.score).abs() < 1e-9);
}

#[test]
fn inert_candidate_scores_the_current_model() {
    let data = planted(3, 30);
    let (t, w) = one_iteration_state(&data);
    let cfg = quick_train();
    for use_cache in [true, false] {
        let scorer = Scorer::new(&t, &w, &data, &cfg, use_cache).unwrap();
        let s = scorer.score(&rule(pos(), &[("zz", &["A"])])).unwrap();
        assert!(s.inert);
        assert_eq!(s.score, scorer.current_log_loss().unwrap());
    }
}

#[test]
fn scoring_leaves_inputs_untouched() {
    let data = planted(4, 30);
    let (t, w) = one_iteration_state(&data);
    let (t0, w0) = (t.clone(), w.clone());
    let frozen0 = w.frozen_keys();
    let c = rule(pos(), &[("bond", &["A", "B"]), ("o", &["B"])]);
    score_rule(&c, &t, &w, &data, &quick_train()).unwrap();
    Scorer::new(&t, &w, &data, &quick_train(), true).unwrap().score(&c).unwrap();
    assert_eq!(t, t0);
    assert_eq!(w, w0);
    assert_eq!(w.frozen_keys(), frozen0);
}

#[test]
fn true_rule_beats_every_single_literal_rule() {
    let data = planted(5, 100);
    let t = create_layer1_rules(&data, 3).unwrap();
    let w = WeightStore::uniform(t.len(), 5);
    let cfg = quick_train();
    let scorer = Scorer::new(&t, &w, &data, &cfg, true).unwrap();
    let truth = scorer.score(&Clause::new(pos(), default_pattern())).unwrap().score;
    let search = SearchConfig::default();
    let seeds = seed_candidates(&target_head("pos".into(), 0), &vocabulary(&t, &data), &search);
    assert!(seeds.len() > 5);
    for s in seeds {
        let score = scorer.score(&s.clause).unwrap().score;
        assert!(truth < score, "{} scored {score} <= {truth}", s.clause);
    }
}

#[test]
fn unbounded_beam_of_length_one_is_exhaustive() {
    let data = planted(6, 40);
    let t = create_layer1_rules(&data, 2).unwrap();
    let w = WeightStore::uniform(t.len(), 6);
    let cfg = quick_train();
    let search = SearchConfig { beam_width: usize::MAX, max_rule_length: 1, ..Default::default() };
    let SearchOutcome::Found(found) = beam_search(&t, &w, &data, &search, &cfg).unwrap() else {
        panic!("expected a rule");
    };
    let scorer = Scorer::new(&t, &w, &data, &cfg, true).unwrap();
    let seeds = seed_candidates(&target_head("pos".into(), 0), &vocabulary(&t, &data), &search);
    let mut scored: Vec<CandidateRule> = seeds
        .into_iter()
        .map(|mut c| {
            c.score = scorer.score(&c.clause).unwrap().score;
            c
        })
        .collect();
    scored.sort_by(|a, b| a.ranking(b));
    assert_eq!(found.evaluated, scored.len());
    assert_eq!(found.best.clause, scored[0].clause);
    assert_eq!(found.best.score, scored[0].score);
    assert_eq!(found.final_beam.len(), scored.len());
}

#[test]
fn best_rule_is_no_worse_than_the_final_beam() {
    let data = planted(7, 40);
    let t = create_layer1_rules(&data, 2).unwrap();
    let w = WeightStore::uniform(t.len(), 7);
    let search = SearchConfig { max_rule_length: 3, beam_width: 3, ..Default::default() };
    let SearchOutcome::Found(found) = beam_search(&t, &w, &data, &search, &quick_train()).unwrap() else {
        panic!("expected a rule");
    };
    assert!(!found.final_beam.is_empty());
    for r in &found.final_beam {
        assert!(found.best.score <= r.score);
        assert!(r.clause.body.len() <= 3);
        assert!(r.clause.variables().len() <= search.max_variables);
    }
    assert_eq!(found.weights.len(), t.len() + 1);
}

#[test]
fn cached_and_uncached_searches_agree() {
    let data = planted(8, 30);
    let t = create_layer1_rules(&data, 2).unwrap();
    let w = WeightStore::uniform(t.len(), 8);
    let search = SearchConfig { max_rule_length: 2, beam_width: 2, ..Default::default() };
    let plain = SearchConfig { use_cache: false, ..search.clone() };
    let a = beam_search(&t, &w, &data, &search, &quick_train()).unwrap();
    let b = beam_search(&t, &w, &data, &plain, &quick_train()).unwrap();
    match (a, b) {
        (SearchOutcome::Found(a), SearchOutcome::Found(b)) => {
            assert_eq!(a.best.clause, b.best.clause);
            assert!((a.best.score - b.best.score).abs() < 1e-9);
        }
        other => panic!("unexpected outcomes {other:?}"),
    }
}

/// Identical molecules with random labels: no rule can separate them.
fn structureless(n: usize) -> Dataset {
    let mut molecule = Example::new("m");
    for (p, args) in [
        ("c", &["a1"][..]),
        ("o", &["a2"]),
        ("h", &["a3"]),
        ("bond", &["a1", "a2"]),
        ("bond", &["a2", "a1"]),
        ("bond", &["a1", "a3"]),
        ("bond", &["a3", "a1"]),
    ] {
        molecule = molecule.with_fact(Atom::parse_args(p, args), 1.0);
    }
    let mut data = Dataset::default();
    let labels = [1.0, 0.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0];
    for i in 0..n {
        let mut m = molecule.clone();
        m.id = format!("m{i}");
        data.push(m, vec![Query::new(pos(), labels[i % labels.len()])]);
    }
    data
}

#[test]
fn labels_independent_of_structure_give_no_rule() {
    let data = structureless(24);
    let mut t = create_layer1_rules(&data, 2).unwrap();
    t.push(rule(pos(), &[("bond", &["A", "B"])])).unwrap();
    let full_batch = TrainConfig {
        learning_rate: 0.05,
        minibatch_size: data.len(),
        loss: LossKind::Logistic,
        execution: Execution::Sequential,
        ..Default::default()
    };
    let w = WeightStore::uniform(t.len(), 1);
    let latents = t.keys_with_kind(HeadKind::Latent);
    let fitted = train_weights(&t, &data, &w, &full_batch, &latents).unwrap().weights;
    let search = SearchConfig { max_rule_length: 2, ..Default::default() };
    match beam_search(&t, &fitted, &data, &search, &full_batch).unwrap() {
        SearchOutcome::NoRuleFound { best, baseline } => {
            let best = best.unwrap();
            assert!(baseline - best.score < search.min_score_improvement);
        }
        SearchOutcome::Found(f) => panic!("found {} ({} vs {})", f.best.clause, f.best.score, f.baseline),
    }
}

#[test]
fn zero_iterations_return_layer1_only() {
    let data = planted(9, 20);
    let cfg =
        LearnConfig { search: SearchConfig { max_iterations: 0, d: 2, ..Default::default() }, train: quick_train() };
    let out = structure_learn(&data, &cfg).unwrap();
    assert_eq!(out.template.len(), 2 * data.unary_predicates().len());
    assert!(out.history.is_empty());
    let m = evaluate(&out.template, &out.weights, &data, cfg.train.network, cfg.train.execution).unwrap();
    // every query is absent, so every output is 0 and only negatives are right
    assert_eq!(m.accuracy, 0.5);
}

#[test]
fn iterations_keep_bookkeeping_and_stratification() {
    let data = planted(10, 60);
    let cfg = LearnConfig {
        search: SearchConfig {
            max_iterations: 3,
            max_rule_length: 3,
            beam_width: 3,
            d: 2,
            min_score_improvement: 0.0,
            ..Default::default()
        },
        train: quick_train(),
    };
    let layer1 = 2 * data.unary_predicates().len();
    let mut expected_rules = layer1;
    let mut names = BTreeSet::new();
    let mut seen_latents = 0;
    let mut check = |t: &Template, w: &WeightStore, r: &IterationRecord| {
        expected_rules += 1 + r.invented.len();
        assert_eq!(t.len(), expected_rules);
        assert_eq!(w.len(), t.len());
        assert!(t.check_stratification().is_ok());
        assert_eq!(r.invented.len(), 2 * r.rule.variables().len());
        assert!(r.metrics.log_loss <= r.score + 1e-6);
        for l in &t.latents()[seen_latents..] {
            assert!(names.insert(l.name), "duplicate latent {}", l.name);
        }
        seen_latents = t.latents().len();
        assert!(w.frozen_keys().is_empty());
    };
    let out = structure_learn_with(&data, &cfg, &mut check).unwrap();
    assert!(!out.history.is_empty());
    assert_eq!(out.template.len(), expected_rules);
}

#[test]
fn learning_is_deterministic_across_execution_modes() {
    let data = planted(11, 40);
    let run = |execution| {
        let cfg = LearnConfig {
            search: SearchConfig { max_iterations: 2, max_rule_length: 2, beam_width: 2, d: 2, ..Default::default() },
            train: TrainConfig { epochs: 40, execution, ..Default::default() },
        };
        let out = structure_learn(&data, &cfg).unwrap();
        serialize_template(&out.template, &out.weights)
    };
    let a = run(Execution::Sequential);
    assert_eq!(a, run(Execution::Sequential));
    assert_eq!(a, run(Execution::Parallel));
}
