mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use lrnn::autodiff::{backward, forward, g_and, g_or, sigm};
use lrnn::dataset::{Dataset, Query};
use lrnn::io::{
    cross_validate, default_pattern, generate_planted, parse_template, serialize_template, template_stats,
    write_history_csv, CrossValidation, GeneratorConfig, TemplateStats,
};
use lrnn::logic::{active_ground_rules, least_herbrand_model};
use lrnn::network::build_network;
use lrnn::structure::{invent_predicates, structure_learn_with, LearnConfig, LearnOutcome};
use lrnn::train::{batch_gradient, LossKind, NetworkModel, TrainConfig};
use lrnn::{
    Atom, Clause, Example, Execution, HeadKind, NetworkParams, RuleWeightPlacement, Symbol, Template, WeightKey,
    WeightStore,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn a(p: &str, args: &[&str]) -> Atom {
    Atom::parse_args(p, args)
}

fn activation_fidelity() -> Outcome {
    let tol = 1e-5;
    ensure((sigm(3.0) - 0.952574).abs() <= tol, || format!("sigm(3) = {}", sigm(3.0)))?;
    ensure((sigm(-3.0) - 0.047426).abs() <= tol, || format!("sigm(-3) = {}", sigm(-3.0)))?;
    let or1 = g_or(&[1.0]);
    let and_mixed = g_and(&[1.0, 0.0]).map_err(|e| e.to_string())?;
    ensure((or1 - 0.952574).abs() <= tol, || format!("g_or([1]) = {or1}"))?;
    ensure((and_mixed - 0.047426).abs() <= tol, || format!("g_and([1,0]) = {and_mixed}"))?;
    let mut worst: f64 = 0.0;
    for k in 1..=4usize {
        for bits in 0..(1u32 << k) {
            let b: Vec<f64> = (0..k).map(|i| ((bits >> i) & 1) as f64).collect();
            let s: f64 = b.iter().sum();
            let and = g_and(&b).map_err(|e| e.to_string())?;
            worst = worst.max((and - (s - k as f64 + 1.0).max(0.0)).abs());
            worst = worst.max((g_or(&b) - s.min(1.0)).abs());
        }
    }
    ensure(worst <= 0.05, || format!("corner deviation {worst}"))?;
    Ok(format!("max corner deviation {worst:.6}"))
}

fn grounding_oracle() -> Outcome {
    let mut atoms = 0;
    for seed in 0..200u64 {
        let (template, example) = common::random_program(seed);
        let program = common::program_of(&template, &example);
        let model = common::brute_force_model(&program);
        ensure(least_herbrand_model(&program) == model, || format!("model differs for seed {seed}"))?;
        let got: BTreeSet<(usize, Clause)> = active_ground_rules(&template, &example)
            .into_iter()
            .map(|g| (common::origin_index(&template, g.origin), g.clause))
            .collect();
        ensure(got == common::brute_force_active(&program), || format!("active rules differ for seed {seed}"))?;
        atoms += model.len();
    }
    Ok(format!("200 programs, {atoms} derived atoms in total"))
}

fn forward_golden() -> Outcome {
    let mut t = Template::new();
    t.push(Clause::new(a("p", &["X", "Y"]), vec![a("bond", &["X", "Y"])])).map_err(|e| e.to_string())?;
    let e = Example::new("e").with_fact(a("bond", &["a", "b"]), 1.0);
    let net = build_network(&t, &e, &[a("p", &["a", "b"])]).map_err(|e| e.to_string())?;
    let tape = forward(&net, &WeightStore::from_values(vec![0.5]), &NetworkParams::default());
    let value = tape.query_output(&net, 0);
    ensure((value - 0.453541).abs() <= 1e-4, || format!("A_p(a,b) = {value}"))?;
    Ok(format!("A_p(a,b) = {value:.6}"))
}

fn gradient_check() -> Outcome {
    let mut worst: f64 = 0.0;
    for placement in [RuleWeightPlacement::Aggregation, RuleWeightPlacement::Conjunction] {
        let p = NetworkParams { placement, ..Default::default() };
        for seed in 0..100 {
            let n = common::random_network(seed);
            ensure(n.net.len() <= 50, || format!("seed {seed} has {} neurons", n.net.len()))?;
            let analytic = common::analytic_gradient(&n.net, &n.queries, &n.weights, &p);
            let numeric = common::numeric_gradient(&n.net, &n.queries, &n.weights, &p, 1e-5);
            for (x, y) in analytic.iter().zip(&numeric) {
                worst = worst.max(common::relative_error(*x, *y));
            }
        }
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:e}"))?;
    Ok(format!("max relative error {worst:.2e} over 2 x 100 networks"))
}

fn weight_sharing() -> Outcome {
    let base = common::random_network(11);
    let mut data = Dataset::default();
    for seed in 0..12 {
        let n = common::random_network(1000 + seed);
        data.push(n.example, base.queries.iter().map(|q| Query::new(q.0.clone(), q.1)).collect());
    }
    let keys: Vec<WeightKey> = base.template.clauses().iter().map(|c| c.key).collect();
    let p = NetworkParams::default();
    let model =
        NetworkModel::build(&base.template, &keys, &data, p, Execution::Sequential).map_err(|e| e.to_string())?;
    let pairs: Vec<(usize, usize)> =
        (0..data.len()).flat_map(|e| (0..data.queries[e].len()).map(move |q| (e, q))).collect();
    let mut sum = vec![0.0; base.weights.len()];
    for (e, net) in model.networks.iter().enumerate() {
        let tape = forward(net, &base.weights, &p);
        let grads: Vec<(usize, f64)> = data.queries[e]
            .iter()
            .enumerate()
            .filter(|(i, _)| net.query_outputs()[*i].is_some())
            .map(|(i, q)| (i, 2.0 * (tape.query_output(net, i) - q.target)))
            .collect();
        for (k, g) in backward(net, &tape, &base.weights, &p, &grads).iter() {
            sum[k.0] += g;
        }
    }
    let mut worst: f64 = 0.0;
    for exec in [Execution::Sequential, Execution::Parallel] {
        let batch = batch_gradient(&model, &data.queries, &base.weights, &pairs, LossKind::Squared, exec);
        for (b, s) in batch.iter().zip(&sum) {
            worst = worst.max((b - s).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    Ok(format!("{} shared keys, max deviation {worst:.1e}", keys.len()))
}

fn planted_config(execution: Execution) -> LearnConfig {
    LearnConfig { search: Default::default(), train: TrainConfig { execution, ..Default::default() } }
}

struct PlantedRun {
    outcome: LearnOutcome,
    serialized: String,
    history_csv: Vec<u8>,
    stratification_failures: Vec<usize>,
    iterations_checked: usize,
    learn_time: Duration,
    cv: CrossValidation,
    cv_csv: Vec<u8>,
}

fn planted_run(execution: Execution) -> Result<PlantedRun, String> {
    let data = generate_planted(&GeneratorConfig::new(42, 200, default_pattern())).map_err(|e| e.to_string())?;
    let cfg = planted_config(execution);
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut observe = |t: &Template, _: &WeightStore, r: &lrnn::structure::IterationRecord| {
        checked += 1;
        if t.check_stratification().is_err() {
            failures.push(r.iteration);
        }
    };
    let start = Instant::now();
    let outcome = structure_learn_with(&data, &cfg, &mut observe).map_err(|e| e.to_string())?;
    let learn_time = start.elapsed();
    let mut history_csv = Vec::new();
    write_history_csv(&mut history_csv, &outcome.history).map_err(|e| e.to_string())?;
    let cv = cross_validate(&data, 5, &cfg).map_err(|e| e.to_string())?;
    let mut cv_csv = Vec::new();
    cv.write_csv(&mut cv_csv).map_err(|e| e.to_string())?;
    Ok(PlantedRun {
        serialized: serialize_template(&outcome.template, &outcome.weights),
        outcome,
        history_csv,
        stratification_failures: failures,
        iterations_checked: checked,
        learn_time,
        cv,
        cv_csv,
    })
}

fn structure_recovery(run: &PlantedRun) -> Outcome {
    let reached = run.outcome.history.iter().find(|r| r.metrics.accuracy >= 0.95).map(|r| r.iteration);
    let cv_acc = run.cv.mean_test_accuracy();
    let rules: Vec<String> = run.outcome.history.iter().map(|r| r.rule.to_string()).collect();
    ensure(reached.is_some_and(|i| i <= 5), || {
        format!("training accuracy never reached 0.95 within 5 iterations; rules {rules:?}")
    })?;
    ensure(cv_acc >= 0.90, || format!("5-fold test accuracy {cv_acc:.4}"))?;
    Ok(format!(
        "accuracy >= 0.95 at iteration {}, learn {:.1}s, 5-fold test accuracy {cv_acc:.4}",
        reached.unwrap(),
        run.learn_time.as_secs_f64()
    ))
}

fn predicate_invention() -> Outcome {
    for d in 1..=5usize {
        let mut t = Template::new();
        t.add_target("p".into(), 2).map_err(|e| e.to_string())?;
        t.declare_latent("alpha1_2".into(), 1, 1).map_err(|e| e.to_string())?;
        t.declare_latent("alpha2_5".into(), 1, 2).map_err(|e| e.to_string())?;
        let best = Clause::new(
            a("p", &["A", "B"]),
            vec![a("bond", &["A", "B"]), a("alpha1_2", &["A"]), a("alpha2_5", &["B"])],
        );
        let rules = invent_predicates(&best, &mut t, d, 1, &BTreeSet::new()).map_err(|e| e.to_string())?;
        ensure(rules.len() == 2 * d, || format!("d = {d}: {} rules", rules.len()))?;
        let mut expected = BTreeSet::new();
        for j in 1..=d {
            let head = format!("alpha3_{j}");
            expected.insert(Clause::new(
                a(&head, &["V1"]),
                vec![a("bond", &["V1", "B"]), a("alpha1_2", &["V1"]), a("alpha2_5", &["B"])],
            ));
            expected.insert(Clause::new(
                a(&head, &["V1"]),
                vec![a("bond", &["A", "V1"]), a("alpha1_2", &["A"]), a("alpha2_5", &["V1"])],
            ));
            let layer = t.latent(Symbol::new(&head)).map(|l| l.layer);
            ensure(layer == Some(3), || format!("{head} at layer {layer:?}"))?;
        }
        let got: BTreeSet<Clause> = rules.into_iter().collect();
        ensure(got == expected, || format!("d = {d}: rules {got:?}"))?;
    }
    Ok("2d rules at layer 3 for d = 1..5".into())
}

fn stacking(run: &PlantedRun) -> Outcome {
    ensure(run.iterations_checked > 0, || "no iterations ran".into())?;
    ensure(run.stratification_failures.is_empty(), || {
        format!("stratification failed after iterations {:?}", run.stratification_failures)
    })?;
    Ok(format!("{} iterations checked", run.iterations_checked))
}

fn determinism(first: &PlantedRun, second: &PlantedRun) -> Outcome {
    ensure(first.serialized == second.serialized, || "template serializations differ".into())?;
    ensure(first.history_csv == second.history_csv, || "history CSVs differ".into())?;
    ensure(first.cv_csv == second.cv_csv, || "cross-validation CSVs differ".into())?;
    Ok(format!(
        "{} template bytes, {} + {} CSV bytes identical (sequential vs parallel)",
        first.serialized.len(),
        first.history_csv.len(),
        first.cv_csv.len()
    ))
}

fn stats_through_text(t: &Template) -> Result<TemplateStats, String> {
    let w = WeightStore::uniform(t.len(), 0);
    let (back, _) = parse_template(&serialize_template(t, &w)).map_err(|e| e.to_string())?;
    Ok(template_stats(&back))
}

fn template_statistics() -> Outcome {
    let mut t = Template::new();
    t.add_target("pos".into(), 0).map_err(|e| e.to_string())?;
    for j in 1..=2 {
        let name = format!("alpha1_{j}");
        t.declare_latent(Symbol::new(&name), 1, 1).map_err(|e| e.to_string())?;
        for u in ["c", "h", "o"] {
            t.push(Clause::new(a(&name, &["X"]), vec![a(u, &["X"])])).map_err(|e| e.to_string())?;
        }
    }
    let expect = |t: &Template, rules, patterns, avg, depth| -> Result<(), String> {
        let s = stats_through_text(t)?;
        let want = TemplateStats { rules, learned_patterns: patterns, avg_pattern_length: avg, depth };
        ensure(s == want, || format!("got {s:?}, expected {want:?}"))
    };
    expect(&t, 6, 0, 0.0, 2)?;

    let rule = Clause::new(a("pos", &[]), vec![a("bond", &["A", "B"]), a("c", &["A"]), a("o", &["B"])]);
    t.push(rule.clone()).map_err(|e| e.to_string())?;
    for c in invent_predicates(&rule, &mut t, 2, 1, &BTreeSet::new()).map_err(|e| e.to_string())? {
        t.push(c).map_err(|e| e.to_string())?;
    }
    expect(&t, 6 + 1 + 4, 1, 3.0, 3)?;

    let deep = Clause::new(a("pos", &[]), vec![a("alpha2_1", &["A"]), a("alpha1_1", &["A"])]);
    t.push(deep.clone()).map_err(|e| e.to_string())?;
    for c in invent_predicates(&deep, &mut t, 2, 1, &BTreeSet::new()).map_err(|e| e.to_string())? {
        t.push(c).map_err(|e| e.to_string())?;
    }
    let latents_at_3 = t.clauses().iter().filter(|c| c.layer == 3 && c.head_kind == HeadKind::Latent).count();
    ensure(latents_at_3 == 2, || format!("{latents_at_3} latent rules at layer 3"))?;
    expect(&t, 6 + 1 + 4 + 1 + 2, 2, 2.5, 4)?;
    Ok("three constructed templates match exactly".into())
}

fn run(id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let elapsed = start.elapsed();
    let result = match (result, limit) {
        (Ok(_), Some(l)) if elapsed > l => {
            Err(format!("took {:.2}s, limit {:.0}s", elapsed.as_secs_f64(), l.as_secs_f64()))
        }
        (r, _) => r,
    };
    let (tag, detail) = match &result {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("{tag} criterion {id:>2} {name} [{:.2}s]: {detail}", elapsed.as_secs_f64());
    result.is_ok()
}

fn main() {
    let secs = |s| Some(Duration::from_secs(s));
    let mut ok = true;
    ok &= run(1, "activation fidelity", secs(1), activation_fidelity);
    ok &= run(2, "grounding oracle equivalence", secs(10), grounding_oracle);
    ok &= run(3, "forward-pass golden value", secs(1), forward_golden);
    ok &= run(4, "gradient correctness", secs(30), gradient_check);
    ok &= run(5, "weight sharing", secs(5), weight_sharing);

    let mut first: Result<PlantedRun, String> = Err("planted run did not complete".into());
    ok &= run(6, "structure recovery", secs(300), || {
        first = planted_run(Execution::Sequential);
        structure_recovery(first.as_ref().map_err(Clone::clone)?)
    });
    ok &= run(7, "predicate-invention combinatorics", secs(1), predicate_invention);
    ok &= run(8, "stacking invariant", None, || stacking(first.as_ref().map_err(Clone::clone)?));
    ok &= run(9, "determinism", None, || {
        let a = first.as_ref().map_err(Clone::clone)?;
        let b = planted_run(Execution::Parallel)?;
        determinism(a, &b)
    });
    ok &= run(10, "template statistics", secs(1), template_statistics);
    if !ok {
        std::process::exit(1);
    }
}
