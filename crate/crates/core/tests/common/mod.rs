//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeSet;

use lrnn::autodiff::{backward, forward, NetworkParams};
use lrnn::logic::{Origin, Term};
use lrnn::network::build_network;
use lrnn::train::squared_loss;
use lrnn::{Atom, Clause, Example, GroundNetwork, Symbol, Template, WeightStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every constant of the program, sorted.
pub fn universe(program: &[Clause]) -> Vec<Symbol> {
    let mut out = BTreeSet::new();
    for c in program {
        for a in std::iter::once(&c.head).chain(&c.body) {
            for t in &a.args {
                if let Term::Const(s) = t {
                    out.insert(*s);
                }
            }
        }
    }
    out.into_iter().collect()
}

fn substitute(atom: &Atom, vars: &[Symbol], values: &[Symbol]) -> Atom {
    Atom::new(
        atom.predicate,
        atom.args
            .iter()
            .map(|t| match t {
                Term::Var(v) => Term::Const(values[vars.iter().position(|x| x == v).unwrap()]),
                c => *c,
            })
            .collect(),
    )
}

/// All ground instances of a clause over the universe, by plain enumeration.
pub fn ground_instances(clause: &Clause, universe: &[Symbol]) -> Vec<Clause> {
    let vars = clause.variables();
    if vars.is_empty() {
        return vec![clause.clone()];
    }
    if universe.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx = vec![0usize; vars.len()];
    loop {
        let values: Vec<Symbol> = idx.iter().map(|&i| universe[i]).collect();
        out.push(Clause::new(
            substitute(&clause.head, &vars, &values),
            clause.body.iter().map(|b| substitute(b, &vars, &values)).collect(),
        ));
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return out;
            }
            idx[pos] += 1;
            if idx[pos] < universe.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

/// Least Herbrand model by naive iteration of the immediate consequence
/// operator over the fully enumerated ground program.
pub fn brute_force_model(program: &[Clause]) -> BTreeSet<Atom> {
    let u = universe(program);
    let ground: Vec<Clause> = program.iter().flat_map(|c| ground_instances(c, &u)).collect();
    let mut model = BTreeSet::new();
    loop {
        let mut changed = false;
        for c in &ground {
            if !model.contains(&c.head) && c.body.iter().all(|b| model.contains(b)) {
                model.insert(c.head.clone());
                changed = true;
            }
        }
        if !changed {
            return model;
        }
    }
}

/// `(clause index, ground instance)` for every instance whose body holds.
pub fn brute_force_active(program: &[Clause]) -> BTreeSet<(usize, Clause)> {
    let u = universe(program);
    let model = brute_force_model(program);
    let mut out = BTreeSet::new();
    for (i, c) in program.iter().enumerate() {
        for g in ground_instances(c, &u) {
            if g.body.iter().all(|b| model.contains(b)) {
                out.insert((i, g));
            }
        }
    }
    out
}

const FACT_PREDS: [(&str, usize); 3] = [("e0", 1), ("e1", 2), ("e2", 0)];
const RULE_PREDS: [(&str, usize); 3] = [("d0", 1), ("d1", 2), ("d2", 0)];

fn random_term(rng: &mut ChaCha8Rng, consts: usize) -> Term {
    if rng.random_bool(0.8) {
        Term::var(["X", "Y", "Z"][rng.random_range(0..3)])
    } else {
        Term::constant(&format!("k{}", rng.random_range(0..consts)))
    }
}

fn random_atom(rng: &mut ChaCha8Rng, preds: &[(&str, usize)], consts: usize) -> Atom {
    let (p, arity) = preds[rng.random_range(0..preds.len())];
    Atom::new(p, (0..arity).map(|_| random_term(rng, consts)).collect())
}

/// A random (possibly recursive) program split into template rules and
/// example facts: at most 8 constants and at most 10 rules.
pub fn random_program(seed: u64) -> (Template, Example) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let consts = rng.random_range(1..=8);
    let mut example = Example::new("random");
    let mut seen = BTreeSet::new();
    for _ in 0..rng.random_range(0..12) {
        let (p, arity) = FACT_PREDS[rng.random_range(0..FACT_PREDS.len())];
        let atom =
            Atom::new(p, (0..arity).map(|_| Term::constant(&format!("k{}", rng.random_range(0..consts)))).collect());
        if seen.insert(atom.clone()) {
            example = example.with_fact(atom, 1.0);
        }
    }
    let mut template = Template::new();
    let all: Vec<(&str, usize)> = FACT_PREDS.iter().chain(&RULE_PREDS).copied().collect();
    for _ in 0..rng.random_range(1..=10) {
        let head = random_atom(&mut rng, &RULE_PREDS, consts);
        let body_len = rng.random_range(0..=3);
        let body: Vec<Atom> = (0..body_len).map(|_| random_atom(&mut rng, &all, consts)).collect();
        let clause = Clause::new(head, body);
        if clause.body.is_empty() && !clause.head.is_ground() {
            continue;
        }
        template.push(clause).unwrap();
    }
    (template, example)
}

/// Template clauses in key order followed by the example facts.
pub fn program_of(template: &Template, example: &Example) -> Vec<Clause> {
    template
        .clauses()
        .iter()
        .map(|c| c.clause.clone())
        .chain(example.facts.iter().map(|f| Clause::fact(f.atom.clone())))
        .collect()
}

pub fn origin_index(template: &Template, origin: Origin) -> usize {
    match origin {
        Origin::Template(k) => k.0,
        Origin::Example(i, _) => template.len() + i,
    }
}

/// A random layered template and example whose network has at most 50
/// neurons and at least one present query.
pub struct RandomNetwork {
    pub template: Template,
    pub example: Example,
    pub queries: Vec<(Atom, f64)>,
    pub net: GroundNetwork,
    pub weights: WeightStore,
}

pub fn random_network(seed: u64) -> RandomNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let consts = rng.random_range(2..=4);
        let c = |i: usize| Term::constant(&format!("k{i}"));
        let mut example = Example::new("net");
        let mut seen = BTreeSet::new();
        for _ in 0..rng.random_range(2..8) {
            let atom = if rng.random_bool(0.5) {
                Atom::new("u", vec![c(rng.random_range(0..consts))])
            } else {
                Atom::new("r", vec![c(rng.random_range(0..consts)), c(rng.random_range(0..consts))])
            };
            if seen.insert(atom.clone()) {
                example = example.with_fact(atom, rng.random_range(0.1..1.0));
            }
        }
        let x = Term::var("X");
        let y = Term::var("Y");
        let mut template = Template::new();
        template.add_target("t".into(), 1).unwrap();
        let layer0 = [Atom::new("u", vec![x]), Atom::new("r", vec![x, y]), Atom::new("u", vec![y])];
        for _ in 0..rng.random_range(1..4) {
            let n = rng.random_range(1..=2);
            let body: Vec<Atom> = (0..n).map(|_| layer0[rng.random_range(0..3)].clone()).collect();
            let head = if body.iter().any(|b| b.args.contains(&x)) { x } else { y };
            template.push(Clause::new(Atom::new("h", vec![head]), body)).unwrap();
        }
        if rng.random_bool(0.5) {
            template.push(Clause::fact(Atom::new("h", vec![c(0)]))).unwrap();
        }
        for _ in 0..rng.random_range(1..3) {
            let body = if rng.random_bool(0.5) {
                vec![Atom::new("h", vec![x])]
            } else {
                vec![Atom::new("r", vec![x, y]), Atom::new("h", vec![y])]
            };
            template.push(Clause::new(Atom::new("t", vec![x]), body)).unwrap();
        }
        let queries: Vec<(Atom, f64)> =
            (0..consts).map(|i| (Atom::new("t", vec![c(i)]), if rng.random_bool(0.5) { 1.0 } else { 0.0 })).collect();
        let atoms: Vec<Atom> = queries.iter().map(|q| q.0.clone()).collect();
        let Ok(net) = build_network(&template, &example, &atoms) else {
            continue;
        };
        if net.len() > 50 || net.query_outputs().iter().all(Option::is_none) {
            continue;
        }
        let weights = WeightStore::from_values((0..template.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
        return RandomNetwork { template, example, queries, net, weights };
    }
}

/// Summed squared loss over the queries.
pub fn network_loss(
    net: &GroundNetwork,
    queries: &[(Atom, f64)],
    weights: &WeightStore,
    params: &NetworkParams,
) -> f64 {
    let tape = forward(net, weights, params);
    queries.iter().enumerate().map(|(i, q)| squared_loss(tape.query_output(net, i), q.1)).sum()
}

pub fn analytic_gradient(
    net: &GroundNetwork,
    queries: &[(Atom, f64)],
    weights: &WeightStore,
    params: &NetworkParams,
) -> Vec<f64> {
    let tape = forward(net, weights, params);
    let loss_grads: Vec<(usize, f64)> = queries
        .iter()
        .enumerate()
        .filter(|(i, _)| net.query_outputs()[*i].is_some())
        .map(|(i, q)| (i, 2.0 * (tape.query_output(net, i) - q.1)))
        .collect();
    let g = backward(net, &tape, weights, params, &loss_grads);
    (0..weights.len()).map(|k| g.get(lrnn::WeightKey(k)).unwrap_or(0.0)).collect()
}

/// Central finite differences of the summed squared loss.
pub fn numeric_gradient(
    net: &GroundNetwork,
    queries: &[(Atom, f64)],
    weights: &WeightStore,
    params: &NetworkParams,
    eps: f64,
) -> Vec<f64> {
    (0..weights.len())
        .map(|k| {
            let key = lrnn::WeightKey(k);
            let mut plus = weights.clone();
            plus.set(key, weights.get(key) + eps);
            let mut minus = weights.clone();
            minus.set(key, weights.get(key) - eps);
            (network_loss(net, queries, &plus, params) - network_loss(net, queries, &minus, params)) / (2.0 * eps)
        })
        .collect()
}

/// Relative error with an absolute floor for gradients that vanish.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}
