//! Random molecule-like graphs labelled by a planted relational pattern.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, Example, Query};
use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, CompiledClause, FactBase, Term};

/// Atom types with their sampling weights.
pub const ELEMENTS: [(&str, f64); 5] = [("c", 0.40), ("h", 0.30), ("o", 0.12), ("n", 0.12), ("s", 0.06)];

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub molecules: usize,
    /// Conjunctive pattern over the element predicates and `bond/2`.
    pub pattern: Vec<Atom>,
    pub min_atoms: usize,
    pub max_atoms: usize,
    /// Randomly permute labels after generation, destroying the pattern signal.
    pub shuffle_labels: bool,
    /// Name of the nullary query predicate.
    pub target: String,
}

impl GeneratorConfig {
    pub fn new(seed: u64, molecules: usize, pattern: Vec<Atom>) -> Self {
        GeneratorConfig {
            seed,
            molecules,
            pattern,
            min_atoms: 5,
            max_atoms: 12,
            shuffle_labels: false,
            target: "pos".into(),
        }
    }
}

/// Default planted pattern: a carbon bonded to an oxygen.
pub fn default_pattern() -> Vec<Atom> {
    vec![Atom::parse_args("bond", &["X", "Y"]), Atom::parse_args("c", &["X"]), Atom::parse_args("o", &["Y"])]
}

/// True if some substitution maps every pattern literal onto a fact.
pub fn matches_pattern(example: &Example, pattern: &[Atom]) -> bool {
    let mut base = FactBase::new();
    for f in &example.facts {
        base.insert(f.atom.clone());
    }
    let clause = CompiledClause::new(&Clause::new(Atom::new("match", Vec::new()), pattern.to_vec()));
    let ranges = vec![(0u32, base.len() as u32); pattern.len()];
    let mut bindings = vec![None; clause.var_count()];
    let mut found = false;
    clause.for_each_match(&base, &ranges, &[], &mut bindings, &mut |_, _| found = true);
    found
}

fn molecule(rng: &mut ChaCha8Rng, id: String, min_atoms: usize, max_atoms: usize) -> Example {
    let n = rng.random_range(min_atoms..=max_atoms);
    let total: f64 = ELEMENTS.iter().map(|e| e.1).sum();
    let names: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
    let mut example = Example::new(id);
    for name in &names {
        let mut x = rng.random::<f64>() * total;
        let mut element = ELEMENTS[ELEMENTS.len() - 1].0;
        for (e, w) in ELEMENTS {
            if x < w {
                element = e;
                break;
            }
            x -= w;
        }
        example = example.with_fact(Atom::new(element, vec![Term::constant(name)]), 1.0);
    }
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    for _ in 0..n / 4 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let (a, b) = (a.min(b), a.max(b));
        if a != b && !edges.contains(&(a, b)) {
            edges.push((a, b));
        }
    }
    for (a, b) in edges {
        for (x, y) in [(a, b), (b, a)] {
            let atom = Atom::new("bond", vec![Term::constant(&names[x]), Term::constant(&names[y])]);
            example = example.with_fact(atom, 1.0);
        }
    }
    example
}

/// Generates a dataset with exactly `molecules / 2` (rounded up) positive
/// examples, sampling at most ten times as many molecules as requested.
pub fn generate_planted(cfg: &GeneratorConfig) -> Result<Dataset> {
    if cfg.molecules == 0 {
        return Err(Error::Config("number of molecules must be positive".into()));
    }
    if cfg.min_atoms == 0 || cfg.min_atoms > cfg.max_atoms {
        return Err(Error::Config("atom count range is empty".into()));
    }
    if cfg.pattern.is_empty() {
        return Err(Error::Config("planted pattern is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut need_pos = cfg.molecules.div_ceil(2);
    let mut need_neg = cfg.molecules - need_pos;
    let attempts = 10 * cfg.molecules;
    let mut accepted = Vec::with_capacity(cfg.molecules);
    for _ in 0..attempts {
        if need_pos + need_neg == 0 {
            break;
        }
        let id = format!("m{:03}", accepted.len() + 1);
        let m = molecule(&mut rng, id, cfg.min_atoms, cfg.max_atoms);
        let label = matches_pattern(&m, &cfg.pattern);
        let quota = if label { &mut need_pos } else { &mut need_neg };
        if *quota > 0 {
            *quota -= 1;
            accepted.push((m, label));
        }
    }
    if need_pos + need_neg > 0 {
        return Err(Error::Unbalanced { attempts });
    }
    let mut labels: Vec<bool> = accepted.iter().map(|m| m.1).collect();
    if cfg.shuffle_labels {
        labels.shuffle(&mut rng);
    }
    let mut data = Dataset::default();
    let target = Atom::new(cfg.target.as_str(), Vec::new());
    for ((m, _), label) in accepted.into_iter().zip(labels) {
        data.push(m, vec![Query::new(target.clone(), if label { 1.0 } else { 0.0 })]);
    }
    Ok(data)
}
