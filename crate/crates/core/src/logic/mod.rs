//! First-order terms, unification and bottom-up grounding.

mod herbrand;
mod term;
mod unify;

pub use herbrand::{
    ground_program, herbrand_universe, least_herbrand_model, CompiledClause, FactBase, GroundRule, Grounding,
};
pub use term::{Atom, Clause, Substitution, Term};
pub use unify::unify;

use crate::dataset::Example;
use crate::template::{Template, WeightKey};

/// Where a ground instance came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Origin {
    Template(WeightKey),
    /// Index into the example's fact list; carries the fixed fact weight.
    Example(usize, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundClause {
    pub clause: Clause,
    pub origin: Origin,
}

/// Builds the program `template ∪ example` restricted to the given template
/// keys, returning it together with the origin of each clause.
pub(crate) fn program_of<'a>(
    template: &'a Template,
    keys: &[WeightKey],
    example_facts: &'a [Clause],
    example: &Example,
) -> (Vec<&'a Clause>, Vec<Origin>) {
    let mut clauses = Vec::with_capacity(keys.len() + example_facts.len());
    let mut origins = Vec::with_capacity(clauses.capacity());
    for &k in keys {
        clauses.push(&template.get(k).clause);
        origins.push(Origin::Template(k));
    }
    for (i, c) in example_facts.iter().enumerate() {
        clauses.push(c);
        origins.push(Origin::Example(i, example.facts[i].weight));
    }
    (clauses, origins)
}

/// Every active ground instance of `template ∪ example`: each clause
/// instance whose body holds in the least Herbrand model, ground facts
/// included. Each instance remembers its weight key (or fixed fact weight).
pub fn active_ground_rules(template: &Template, example: &Example) -> Vec<GroundClause> {
    let keys: Vec<WeightKey> = template.clauses().iter().map(|c| c.key).collect();
    let facts = example.fact_clauses();
    let (program, origins) = program_of(template, &keys, &facts, example);
    let grounding = ground_program(&program);
    grounding
        .instances
        .iter()
        .map(|r| GroundClause {
            clause: Clause::new(
                grounding.model.atom(r.head).clone(),
                r.body.iter().map(|&b| grounding.model.atom(b).clone()).collect(),
            ),
            origin: origins[r.clause],
        })
        .collect()
}
