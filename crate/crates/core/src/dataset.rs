use std::collections::{BTreeMap, BTreeSet};

use crate::logic::{Atom, Clause};
use crate::symbol::Symbol;

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedFact {
    pub atom: Atom,
    pub weight: f64,
}

/// One learning example: a weighted set of ground facts.
#[derive(Clone, Debug, PartialEq)]
pub struct Example {
    pub id: String,
    pub facts: Vec<WeightedFact>,
}

impl Example {
    pub fn new(id: impl Into<String>) -> Self {
        Example { id: id.into(), facts: Vec::new() }
    }

    pub fn with_fact(mut self, atom: Atom, weight: f64) -> Self {
        self.facts.push(WeightedFact { atom, weight });
        self
    }

    pub fn fact_clauses(&self) -> Vec<Clause> {
        self.facts.iter().map(|f| Clause::fact(f.atom.clone())).collect()
    }
}

/// A training query atom with its target value in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub atom: Atom,
    pub target: f64,
}

impl Query {
    pub fn new(atom: Atom, target: f64) -> Self {
        Query { atom, target }
    }

    pub fn is_positive(&self) -> bool {
        self.target >= 0.5
    }
}

/// Queries grouped per example, parallel to the example list.
pub type QuerySet = Vec<Vec<Query>>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub queries: QuerySet,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn push(&mut self, example: Example, queries: Vec<Query>) {
        self.examples.push(example);
        self.queries.push(queries);
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
            queries: indices.iter().map(|&i| self.queries[i].clone()).collect(),
        }
    }

    /// Predicates (with arity) occurring in example facts.
    pub fn fact_predicates(&self) -> BTreeMap<Symbol, usize> {
        let mut out = BTreeMap::new();
        for e in &self.examples {
            for f in &e.facts {
                out.insert(f.atom.predicate, f.atom.arity());
            }
        }
        out
    }

    /// Predicates (with arity) occurring in queries.
    pub fn target_predicates(&self) -> BTreeMap<Symbol, usize> {
        let mut out = BTreeMap::new();
        for qs in &self.queries {
            for q in qs {
                out.insert(q.atom.predicate, q.atom.arity());
            }
        }
        out
    }

    pub fn unary_predicates(&self) -> BTreeSet<Symbol> {
        let targets = self.target_predicates();
        self.fact_predicates()
            .into_iter()
            .filter(|(p, a)| *a == 1 && !targets.contains_key(p))
            .map(|(p, _)| p)
            .collect()
    }

    /// Class of an example, taken from its first query.
    pub fn label(&self, index: usize) -> Option<bool> {
        self.queries[index].first().map(Query::is_positive)
    }
}
