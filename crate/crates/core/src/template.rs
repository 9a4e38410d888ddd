//! Weighted rule templates: the lifted network shared by all examples.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};
use crate::logic::{Atom, Clause};
use crate::symbol::Symbol;

/// Identity of a trainable parameter. Each template clause owns exactly one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightKey(pub usize);

impl fmt::Display for WeightKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "w{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    Dataset,
    Latent,
    Target,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedClause {
    pub clause: Clause,
    pub key: WeightKey,
    pub layer: usize,
    pub head_kind: HeadKind,
}

/// An invented predicate. `index` numbers predicates within a layer from 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LatentPredicate {
    pub name: Symbol,
    pub layer: usize,
    pub index: usize,
    pub arity: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Template {
    clauses: Vec<WeightedClause>,
    targets: BTreeMap<Symbol, usize>,
    latents: Vec<LatentPredicate>,
    arities: BTreeMap<Symbol, usize>,
}

impl Template {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn clauses(&self) -> &[WeightedClause] {
        &self.clauses
    }

    pub fn get(&self, key: WeightKey) -> &WeightedClause {
        &self.clauses[key.0]
    }

    pub fn targets(&self) -> &BTreeMap<Symbol, usize> {
        &self.targets
    }

    pub fn latents(&self) -> &[LatentPredicate] {
        &self.latents
    }

    pub fn latent(&self, name: Symbol) -> Option<&LatentPredicate> {
        self.latents.iter().find(|l| l.name == name)
    }

    pub fn is_target(&self, pred: Symbol) -> bool {
        self.targets.contains_key(&pred)
    }

    fn check_arity(&self, pred: Symbol, arity: usize) -> Result<()> {
        match self.arities.get(&pred) {
            Some(&expected) if expected != arity => {
                Err(Error::Arity { predicate: pred.to_string(), expected, found: arity })
            }
            _ => Ok(()),
        }
    }

    pub fn add_target(&mut self, pred: Symbol, arity: usize) -> Result<()> {
        self.check_arity(pred, arity)?;
        if self.latent(pred).is_some() {
            return Err(Error::Config(format!("{pred} is already latent")));
        }
        self.arities.insert(pred, arity);
        self.targets.insert(pred, arity);
        Ok(())
    }

    pub fn declare_latent(&mut self, name: Symbol, arity: usize, layer: usize) -> Result<()> {
        if layer == 0 {
            return Err(Error::Config(format!("latent predicate {name} at layer 0")));
        }
        if self.latent(name).is_some() || self.targets.contains_key(&name) {
            return Err(Error::Config(format!("predicate {name} declared twice")));
        }
        self.check_arity(name, arity)?;
        let index = self.latents.iter().filter(|l| l.layer == layer).count() + 1;
        self.arities.insert(name, arity);
        self.latents.push(LatentPredicate { name, layer, index, arity });
        Ok(())
    }

    /// Declares a new latent predicate at `layer` whose name collides with no
    /// predicate of the template or of `reserved`.
    pub fn fresh_latent(&mut self, layer: usize, arity: usize, reserved: &BTreeSet<Symbol>) -> Result<Symbol> {
        let mut index = self.latents.iter().filter(|l| l.layer == layer).count() + 1;
        loop {
            let name = Symbol::new(&format!("alpha{layer}_{index}"));
            if !self.arities.contains_key(&name) && !reserved.contains(&name) {
                self.declare_latent(name, arity, layer)?;
                return Ok(name);
            }
            index += 1;
        }
    }

    /// Layer of a predicate: its declared layer if latent, else 0.
    pub fn predicate_layer(&self, pred: Symbol) -> usize {
        self.latent(pred).map_or(0, |l| l.layer)
    }

    fn head_kind(&self, pred: Symbol) -> HeadKind {
        if self.latent(pred).is_some() {
            HeadKind::Latent
        } else if self.targets.contains_key(&pred) {
            HeadKind::Target
        } else {
            HeadKind::Dataset
        }
    }

    /// Appends a clause with the next free weight key.
    pub fn push(&mut self, clause: Clause) -> Result<WeightKey> {
        for atom in std::iter::once(&clause.head).chain(&clause.body) {
            self.check_arity(atom.predicate, atom.arity())?;
        }
        for atom in std::iter::once(&clause.head).chain(&clause.body) {
            self.arities.insert(atom.predicate, atom.arity());
        }
        let head_kind = self.head_kind(clause.head.predicate);
        let layer = match head_kind {
            HeadKind::Latent => self.predicate_layer(clause.head.predicate),
            _ if clause.body.is_empty() => 0,
            _ => 1 + clause.body.iter().map(|b| self.predicate_layer(b.predicate)).max().unwrap_or(0),
        };
        let key = WeightKey(self.clauses.len());
        self.clauses.push(WeightedClause { clause, key, layer, head_kind });
        Ok(key)
    }

    pub fn keys_with_kind(&self, kind: HeadKind) -> Vec<WeightKey> {
        self.clauses.iter().filter(|c| c.head_kind == kind).map(|c| c.key).collect()
    }

    /// Predicates that can influence some target atom.
    pub fn relevant_predicates(&self) -> BTreeSet<Symbol> {
        let mut relevant: BTreeSet<Symbol> = self.targets.keys().copied().collect();
        loop {
            let before = relevant.len();
            for c in &self.clauses {
                if relevant.contains(&c.clause.head.predicate) {
                    relevant.extend(c.clause.body.iter().map(|b| b.predicate));
                }
            }
            if relevant.len() == before {
                return relevant;
            }
        }
    }

    /// Clauses whose head is a relevant predicate, i.e. the part of the
    /// template that any query output depends on.
    pub fn relevant_keys(&self) -> Vec<WeightKey> {
        let relevant = self.relevant_predicates();
        self.clauses.iter().filter(|c| relevant.contains(&c.clause.head.predicate)).map(|c| c.key).collect()
    }

    /// Every latent-head clause at layer n may only use predicates of layers
    /// below n in its body.
    pub fn check_stratification(&self) -> std::result::Result<(), String> {
        for c in &self.clauses {
            if c.head_kind != HeadKind::Latent {
                continue;
            }
            for b in &c.clause.body {
                let l = self.predicate_layer(b.predicate);
                if l >= c.layer {
                    return Err(format!(
                        "clause `{}` at layer {} uses {} from layer {}",
                        c.clause, c.layer, b.predicate, l
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn layer1_latents(&self) -> Vec<LatentPredicate> {
        self.latents.iter().filter(|l| l.layer == 1).copied().collect()
    }

    pub fn max_layer(&self) -> usize {
        self.clauses.iter().map(|c| c.layer).max().unwrap_or(0)
    }

    pub fn arity(&self, pred: Symbol) -> Option<usize> {
        self.arities.get(&pred).copied()
    }

    /// Latent predicates usable in rule bodies, with their arities.
    pub fn latent_vocabulary(&self) -> Vec<(Symbol, usize)> {
        self.latents.iter().map(|l| (l.name, l.arity)).collect()
    }

    pub fn head_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.clauses.iter().map(|c| &c.clause.head)
    }
}
