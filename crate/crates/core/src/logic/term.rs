use std::collections::BTreeMap;
use std::fmt;

use crate::symbol::Symbol;

/// A function-free first-order term.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Symbol),
    Var(Symbol),
}

impl Term {
    pub fn constant(name: &str) -> Self {
        Term::Const(Symbol::new(name))
    }

    pub fn var(name: &str) -> Self {
        Term::Var(Symbol::new(name))
    }

    pub fn is_var(&self) -> bool {
        matches!(self, Term::Var(_))
    }

    pub fn symbol(&self) -> Symbol {
        match self {
            Term::Const(s) | Term::Var(s) => *s,
        }
    }

    /// Prolog convention: uppercase or `_` initial is a variable, anything else a constant.
    pub fn from_name(name: &str) -> Self {
        match name.chars().next() {
            Some(c) if c.is_ascii_uppercase() || c == '_' => Term::var(name),
            _ => Term::constant(name),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub predicate: Symbol,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn new(predicate: impl Into<Symbol>, args: Vec<Term>) -> Self {
        Atom { predicate: predicate.into(), args }
    }

    /// Builds an atom from names, classifying each argument by case.
    pub fn parse_args(predicate: &str, args: &[&str]) -> Self {
        Atom::new(predicate, args.iter().map(|a| Term::from_name(a)).collect())
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }

    pub fn is_ground(&self) -> bool {
        self.args.iter().all(|t| !t.is_var())
    }

    pub fn variables(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.args.iter().filter_map(|t| match t {
            Term::Var(v) => Some(*v),
            Term::Const(_) => None,
        })
    }

    pub fn apply(&self, subst: &Substitution) -> Atom {
        Atom { predicate: self.predicate, args: self.args.iter().map(|t| subst.apply_term(*t)).collect() }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.predicate)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, t) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{t}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

/// `head <- body`; an empty body is a fact.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Clause {
    pub head: Atom,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn new(head: Atom, body: Vec<Atom>) -> Self {
        Clause { head, body }
    }

    pub fn fact(head: Atom) -> Self {
        Clause { head, body: Vec::new() }
    }

    pub fn is_fact(&self) -> bool {
        self.body.is_empty()
    }

    /// Distinct variables in order of first occurrence, head first.
    pub fn variables(&self) -> Vec<Symbol> {
        let mut out = Vec::new();
        for atom in std::iter::once(&self.head).chain(&self.body) {
            for v in atom.variables() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }

    pub fn apply(&self, subst: &Substitution) -> Clause {
        Clause { head: self.head.apply(subst), body: self.body.iter().map(|a| a.apply(subst)).collect() }
    }

    /// Renames every variable apart with the given suffix.
    pub fn standardize_apart(&self, suffix: &str) -> Clause {
        let mut subst = Substitution::new();
        for v in self.variables() {
            subst.bind(v, Term::Var(Symbol::new(&format!("{v}_{suffix}"))));
        }
        self.apply(&subst)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.head)?;
        if !self.body.is_empty() {
            f.write_str(" <- ")?;
            for (i, a) in self.body.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write!(f, "{a}")?;
            }
        }
        Ok(())
    }
}

/// Mapping from variables to terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Substitution {
    map: BTreeMap<Symbol, Term>,
}

impl Substitution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bind(&mut self, var: Symbol, term: Term) {
        self.map.insert(var, term);
    }

    pub fn get(&self, var: Symbol) -> Option<Term> {
        self.map.get(&var).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Symbol, Term)> + '_ {
        self.map.iter().map(|(k, v)| (*k, *v))
    }

    /// Follows variable chains to the final binding.
    pub fn apply_term(&self, term: Term) -> Term {
        let mut current = term;
        // chains are acyclic: unify never binds a variable to itself
        for _ in 0..=self.map.len() {
            match current {
                Term::Var(v) => match self.map.get(&v) {
                    Some(next) => current = *next,
                    None => return current,
                },
                Term::Const(_) => return current,
            }
        }
        current
    }

    /// `self` followed by `other`.
    pub fn compose(&self, other: &Substitution) -> Substitution {
        let mut out = Substitution::new();
        for (v, t) in self.iter() {
            out.bind(v, other.apply_term(self.apply_term(t)));
        }
        for (v, t) in other.iter() {
            out.map.entry(v).or_insert(t);
        }
        out
    }
}

impl fmt::Display for Substitution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (v, t)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{v}->{}", self.apply_term(t))?;
        }
        f.write_str("}")
    }
}
