//! Top-down refinement of target rules and canonical forms up to variable
//! renaming and body order.

use std::collections::BTreeSet;
use std::fmt;

use crate::logic::{Atom, Clause, Substitution, Term};
use crate::symbol::Symbol;

use super::SearchConfig;

/// Predicates available for rule bodies.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Vocabulary {
    pub predicates: Vec<(Symbol, usize)>,
}

impl Vocabulary {
    pub fn new(mut predicates: Vec<(Symbol, usize)>) -> Self {
        predicates.sort();
        predicates.dedup();
        Vocabulary { predicates }
    }
}

/// A hypothesis during beam search.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidateRule {
    pub clause: Clause,
    /// Mean log-loss after training; `f64::INFINITY` until scored.
    pub score: f64,
    /// Literals in the order they were added.
    pub provenance: Vec<Atom>,
}

impl CandidateRule {
    pub fn unscored(clause: Clause, provenance: Vec<Atom>) -> Self {
        CandidateRule { clause, score: f64::INFINITY, provenance }
    }

    /// Search order: lower score, then shorter body, then clause text.
    pub fn ranking(&self, other: &Self) -> std::cmp::Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.clause.body.len().cmp(&other.clause.body.len()))
            .then_with(|| self.clause.to_string().cmp(&other.clause.to_string()))
    }
}

impl fmt::Display for CandidateRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{:.6}]", self.clause, self.score)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum ArgCode {
    Var(usize),
    Const(Symbol),
}

type LiteralCode = (Symbol, Vec<ArgCode>);

/// Permutations beyond this body length are not explored; the body order is kept.
const MAX_PERMUTED_BODY: usize = 7;

/// Renames variables to `A, B, ...` by first occurrence (head first) and
/// orders the body so that clauses equal up to renaming and body order map
/// to the same value.
pub fn canonical_form(clause: &Clause) -> Clause {
    let head_vars: Vec<Symbol> = clause.head.variables().fold(Vec::new(), |mut acc, v| {
        if !acc.contains(&v) {
            acc.push(v);
        }
        acc
    });
    let n = clause.body.len();
    let mut best: Option<(Vec<LiteralCode>, Vec<usize>)> = None;
    let mut consider = |perm: &[usize]| {
        let mut names = head_vars.clone();
        let code: Vec<LiteralCode> = perm
            .iter()
            .map(|&i| {
                let atom = &clause.body[i];
                let args = atom
                    .args
                    .iter()
                    .map(|t| match t {
                        Term::Const(c) => ArgCode::Const(*c),
                        Term::Var(v) => {
                            let pos = names.iter().position(|x| x == v).unwrap_or_else(|| {
                                names.push(*v);
                                names.len() - 1
                            });
                            ArgCode::Var(pos)
                        }
                    })
                    .collect();
                (atom.predicate, args)
            })
            .collect();
        if best.as_ref().is_none_or(|(b, _)| code < *b) {
            best = Some((code, perm.to_vec()));
        }
    };
    let mut perm: Vec<usize> = (0..n).collect();
    if n <= MAX_PERMUTED_BODY {
        permutations(&mut perm, 0, &mut consider);
    } else {
        consider(&perm);
    }
    let order = best.map(|(_, p)| p).unwrap_or_default();

    let mut subst = Substitution::new();
    let mut seen = Vec::new();
    for atom in std::iter::once(&clause.head).chain(order.iter().map(|&i| &clause.body[i])) {
        for v in atom.variables() {
            if !seen.contains(&v) {
                subst.bind(v, Term::Var(Symbol::canonical_var(seen.len())));
                seen.push(v);
            }
        }
    }
    // apply simultaneously: canonical names may clash with original names
    let rename = |a: &Atom| Atom {
        predicate: a.predicate,
        args: a
            .args
            .iter()
            .map(|t| match t {
                Term::Var(v) => subst.get(*v).unwrap(),
                c => *c,
            })
            .collect(),
    };
    Clause::new(rename(&clause.head), order.iter().map(|&i| rename(&clause.body[i])).collect())
}

fn permutations(items: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permutations(items, k + 1, f);
        items.swap(k, i);
    }
}

/// `p(A, B, ...)` with distinct canonical variables.
pub fn target_head(predicate: Symbol, arity: usize) -> Atom {
    Atom::new(predicate, (0..arity).map(|i| Term::Var(Symbol::canonical_var(i))).collect())
}

fn tuples(pool: &[Symbol], arity: usize) -> Vec<Vec<Symbol>> {
    let mut out = vec![Vec::new()];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                pool.iter().map(move |s| {
                    let mut t = prefix.clone();
                    t.push(*s);
                    t
                })
            })
            .collect();
    }
    out
}

/// Single-literal rules for a target head: arguments drawn from the head
/// variables and any number of fresh variables, within the variable bound.
pub fn seed_candidates(head: &Atom, vocab: &Vocabulary, cfg: &SearchConfig) -> Vec<CandidateRule> {
    if cfg.max_rule_length == 0 {
        return Vec::new();
    }
    let base = Clause::new(head.clone(), Vec::new());
    let existing = base.variables();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &(pred, arity) in &vocab.predicates {
        let mut pool = existing.clone();
        pool.extend((0..arity).map(|i| Symbol::canonical_var(existing.len() + i)));
        for args in tuples(&pool, arity) {
            let literal = Atom::new(pred, args.into_iter().map(Term::Var).collect());
            let clause = Clause::new(head.clone(), vec![literal.clone()]);
            if clause.variables().len() > cfg.max_variables {
                continue;
            }
            let canon = canonical_form(&clause);
            if seen.insert(canon.clone()) {
                out.push(CandidateRule::unscored(canon, vec![literal]));
            }
        }
    }
    out
}

/// All specializations obtained by appending one literal whose arguments are
/// existing variables or a single fresh variable, deduplicated up to
/// renaming, within the length and variable bounds.
pub fn refine(rule: &CandidateRule, vocab: &Vocabulary, cfg: &SearchConfig) -> Vec<CandidateRule> {
    let clause = &rule.clause;
    if clause.body.len() >= cfg.max_rule_length {
        return Vec::new();
    }
    let vars = clause.variables();
    let mut fresh_index = vars.len();
    let fresh = loop {
        let f = Symbol::canonical_var(fresh_index);
        if !vars.contains(&f) {
            break f;
        }
        fresh_index += 1;
    };
    let mut pool = vars.clone();
    pool.push(fresh);

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &(pred, arity) in &vocab.predicates {
        for args in tuples(&pool, arity) {
            let uses_fresh = args.contains(&fresh);
            if uses_fresh && vars.len() + 1 > cfg.max_variables {
                continue;
            }
            let literal = Atom::new(pred, args.into_iter().map(Term::Var).collect());
            if clause.body.contains(&literal) {
                continue;
            }
            let mut body = clause.body.clone();
            body.push(literal.clone());
            let canon = canonical_form(&Clause::new(clause.head.clone(), body));
            if seen.insert(canon.clone()) {
                let mut provenance = rule.provenance.clone();
                provenance.push(literal);
                out.push(CandidateRule::unscored(canon, provenance));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(p: &str, args: &[&str]) -> Atom {
        Atom::parse_args(p, args)
    }

    fn cfg(len: usize, vars: usize) -> SearchConfig {
        SearchConfig { max_rule_length: len, max_variables: vars, ..Default::default() }
    }

    #[test]
    fn canonical_form_ignores_names_and_order() {
        let c1 = Clause::new(a("p", &["X", "Y"]), vec![a("bond", &["X", "Z"]), a("c", &["Z"]), a("o", &["Y"])]);
        let c2 = Clause::new(a("p", &["U", "W"]), vec![a("o", &["W"]), a("c", &["Q"]), a("bond", &["U", "Q"])]);
        assert_eq!(canonical_form(&c1), canonical_form(&c2));
        let canon = canonical_form(&c1);
        assert_eq!(canon.head, a("p", &["A", "B"]));
        assert!(canon.variables().iter().all(|v| ["A", "B", "C"].contains(&v.as_str())));
    }

    #[test]
    fn canonical_form_distinguishes_structure() {
        let c1 = Clause::new(a("p", &["X"]), vec![a("bond", &["X", "Y"])]);
        let c2 = Clause::new(a("p", &["X"]), vec![a("bond", &["Y", "X"])]);
        assert_ne!(canonical_form(&c1), canonical_form(&c2));
    }

    #[test]
    fn canonical_form_handles_clashing_names() {
        // original variable B becomes A and vice versa
        let c = Clause::new(a("p", &["B"]), vec![a("q", &["B", "A"])]);
        let canon = canonical_form(&c);
        assert_eq!(canon, Clause::new(a("p", &["A"]), vec![a("q", &["A", "B"])]));
    }

    #[test]
    fn refinements_with_unary_latent() {
        let rule = CandidateRule::unscored(Clause::new(a("p", &["A", "B"]), vec![a("bond", &["A", "B"])]), vec![]);
        let vocab = Vocabulary::new(vec![("alpha1_1".into(), 1)]);
        let out = refine(&rule, &vocab, &cfg(4, 4));
        let bodies: Vec<String> = out.iter().map(|c| c.clause.to_string()).collect();
        assert_eq!(out.len(), 3, "{bodies:?}");
        for expected in [
            Clause::new(a("p", &["A", "B"]), vec![a("bond", &["A", "B"]), a("alpha1_1", &["A"])]),
            Clause::new(a("p", &["A", "B"]), vec![a("bond", &["A", "B"]), a("alpha1_1", &["B"])]),
            Clause::new(a("p", &["A", "B"]), vec![a("bond", &["A", "B"]), a("alpha1_1", &["C"])]),
        ] {
            assert!(out.iter().any(|c| c.clause == canonical_form(&expected)), "{bodies:?}");
        }
    }

    #[test]
    fn length_bound_stops_refinement() {
        let rule = CandidateRule::unscored(Clause::new(a("p", &["A", "B"]), vec![a("bond", &["A", "B"])]), vec![]);
        let vocab = Vocabulary::new(vec![("c".into(), 1)]);
        assert!(refine(&rule, &vocab, &cfg(1, 4)).is_empty());
    }

    #[test]
    fn duplicate_literal_not_generated() {
        let rule = CandidateRule::unscored(Clause::new(a("p", &["A"]), vec![a("alpha1_1", &["A"])]), vec![]);
        let vocab = Vocabulary::new(vec![("alpha1_1".into(), 1)]);
        let out = refine(&rule, &vocab, &cfg(4, 4));
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].clause, Clause::new(a("p", &["A"]), vec![a("alpha1_1", &["A"]), a("alpha1_1", &["B"])]));
    }

    #[test]
    fn variable_bound_respected() {
        let rule = CandidateRule::unscored(Clause::new(a("p", &["A", "B"]), vec![a("bond", &["A", "B"])]), vec![]);
        let vocab = Vocabulary::new(vec![("bond".into(), 2)]);
        let out = refine(&rule, &vocab, &cfg(4, 2));
        assert!(out.iter().all(|c| c.clause.variables().len() <= 2));
        // bond(B,A), bond(A,A), bond(B,B)
        assert_eq!(out.len(), 3);
    }

    #[test]
    fn seeds_for_nullary_head() {
        let vocab = Vocabulary::new(vec![("bond".into(), 2), ("c".into(), 1)]);
        let seeds = seed_candidates(&target_head("pos".into(), 0), &vocab, &cfg(4, 4));
        let texts: BTreeSet<String> = seeds.iter().map(|c| c.clause.to_string()).collect();
        let expected: BTreeSet<String> =
            ["pos <- bond(A,A)", "pos <- bond(A,B)", "pos <- c(A)"].iter().map(|s| s.to_string()).collect();
        assert_eq!(texts, expected);
    }
}
