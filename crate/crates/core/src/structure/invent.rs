use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, Substitution, Term};
use crate::symbol::Symbol;
use crate::template::Template;

/// Ordered selections of `k` distinct items.
fn injective(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn go(n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in 0..n {
            if !current.contains(&i) {
                current.push(i);
                go(n, k, current, out);
                current.pop();
            }
        }
    }
    go(n, k, &mut current, &mut out);
    out
}

/// Declares `d` fresh latent predicates of arity `k` one layer above the
/// highest latent layer used by `best` (layer 2 if it uses none), and returns
/// their defining rules: for each predicate and each injective assignment of
/// head variables `V1..Vk` to variables of `best`, the rule
/// `alpha(V1..Vk) <- body(best)` with the assigned variables renamed.
pub fn invent_predicates(
    best: &Clause,
    template: &mut Template,
    d: usize,
    k: usize,
    reserved: &BTreeSet<Symbol>,
) -> Result<Vec<Clause>> {
    let vars = best.variables();
    if vars.len() < k {
        return Err(Error::TooFewVariables { needed: k, found: vars.len() });
    }
    let i = best.body.iter().map(|b| template.predicate_layer(b.predicate)).max().unwrap_or(0).max(1);
    let head_vars: Vec<Symbol> = (1..=k)
        .map(|m| {
            let mut name = format!("V{m}");
            while vars.iter().any(|v| v.as_str() == name) {
                name.push('_');
            }
            Symbol::new(&name)
        })
        .collect();
    let assignments = injective(vars.len(), k);

    let mut out = Vec::with_capacity(d * assignments.len());
    for _ in 0..d {
        let name = template.fresh_latent(i + 1, k, reserved)?;
        for assignment in &assignments {
            let mut subst = Substitution::new();
            for (slot, &v) in assignment.iter().enumerate() {
                subst.bind(vars[v], Term::Var(head_vars[slot]));
            }
            let head = Atom::new(name, head_vars.iter().map(|&v| Term::Var(v)).collect());
            out.push(Clause::new(head, best.body.iter().map(|b| b.apply(&subst)).collect()));
        }
    }
    Ok(out)
}
