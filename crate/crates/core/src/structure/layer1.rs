use std::collections::BTreeSet;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::logic::{Atom, Clause, Term};
use crate::symbol::Symbol;
use crate::template::Template;

/// Starts a template from the data: declares the query predicates as
/// targets and adds the soft-cluster grid `alpha1_j(X) <- U(X)` for every
/// unary dataset predicate `U` and every `j` in `1..=d`.
pub fn create_layer1_rules(data: &Dataset, d: usize) -> Result<Template> {
    if d == 0 {
        return Err(Error::Config("latent dimension d must be at least 1".into()));
    }
    let unary = data.unary_predicates();
    if unary.is_empty() {
        return Err(Error::NoUnaryPredicates);
    }
    let mut template = Template::new();
    for (pred, arity) in data.target_predicates() {
        template.add_target(pred, arity)?;
    }
    let reserved: BTreeSet<Symbol> =
        data.fact_predicates().into_keys().chain(data.target_predicates().into_keys()).collect();
    let x = Term::Var(Symbol::new("X"));
    for _ in 0..d {
        let latent = template.fresh_latent(1, 1, &reserved)?;
        for &u in &unary {
            template.push(Clause::new(Atom::new(latent, vec![x]), vec![Atom::new(u, vec![x])]))?;
        }
    }
    Ok(template)
}
