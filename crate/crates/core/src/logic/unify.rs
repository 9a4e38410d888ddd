use super::term::{Atom, Substitution, Term};

/// Most general unifier of two atoms, if one exists.
///
/// Without function symbols no occurs-check is needed. The returned
/// substitution is fully resolved: every bound variable maps directly to its
/// final term.
pub fn unify(a: &Atom, b: &Atom) -> Option<Substitution> {
    if a.predicate != b.predicate || a.args.len() != b.args.len() {
        return None;
    }
    let mut subst = Substitution::new();
    for (x, y) in a.args.iter().zip(&b.args) {
        let x = subst.apply_term(*x);
        let y = subst.apply_term(*y);
        match (x, y) {
            (Term::Const(p), Term::Const(q)) => {
                if p != q {
                    return None;
                }
            }
            (Term::Var(v), Term::Var(w)) if v == w => {}
            (Term::Var(v), t) | (t, Term::Var(v)) => subst.bind(v, t),
        }
    }
    let mut resolved = Substitution::new();
    for (v, t) in subst.iter() {
        resolved.bind(v, subst.apply_term(t));
    }
    Some(resolved)
}
