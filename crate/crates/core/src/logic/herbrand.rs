//! Bottom-up grounding: semi-naive least Herbrand model computation and
//! enumeration of active ground rule instances.

use std::collections::{BTreeSet, HashMap};

use super::term::{Atom, Clause, Term};
use crate::symbol::Symbol;

/// Insertion-ordered set of ground atoms with a predicate index and a
/// predicate + first-argument index.
#[derive(Clone, Debug, Default)]
pub struct FactBase {
    atoms: Vec<Atom>,
    ids: HashMap<Atom, u32>,
    by_pred: HashMap<Symbol, Vec<u32>>,
    by_first: HashMap<(Symbol, Symbol), Vec<u32>>,
}

impl FactBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a ground atom, returning its id and whether it was new.
    pub fn insert(&mut self, atom: Atom) -> (u32, bool) {
        debug_assert!(atom.is_ground());
        if let Some(&id) = self.ids.get(&atom) {
            return (id, false);
        }
        let id = self.atoms.len() as u32;
        self.by_pred.entry(atom.predicate).or_default().push(id);
        if let Some(first) = atom.args.first() {
            self.by_first.entry((atom.predicate, first.symbol())).or_default().push(id);
        }
        self.ids.insert(atom.clone(), id);
        self.atoms.push(atom);
        (id, true)
    }

    pub fn id(&self, atom: &Atom) -> Option<u32> {
        self.ids.get(atom).copied()
    }

    pub fn atom(&self, id: u32) -> &Atom {
        &self.atoms[id as usize]
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        self.ids.contains_key(atom)
    }

    fn candidates(&self, pred: Symbol, first: Option<Symbol>) -> &[u32] {
        let list = match first {
            Some(c) => self.by_first.get(&(pred, c)),
            None => self.by_pred.get(&pred),
        };
        list.map(Vec::as_slice).unwrap_or(&[])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Slot {
    Const(Symbol),
    Var(usize),
}

#[derive(Clone, Debug)]
struct CompiledAtom {
    pred: Symbol,
    args: Vec<Slot>,
}

/// A clause with variables replaced by dense slot indices. Compiling a clause
/// gives it its own variable namespace, so clauses are standardized apart.
#[derive(Clone, Debug)]
pub struct CompiledClause {
    head: CompiledAtom,
    body: Vec<CompiledAtom>,
    vars: Vec<Symbol>,
    head_only: Vec<usize>,
}

impl CompiledClause {
    pub fn new(clause: &Clause) -> Self {
        let vars = clause.variables();
        let compile = |atom: &Atom| CompiledAtom {
            pred: atom.predicate,
            args: atom
                .args
                .iter()
                .map(|t| match t {
                    Term::Const(c) => Slot::Const(*c),
                    Term::Var(v) => Slot::Var(vars.iter().position(|x| x == v).unwrap()),
                })
                .collect(),
        };
        let head = compile(&clause.head);
        let body: Vec<CompiledAtom> = clause.body.iter().map(compile).collect();
        let mut head_only = Vec::new();
        for slot in &head.args {
            if let Slot::Var(v) = *slot {
                let in_body = body.iter().any(|b| b.args.contains(&Slot::Var(v)));
                if !in_body && !head_only.contains(&v) {
                    head_only.push(v);
                }
            }
        }
        CompiledClause { head, body, vars, head_only }
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn body_len(&self) -> usize {
        self.body.len()
    }

    /// Slots of variables that occur in the head but not in the body.
    pub fn head_only(&self) -> &[usize] {
        &self.head_only
    }

    fn instantiate(atom: &CompiledAtom, bindings: &[Option<Symbol>]) -> Atom {
        Atom {
            predicate: atom.pred,
            args: atom
                .args
                .iter()
                .map(|s| match *s {
                    Slot::Const(c) => Term::Const(c),
                    Slot::Var(v) => Term::Const(bindings[v].expect("unbound variable")),
                })
                .collect(),
        }
    }

    pub fn ground_head(&self, bindings: &[Option<Symbol>]) -> Atom {
        Self::instantiate(&self.head, bindings)
    }

    pub fn ground_body(&self, index: usize, bindings: &[Option<Symbol>]) -> Atom {
        Self::instantiate(&self.body[index], bindings)
    }

    /// Binds head variables against a ground atom. Returns false on mismatch.
    pub fn bind_head(&self, ground: &Atom, bindings: &mut [Option<Symbol>]) -> bool {
        if ground.predicate != self.head.pred || ground.args.len() != self.head.args.len() {
            return false;
        }
        match_slots(&self.head.args, ground, bindings, &mut Vec::new())
    }

    /// Enumerates every extension of `bindings` that maps each body literal
    /// onto an atom of `base` (with id inside that literal's allowed range),
    /// then every assignment of head-only variables over `universe`.
    /// The callback receives the full bindings and the matched atom ids.
    pub fn for_each_match<F>(
        &self,
        base: &FactBase,
        ranges: &[(u32, u32)],
        universe: &[Symbol],
        bindings: &mut Vec<Option<Symbol>>,
        f: &mut F,
    ) where
        F: FnMut(&[Option<Symbol>], &[u32]),
    {
        let mut order: Vec<usize> = (0..self.body.len()).collect();
        // the most restricted literal goes first
        if let Some(first) = (0..ranges.len()).min_by_key(|&i| ranges[i].1 - ranges[i].0) {
            order.retain(|&i| i != first);
            order.insert(0, first);
        }
        let mut matched = vec![0u32; self.body.len()];
        self.join(base, &order, ranges, 0, universe, bindings, &mut matched, f);
    }

    #[allow(clippy::too_many_arguments)]
    fn join<F>(
        &self,
        base: &FactBase,
        order: &[usize],
        ranges: &[(u32, u32)],
        depth: usize,
        universe: &[Symbol],
        bindings: &mut Vec<Option<Symbol>>,
        matched: &mut Vec<u32>,
        f: &mut F,
    ) where
        F: FnMut(&[Option<Symbol>], &[u32]),
    {
        if depth == order.len() {
            self.bind_head_only(0, universe, bindings, matched, f);
            return;
        }
        let lit_index = order[depth];
        let lit = &self.body[lit_index];
        let (lo, hi) = ranges[lit_index];
        let first = lit.args.first().and_then(|s| match *s {
            Slot::Const(c) => Some(c),
            Slot::Var(v) => bindings[v],
        });
        let list = base.candidates(lit.pred, first);
        let start = list.partition_point(|&id| id < lo);
        let mut undo = Vec::new();
        for &id in &list[start..] {
            if id >= hi {
                break;
            }
            let atom = base.atom(id);
            if atom.args.len() != lit.args.len() {
                continue;
            }
            undo.clear();
            if match_slots(&lit.args, atom, bindings, &mut undo) {
                matched[lit_index] = id;
                self.join(base, order, ranges, depth + 1, universe, bindings, matched, f);
            }
            for &v in &undo {
                bindings[v] = None;
            }
        }
    }

    fn bind_head_only<F>(
        &self,
        index: usize,
        universe: &[Symbol],
        bindings: &mut Vec<Option<Symbol>>,
        matched: &[u32],
        f: &mut F,
    ) where
        F: FnMut(&[Option<Symbol>], &[u32]),
    {
        let Some(&var) = self.head_only.get(index) else {
            f(bindings, matched);
            return;
        };
        if bindings[var].is_some() {
            self.bind_head_only(index + 1, universe, bindings, matched, f);
            return;
        }
        for &c in universe {
            bindings[var] = Some(c);
            self.bind_head_only(index + 1, universe, bindings, matched, f);
        }
        bindings[var] = None;
    }
}

fn match_slots(slots: &[Slot], atom: &Atom, bindings: &mut [Option<Symbol>], undo: &mut Vec<usize>) -> bool {
    for (slot, term) in slots.iter().zip(&atom.args) {
        let c = term.symbol();
        match *slot {
            Slot::Const(k) => {
                if k != c {
                    return false;
                }
            }
            Slot::Var(v) => match bindings[v] {
                Some(b) if b != c => return false,
                Some(_) => {}
                None => {
                    bindings[v] = Some(c);
                    undo.push(v);
                }
            },
        }
    }
    true
}

/// One active ground instance of a program clause.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundRule {
    /// Index of the originating clause in the program.
    pub clause: usize,
    pub head: u32,
    pub body: Vec<u32>,
}

/// Result of grounding a program: its least Herbrand model and every active
/// ground instance (facts have an empty body).
#[derive(Clone, Debug, Default)]
pub struct Grounding {
    pub model: FactBase,
    pub instances: Vec<GroundRule>,
}

/// Constants occurring anywhere in the program, sorted.
pub fn herbrand_universe<'a>(program: impl IntoIterator<Item = &'a Clause>) -> Vec<Symbol> {
    let mut out = BTreeSet::new();
    for clause in program {
        for atom in std::iter::once(&clause.head).chain(&clause.body) {
            for t in &atom.args {
                if let Term::Const(c) = t {
                    out.insert(*c);
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Grounds a program: semi-naive fixpoint, then enumeration of every clause
/// instance whose body holds in the model.
pub fn ground_program(program: &[&Clause]) -> Grounding {
    let compiled: Vec<CompiledClause> = program.iter().map(|c| CompiledClause::new(c)).collect();
    let universe = herbrand_universe(program.iter().copied());
    let model = fixpoint(&compiled, &universe);

    let mut instances = Vec::new();
    let full = (0u32, model.len() as u32);
    for (ci, clause) in compiled.iter().enumerate() {
        let ranges = vec![full; clause.body.len()];
        let mut bindings = vec![None; clause.var_count()];
        clause.for_each_match(&model, &ranges, &universe, &mut bindings, &mut |b, ids| {
            let head = clause.ground_head(b);
            let head = model.id(&head).expect("head of an active rule is in the model");
            instances.push(GroundRule { clause: ci, head, body: ids.to_vec() });
        });
    }
    Grounding { model, instances }
}

fn fixpoint(compiled: &[CompiledClause], universe: &[Symbol]) -> FactBase {
    let mut model = FactBase::new();
    for clause in compiled.iter().filter(|c| c.body.is_empty()) {
        let mut bindings = vec![None; clause.var_count()];
        let mut heads = Vec::new();
        clause.for_each_match(&model, &[], universe, &mut bindings, &mut |b, _| {
            heads.push(clause.ground_head(b));
        });
        for h in heads {
            model.insert(h);
        }
    }

    let rules: Vec<&CompiledClause> = compiled.iter().filter(|c| !c.body.is_empty()).collect();
    let mut lo = 0u32;
    let mut hi = model.len() as u32;
    while lo < hi {
        let mut derived = Vec::new();
        for rule in &rules {
            let mut bindings = vec![None; rule.var_count()];
            for delta_lit in 0..rule.body.len() {
                let ranges: Vec<(u32, u32)> =
                    (0..rule.body.len()).map(|i| if i == delta_lit { (lo, hi) } else { (0, hi) }).collect();
                rule.for_each_match(&model, &ranges, universe, &mut bindings, &mut |b, _| {
                    derived.push(rule.ground_head(b));
                });
            }
        }
        for atom in derived {
            model.insert(atom);
        }
        lo = hi;
        hi = model.len() as u32;
    }
    model
}

/// The least Herbrand model of a definite program. Fact weights play no role.
pub fn least_herbrand_model(program: &[Clause]) -> BTreeSet<Atom> {
    let refs: Vec<&Clause> = program.iter().collect();
    let compiled: Vec<CompiledClause> = refs.iter().map(|c| CompiledClause::new(c)).collect();
    let universe = herbrand_universe(refs.iter().copied());
    fixpoint(&compiled, &universe).atoms().iter().cloned().collect()
}
