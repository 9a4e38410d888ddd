//! Compilation of a grounded template into a per-example feed-forward graph.
//!
//! The graph is a flat arena: atom neurons come first (one per ground atom,
//! indexed like the least Herbrand model), followed by fact, rule and
//! aggregation neurons in grounding order. Inputs are stored as index ranges
//! into a single edge array and a topological order is fixed at build time.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::Range;

use crate::dataset::Example;
use crate::error::{Error, Result};
use crate::logic::{ground_program, program_of, Atom, Origin};
use crate::template::{Template, WeightKey};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FactWeight {
    /// Trainable template fact.
    Shared(WeightKey),
    /// Example fact with a given weight.
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NeuronKind {
    Atom { atom: u32 },
    Fact { atom: u32, weight: FactWeight },
    Rule { key: WeightKey, head: u32 },
    Aggregation { key: WeightKey, head: u32 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neuron {
    pub kind: NeuronKind,
    inputs: Range<u32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GroundNetwork {
    atoms: Vec<Atom>,
    neurons: Vec<Neuron>,
    edges: Vec<u32>,
    order: Vec<u32>,
    queries: Vec<Option<u32>>,
}

impl GroundNetwork {
    pub fn neurons(&self) -> &[Neuron] {
        &self.neurons
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn inputs(&self, neuron: usize) -> &[u32] {
        let r = &self.neurons[neuron].inputs;
        &self.edges[r.start as usize..r.end as usize]
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn atom(&self, id: u32) -> &Atom {
        &self.atoms[id as usize]
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    /// Atom neuron of a ground atom, if the atom occurs in the grounding.
    pub fn atom_neuron(&self, atom: &Atom) -> Option<usize> {
        self.atoms.iter().position(|a| a == atom)
    }

    /// Output neuron per query, `None` when the query atom is not derivable.
    pub fn query_outputs(&self) -> &[Option<u32>] {
        &self.queries
    }

    pub fn count_atoms(&self) -> usize {
        self.atoms.len()
    }

    pub fn count_facts(&self) -> usize {
        self.count(|k| matches!(k, NeuronKind::Fact { .. }))
    }

    pub fn count_rules(&self) -> usize {
        self.count(|k| matches!(k, NeuronKind::Rule { .. }))
    }

    pub fn count_aggregations(&self) -> usize {
        self.count(|k| matches!(k, NeuronKind::Aggregation { .. }))
    }

    fn count(&self, pred: impl Fn(&NeuronKind) -> bool) -> usize {
        self.neurons.iter().filter(|n| pred(&n.kind)).count()
    }

    /// Weight keys referenced anywhere in the graph, sorted.
    pub fn weight_keys(&self) -> Vec<WeightKey> {
        let mut keys: Vec<WeightKey> = self
            .neurons
            .iter()
            .filter_map(|n| match n.kind {
                NeuronKind::Fact { weight: FactWeight::Shared(k), .. }
                | NeuronKind::Rule { key: k, .. }
                | NeuronKind::Aggregation { key: k, .. } => Some(k),
                _ => None,
            })
            .collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// Graphviz rendering with the neuron kind as node label.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lrnn {\n  rankdir=BT;\n");
        for (i, n) in self.neurons.iter().enumerate() {
            let (label, shape) = match n.kind {
                NeuronKind::Atom { atom } => (format!("atom {}", self.atom(atom)), "ellipse"),
                NeuronKind::Fact { atom, weight } => {
                    let w = match weight {
                        FactWeight::Shared(k) => k.to_string(),
                        FactWeight::Fixed(v) => v.to_string(),
                    };
                    (format!("fact {} [{w}]", self.atom(atom)), "box")
                }
                NeuronKind::Rule { key, head } => (format!("rule {} [{key}]", self.atom(head)), "diamond"),
                NeuronKind::Aggregation { key, head } => (format!("agg {} [{key}]", self.atom(head)), "hexagon"),
            };
            let _ = writeln!(out, "  n{i} [label=\"{}\", shape={shape}];", label.replace('"', "\\\""));
        }
        for i in 0..self.neurons.len() {
            for &src in self.inputs(i) {
                let _ = writeln!(out, "  n{src} -> n{i};");
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Grounds `template ∪ example` and compiles the result.
pub fn build_network(template: &Template, example: &Example, queries: &[Atom]) -> Result<GroundNetwork> {
    let keys: Vec<WeightKey> = template.clauses().iter().map(|c| c.key).collect();
    build_network_with(template, &keys, example, queries)
}

/// Like [`build_network`] but uses only the template clauses in `keys`.
pub fn build_network_with(
    template: &Template,
    keys: &[WeightKey],
    example: &Example,
    queries: &[Atom],
) -> Result<GroundNetwork> {
    if let Some(q) = queries.iter().find(|q| !q.is_ground()) {
        return Err(Error::NonGroundQuery(q.to_string()));
    }
    let facts = example.fact_clauses();
    let (program, origins) = program_of(template, keys, &facts, example);
    let grounding = ground_program(&program);
    let model = &grounding.model;
    let n_atoms = model.len();

    let mut kinds: Vec<NeuronKind> = (0..n_atoms as u32).map(|atom| NeuronKind::Atom { atom }).collect();
    let mut inputs: Vec<Vec<u32>> = vec![Vec::new(); n_atoms];
    let mut fact_inputs: Vec<Vec<u32>> = vec![Vec::new(); n_atoms];
    let mut agg_inputs: Vec<Vec<u32>> = vec![Vec::new(); n_atoms];
    let mut aggs: HashMap<(usize, u32), u32> = HashMap::new();

    for inst in &grounding.instances {
        let origin = origins[inst.clause];
        if inst.body.is_empty() {
            let weight = match origin {
                Origin::Template(k) => FactWeight::Shared(k),
                Origin::Example(_, w) => FactWeight::Fixed(w),
            };
            let id = kinds.len() as u32;
            kinds.push(NeuronKind::Fact { atom: inst.head, weight });
            inputs.push(Vec::new());
            fact_inputs[inst.head as usize].push(id);
            continue;
        }
        let Origin::Template(key) = origin else { unreachable!("example clauses are facts") };
        let rule = kinds.len() as u32;
        kinds.push(NeuronKind::Rule { key, head: inst.head });
        inputs.push(inst.body.clone());
        let agg = *aggs.entry((inst.clause, inst.head)).or_insert_with(|| {
            let id = kinds.len() as u32;
            kinds.push(NeuronKind::Aggregation { key, head: inst.head });
            inputs.push(Vec::new());
            agg_inputs[inst.head as usize].push(id);
            id
        });
        inputs[agg as usize].push(rule);
    }
    for atom in 0..n_atoms {
        let mut v = std::mem::take(&mut fact_inputs[atom]);
        v.extend(agg_inputs[atom].iter().copied());
        inputs[atom] = v;
    }

    let mut neurons = Vec::with_capacity(kinds.len());
    let mut edges = Vec::new();
    for (kind, ins) in kinds.into_iter().zip(&inputs) {
        let start = edges.len() as u32;
        edges.extend_from_slice(ins);
        neurons.push(Neuron { kind, inputs: start..edges.len() as u32 });
    }
    let order = topological_order(&neurons, &edges).map_err(|n| {
        let atom = match neurons[n].kind {
            NeuronKind::Atom { atom }
            | NeuronKind::Fact { atom, .. }
            | NeuronKind::Rule { head: atom, .. }
            | NeuronKind::Aggregation { head: atom, .. } => atom,
        };
        Error::Cycle(model.atom(atom).to_string())
    })?;

    let queries = queries.iter().map(|q| model.id(q)).collect();
    Ok(GroundNetwork { atoms: model.atoms().to_vec(), neurons, edges, order, queries })
}

/// Kahn's algorithm; on failure returns a neuron lying on a cycle.
fn topological_order(neurons: &[Neuron], edges: &[u32]) -> std::result::Result<Vec<u32>, usize> {
    let n = neurons.len();
    let mut indegree: Vec<u32> = neurons.iter().map(|x| x.inputs.end - x.inputs.start).collect();
    let mut consumers: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, x) in neurons.iter().enumerate() {
        for &src in &edges[x.inputs.start as usize..x.inputs.end as usize] {
            consumers[src as usize].push(i as u32);
        }
    }
    let mut order: Vec<u32> = (0..n as u32).filter(|&i| indegree[i as usize] == 0).collect();
    let mut head = 0;
    while head < order.len() {
        let cur = order[head] as usize;
        head += 1;
        for &c in &consumers[cur] {
            indegree[c as usize] -= 1;
            if indegree[c as usize] == 0 {
                order.push(c);
            }
        }
    }
    if order.len() < n {
        let stuck = (0..n).find(|&i| indegree[i] > 0).unwrap();
        return Err(stuck);
    }
    Ok(order)
}
