//! Candidate scoring: mean log-loss after training the non-latent weights of
//! the template extended with the candidate, latent weights held fixed.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{sigm, ActivationParams, NetworkParams, RuleWeightPlacement};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::logic::{Atom, Clause, CompiledClause, FactBase, Term};
use crate::network::{build_network_with, GroundNetwork, NeuronKind};
use crate::symbol::Symbol;
use crate::template::{HeadKind, Template, WeightKey};
use crate::train::{model_metrics, train_model, LossKind, Model, NetworkModel, TrainConfig};
use crate::weights::{init_draw, WeightStore};

/// Result of scoring one candidate.
#[derive(Clone, Debug, PartialEq)]
pub struct Scored {
    /// Mean log-loss per query after training.
    pub score: f64,
    /// Trained copy of the weights with the candidate's weight appended.
    pub weights: WeightStore,
    /// True if the candidate reaches no query, in which case nothing was trained.
    pub inert: bool,
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Initial weight of a candidate rule, a function of the seed and the clause
/// text only.
pub fn candidate_init(seed: u64, clause: &Clause) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(&clause.to_string()));
    init_draw(&mut rng)
}

/// Scores a candidate without any caching. Inputs are not modified.
pub fn score_rule(
    candidate: &Clause,
    template: &Template,
    weights: &WeightStore,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<f64> {
    Scorer::new(template, weights, data, cfg, false)?.score(candidate).map(|s| s.score)
}

/// Scores candidates against a fixed template and weight store.
pub struct Scorer<'a> {
    template: &'a Template,
    weights: &'a WeightStore,
    data: &'a Dataset,
    cfg: TrainConfig,
    cache: Option<LatentCache>,
}

impl<'a> Scorer<'a> {
    /// With `use_cache`, latent atom values are computed once and candidates
    /// are trained on a reduced model. The cache is skipped for templates
    /// where it would not be exact.
    pub fn new(
        template: &'a Template,
        weights: &'a WeightStore,
        data: &'a Dataset,
        cfg: &TrainConfig,
        use_cache: bool,
    ) -> Result<Self> {
        let cfg = TrainConfig { loss: LossKind::Logistic, ..cfg.clone() };
        let cache = if use_cache && LatentCache::applies(template) {
            Some(LatentCache::build(template, weights, data, cfg.network, cfg.execution)?)
        } else {
            None
        };
        Ok(Scorer { template, weights, data, cfg, cache })
    }

    pub fn is_cached(&self) -> bool {
        self.cache.is_some()
    }

    /// Mean log-loss of the current model, untrained.
    pub fn current_log_loss(&self) -> Result<f64> {
        match &self.cache {
            Some(cache) => {
                let model = cache.model(None);
                Ok(model_metrics(&model, &self.data.queries, self.weights, self.cfg.execution).log_loss)
            }
            None => {
                let keys = self.template.relevant_keys();
                let model = NetworkModel::build(self.template, &keys, self.data, self.cfg.network, self.cfg.execution)?;
                Ok(model_metrics(&model, &self.data.queries, self.weights, self.cfg.execution).log_loss)
            }
        }
    }

    /// Mean log-loss of the current model after the same training a
    /// candidate receives, i.e. the score of a rule that changes nothing.
    pub fn baseline(&self) -> Result<f64> {
        let trainable = trainable_mask(self.template, self.weights.len());
        if !trainable.iter().any(|&t| t) {
            return self.current_log_loss();
        }
        let queries = &self.data.queries;
        let exec = self.cfg.execution;
        let result = match &self.cache {
            Some(cache) => {
                let model = cache.model(None);
                train_model(&model, queries, self.weights, &trainable, &self.cfg, None)
                    .map(|o| model_metrics(&model, queries, &o.weights, exec).log_loss)
            }
            None => {
                let keys = self.template.relevant_keys();
                let model = NetworkModel::build(self.template, &keys, self.data, self.cfg.network, exec)?;
                train_model(&model, queries, self.weights, &trainable, &self.cfg, None)
                    .map(|o| model_metrics(&model, queries, &o.weights, exec).log_loss)
            }
        };
        match result {
            Err(Error::NothingTrainable) => self.current_log_loss(),
            other => other,
        }
    }

    pub fn score(&self, candidate: &Clause) -> Result<Scored> {
        let mut extended = self.template.clone();
        let key = extended.push(candidate.clone())?;
        let mut weights = self.weights.clone();
        weights.push(candidate_init(self.cfg.seed, candidate));
        let trainable = trainable_mask(&extended, weights.len());
        let queries = &self.data.queries;
        let exec = self.cfg.execution;
        match &self.cache {
            Some(cache) => {
                let features = cache.candidate_features(candidate, key, self.cfg.network);
                let model = cache.model(Some(&features));
                if !features.reaches_query() {
                    let score = model_metrics(&model, queries, &weights, exec).log_loss;
                    return Ok(Scored { score, weights, inert: true });
                }
                let out = train_model(&model, queries, &weights, &trainable, &self.cfg, None)?;
                Ok(Scored {
                    score: model_metrics(&model, queries, &out.weights, exec).log_loss,
                    weights: out.weights,
                    inert: false,
                })
            }
            None => {
                let keys = extended.relevant_keys();
                let model = NetworkModel::build(&extended, &keys, self.data, self.cfg.network, exec)?;
                if !model.networks.iter().any(|net| feeds_query(net, key)) {
                    let score = model_metrics(&model, queries, &weights, exec).log_loss;
                    return Ok(Scored { score, weights, inert: true });
                }
                let out = train_model(&model, queries, &weights, &trainable, &self.cfg, None)?;
                Ok(Scored {
                    score: model_metrics(&model, queries, &out.weights, exec).log_loss,
                    weights: out.weights,
                    inert: false,
                })
            }
        }
    }
}

/// Relevant keys of clauses with a non-latent head.
fn trainable_mask(template: &Template, len: usize) -> Vec<bool> {
    let mut mask = vec![false; len];
    for k in template.relevant_keys() {
        mask[k.0] = template.get(k).head_kind != HeadKind::Latent;
    }
    mask
}

fn feeds_query(net: &GroundNetwork, key: WeightKey) -> bool {
    net.query_outputs().iter().flatten().any(|&q| {
        net.inputs(q as usize)
            .iter()
            .any(|&i| matches!(net.neurons()[i as usize].kind, NeuronKind::Aggregation { key: k, .. } if k == key))
    })
}

/// Ground instances of one rule deriving one query atom.
#[derive(Clone, Debug, PartialEq)]
struct RuleFeature {
    key: WeightKey,
    /// Summed body values per instance.
    sums: Vec<f64>,
    k: usize,
    /// Mean rule-neuron value with the weight placed at the aggregation.
    mean: f64,
}

impl RuleFeature {
    fn new(key: WeightKey, sums: Vec<f64>, k: usize, act: &ActivationParams) -> Self {
        let mean = sums.iter().map(|&s| act.and_sum(s, k)).sum::<f64>() / sums.len() as f64;
        RuleFeature { key, sums, k, mean }
    }

    fn conjunction_values(&self, w: f64, act: &ActivationParams) -> impl Iterator<Item = f64> + '_ {
        let act = *act;
        self.sums.iter().map(move |&s| act.and_sum(s + w, self.k))
    }
}

struct QueryBase {
    facts: Vec<f64>,
    rules: Vec<RuleFeature>,
}

struct ExampleCache {
    query_atoms: Vec<Atom>,
    atoms: FactBase,
    values: Vec<f64>,
    universe: BTreeSet<Symbol>,
    queries: Vec<QueryBase>,
}

/// Values of every atom of the current template under fixed weights, and
/// the instances of each existing target rule per query.
struct LatentCache {
    examples: Vec<ExampleCache>,
    params: NetworkParams,
}

/// Per example, per query features of a candidate.
pub(crate) struct CandidateFeatures(Vec<Vec<Option<RuleFeature>>>);

impl CandidateFeatures {
    fn reaches_query(&self) -> bool {
        self.0.iter().flatten().any(Option::is_some)
    }
}

impl LatentCache {
    /// Exact when target predicates are defined only by rules over latent
    /// and dataset predicates and nothing else in the template is trainable.
    fn applies(template: &Template) -> bool {
        template.clauses().iter().all(|c| {
            let no_consts = std::iter::once(&c.clause.head)
                .chain(&c.clause.body)
                .all(|a| a.args.iter().all(|t| matches!(t, Term::Var(_))));
            let no_target_body = c.clause.body.iter().all(|b| !template.is_target(b.predicate));
            let kind_ok = match c.head_kind {
                HeadKind::Latent => true,
                HeadKind::Target => !c.clause.body.is_empty(),
                HeadKind::Dataset => false,
            };
            no_consts && no_target_body && kind_ok
        })
    }

    fn build(
        template: &Template,
        weights: &WeightStore,
        data: &Dataset,
        params: NetworkParams,
        execution: Execution,
    ) -> Result<Self> {
        let all_keys: Vec<WeightKey> = template.clauses().iter().map(|c| c.key).collect();
        let targets: Vec<(WeightKey, CompiledClause)> = template
            .clauses()
            .iter()
            .filter(|c| c.head_kind == HeadKind::Target)
            .map(|c| (c.key, CompiledClause::new(&c.clause)))
            .collect();
        let built = execution.map_range(data.len(), |e| -> Result<ExampleCache> {
            let example = &data.examples[e];
            let atoms_q: Vec<Atom> = data.queries[e].iter().map(|q| q.atom.clone()).collect();
            let net = build_network_with(template, &all_keys, example, &atoms_q)?;
            let tape = crate::autodiff::forward(&net, weights, &params);
            let mut atoms = FactBase::new();
            for atom in net.atoms() {
                atoms.insert(atom.clone());
            }
            let values = (0..net.count_atoms()).map(|i| tape.values[i]).collect();
            let universe = example.facts.iter().flat_map(|f| f.atom.args.iter().map(Term::symbol)).collect();
            let mut cache = ExampleCache { query_atoms: Vec::new(), atoms, values, universe, queries: Vec::new() };
            cache.queries = atoms_q
                .iter()
                .map(|q| QueryBase {
                    facts: example.facts.iter().filter(|f| &f.atom == q).map(|f| f.weight).collect(),
                    rules: targets.iter().filter_map(|(k, c)| cache.feature(c, *k, q, params)).collect(),
                })
                .collect();
            cache.query_atoms = atoms_q;
            Ok(cache)
        });
        Ok(LatentCache { examples: built.into_iter().collect::<Result<_>>()?, params })
    }

    fn candidate_features(&self, candidate: &Clause, key: WeightKey, params: NetworkParams) -> CandidateFeatures {
        let compiled = CompiledClause::new(candidate);
        CandidateFeatures(
            self.examples
                .iter()
                .map(|ex| ex.query_atoms.iter().map(|q| ex.feature(&compiled, key, q, params)).collect())
                .collect(),
        )
    }

    fn model<'c>(&'c self, candidate: Option<&'c CandidateFeatures>) -> ReducedModel<'c> {
        ReducedModel { cache: self, candidate }
    }
}

impl ExampleCache {
    /// Instances of `clause` whose head is `query`, or `None` if there are none.
    fn feature(
        &self,
        clause: &CompiledClause,
        key: WeightKey,
        query: &Atom,
        params: NetworkParams,
    ) -> Option<RuleFeature> {
        let mut bindings = vec![None; clause.var_count()];
        if !clause.bind_head(query, &mut bindings) {
            return None;
        }
        let in_universe = clause.head_only().iter().all(|&v| bindings[v].is_some_and(|c| self.universe.contains(&c)));
        if !in_universe {
            return None;
        }
        let full = vec![(0u32, self.atoms.len() as u32); clause.body_len()];
        let mut sums = Vec::new();
        clause.for_each_match(&self.atoms, &full, &[], &mut bindings, &mut |_, ids| {
            sums.push(ids.iter().map(|&i| self.values[i as usize]).sum());
        });
        (!sums.is_empty()).then(|| RuleFeature::new(key, sums, clause.body_len(), &params.activation))
    }
}

/// The target-atom part of the network: latent atoms are constants, so each
/// query output depends only on the target-rule weights.
struct ReducedModel<'c> {
    cache: &'c LatentCache,
    candidate: Option<&'c CandidateFeatures>,
}

impl ReducedModel<'_> {
    fn rules(&self, example: usize, query: usize) -> impl Iterator<Item = &RuleFeature> {
        let base = &self.cache.examples[example].queries[query].rules;
        let extra = self.candidate.and_then(|c| c.0[example][query].as_ref());
        base.iter().chain(extra)
    }

    fn contribution(&self, rule: &RuleFeature, weights: &WeightStore) -> f64 {
        let act = &self.cache.params.activation;
        let w = weights.get(rule.key);
        match self.cache.params.placement {
            RuleWeightPlacement::Aggregation => w * rule.mean,
            RuleWeightPlacement::Conjunction => rule.conjunction_values(w, act).sum::<f64>() / rule.sums.len() as f64,
        }
    }
}

impl Model for ReducedModel<'_> {
    type State = Vec<Option<f64>>;

    fn example_count(&self) -> usize {
        self.cache.examples.len()
    }

    fn forward(&self, example: usize, weights: &WeightStore) -> Self::State {
        let act = &self.cache.params.activation;
        let ex = &self.cache.examples[example];
        (0..ex.queries.len())
            .map(|q| {
                let facts = &ex.queries[q].facts;
                let mut present = !facts.is_empty();
                let mut sum: f64 = facts.iter().sum();
                for rule in self.rules(example, q) {
                    present = true;
                    sum += self.contribution(rule, weights);
                }
                present.then(|| sigm(act.a * (sum + act.b0)))
            })
            .collect()
    }

    fn output(&self, _example: usize, state: &Self::State, query: usize) -> Option<f64> {
        state[query]
    }

    fn backward(
        &self,
        example: usize,
        state: &Self::State,
        weights: &WeightStore,
        loss_grads: &[(usize, f64)],
        grad: &mut [f64],
    ) {
        let a = self.cache.params.activation.a;
        for &(q, g) in loss_grads {
            let Some(y) = state[q] else { continue };
            let d = g * a * y * (1.0 - y);
            for rule in self.rules(example, q) {
                grad[rule.key.0] += match self.cache.params.placement {
                    RuleWeightPlacement::Aggregation => d * rule.mean,
                    RuleWeightPlacement::Conjunction => {
                        let w = weights.get(rule.key);
                        let n = rule.sums.len() as f64;
                        rule.conjunction_values(w, &self.cache.params.activation)
                            .map(|s| d / n * a * s * (1.0 - s))
                            .sum::<f64>()
                    }
                };
            }
        }
    }
}
