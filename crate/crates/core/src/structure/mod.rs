//! Stacked structure learning: a layer of soft clusters over the unary
//! dataset predicates, then alternating rule search for target predicates,
//! invention of latent predicates on top of each found rule, and retraining.

mod beam;
mod invent;
mod layer1;
mod refine;
mod score;

pub use beam::{beam_search, vocabulary, BeamResult, SearchOutcome};
pub use invent::invent_predicates;
pub use layer1::create_layer1_rules;
pub use refine::{canonical_form, refine, seed_candidates, target_head, CandidateRule, Vocabulary};
pub use score::{candidate_init, score_rule, Scored, Scorer};

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::logic::Clause;
use crate::symbol::Symbol;
use crate::template::{HeadKind, Template};
use crate::train::{evaluate, train_weights, LossKind, Metrics, TrainConfig};
use crate::weights::{init_draw, WeightStore};

#[derive(Clone, Debug, PartialEq)]
pub struct SearchConfig {
    /// Number of latent predicates per layer.
    pub d: usize,
    pub max_rule_length: usize,
    pub max_variables: usize,
    /// `usize::MAX` keeps every candidate.
    pub beam_width: usize,
    pub max_iterations: usize,
    /// Arity of invented predicates above layer 1.
    pub latent_arity: usize,
    pub min_score_improvement: f64,
    /// Score candidates on cached latent values (same scores, faster).
    pub use_cache: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            d: 3,
            max_rule_length: 4,
            max_variables: 4,
            beam_width: 5,
            max_iterations: 8,
            latent_arity: 1,
            min_score_improvement: 1e-3,
            use_cache: true,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d", self.d),
            ("max rule length", self.max_rule_length),
            ("max variables", self.max_variables),
            ("beam width", self.beam_width),
            ("latent arity", self.latent_arity),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if self.min_score_improvement.is_nan() || self.min_score_improvement < 0.0 {
            return Err(Error::Config("minimum score improvement must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LearnConfig {
    pub search: SearchConfig,
    pub train: TrainConfig,
}

/// Summary of one accepted rule.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub rule: Clause,
    pub score: f64,
    pub baseline: f64,
    pub invented: Vec<Clause>,
    pub evaluated: usize,
    /// Training metrics after retraining.
    pub metrics: Metrics,
    /// Retraining raised the log-loss above the rule's score and was undone.
    pub reverted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    NoRuleFound,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LearnOutcome {
    pub template: Template,
    pub weights: WeightStore,
    pub history: Vec<IterationRecord>,
    pub stop: StopReason,
}

/// Log-loss slack allowed after retraining before it is undone.
const RETRAIN_SLACK: f64 = 1e-6;

pub fn structure_learn(data: &Dataset, cfg: &LearnConfig) -> Result<LearnOutcome> {
    structure_learn_with(data, cfg, &mut |_, _, _| {})
}

/// Layer-1 template with its seeded initial weights, the state before the
/// first iteration.
pub fn initial_state(data: &Dataset, cfg: &LearnConfig) -> Result<(Template, WeightStore)> {
    let template = create_layer1_rules(data, cfg.search.d)?;
    let weights = WeightStore::uniform(template.len(), cfg.train.seed);
    Ok((template, weights))
}

/// [`structure_learn`] calling `observer` after every iteration.
pub fn structure_learn_with(
    data: &Dataset,
    cfg: &LearnConfig,
    observer: &mut dyn FnMut(&Template, &WeightStore, &IterationRecord),
) -> Result<LearnOutcome> {
    cfg.search.validate()?;
    cfg.train.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let search = &cfg.search;
    let (mut template, mut weights) = initial_state(data, cfg)?;
    let reserved: BTreeSet<Symbol> =
        data.fact_predicates().into_keys().chain(data.target_predicates().into_keys()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.train.seed);
    rng.set_stream(u64::MAX);

    let mut history = Vec::new();
    let mut stop = StopReason::MaxIterations;
    for iteration in 1..=search.max_iterations {
        let train = TrainConfig { seed: cfg.train.seed.wrapping_add(iteration as u64), ..cfg.train.clone() };
        for k in template.keys_with_kind(HeadKind::Latent) {
            weights.set_frozen(k, true);
        }
        let found = match beam_search(&template, &weights, data, search, &train)? {
            SearchOutcome::Found(found) => found,
            SearchOutcome::NoRuleFound { best, baseline } => {
                log::info!(
                    "iteration {iteration}: no rule improves {baseline:.6} (best {})",
                    best.map(|b| b.to_string()).unwrap_or_else(|| "none".into())
                );
                stop = StopReason::NoRuleFound;
                break;
            }
        };
        let rule = found.best.clause.clone();
        weights = found.weights;
        weights.unfreeze_all();
        let key = template.push(rule.clone())?;
        debug_assert_eq!(key.0 + 1, weights.len());

        let invented = invent_predicates(&rule, &mut template, search.d, search.latent_arity, &reserved)?;
        for clause in &invented {
            template.push(clause.clone())?;
            weights.push(init_draw(&mut rng));
        }
        template.check_stratification().map_err(Error::Config)?;

        let retrain = TrainConfig { loss: LossKind::Squared, ..train.clone() };
        let before = weights.clone();
        let outcome = train_weights(&template, data, &weights, &retrain, &[])?;
        let after = evaluate(&template, &outcome.weights, data, train.network, train.execution)?;
        let reverted = after.log_loss > found.best.score + RETRAIN_SLACK;
        let metrics = if reverted {
            weights = before;
            evaluate(&template, &weights, data, train.network, train.execution)?
        } else {
            weights = outcome.weights;
            after
        };
        let record = IterationRecord {
            iteration,
            rule,
            score: found.best.score,
            baseline: found.baseline,
            invented,
            evaluated: found.evaluated,
            metrics,
            reverted,
        };
        log::info!(
            "iteration {iteration}: {} score {:.6} (baseline {:.6}), train acc {:.4}{}",
            record.rule,
            record.score,
            record.baseline,
            record.metrics.accuracy,
            if reverted { ", retraining undone" } else { "" }
        );
        observer(&template, &weights, &record);
        history.push(record);
    }
    Ok(LearnOutcome { template, weights, history, stop })
}
