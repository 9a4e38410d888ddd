use std::collections::BTreeSet;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::exec::Execution;
use crate::logic::Clause;
use crate::template::{HeadKind, Template};
use crate::train::TrainConfig;
use crate::weights::WeightStore;

use super::refine::{canonical_form, refine, seed_candidates, target_head, CandidateRule, Vocabulary};
use super::score::Scorer;
use super::SearchConfig;

/// The best rule of a search together with the weights it was scored with.
#[derive(Clone, Debug, PartialEq)]
pub struct BeamResult {
    pub best: CandidateRule,
    /// Weights after scoring `best`; the last key belongs to `best`.
    pub weights: WeightStore,
    /// Score of the current template without a new rule.
    pub baseline: f64,
    pub final_beam: Vec<CandidateRule>,
    pub evaluated: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SearchOutcome {
    Found(BeamResult),
    /// No candidate improved on the baseline by the required margin.
    NoRuleFound {
        best: Option<CandidateRule>,
        baseline: f64,
    },
}

/// Body vocabulary: dataset fact predicates that are not targets, plus every
/// latent predicate declared in the template.
pub fn vocabulary(template: &Template, data: &Dataset) -> Vocabulary {
    let mut preds: Vec<_> = data.fact_predicates().into_iter().filter(|(p, _)| !template.is_target(*p)).collect();
    preds.extend(template.latent_vocabulary());
    Vocabulary::new(preds)
}

/// Beam search over target-predicate rules, scored by log-loss after
/// training the non-latent weights.
pub fn beam_search(
    template: &Template,
    weights: &WeightStore,
    data: &Dataset,
    search: &SearchConfig,
    train: &TrainConfig,
) -> Result<SearchOutcome> {
    search.validate()?;
    let outer = train.execution;
    let inner = TrainConfig { execution: Execution::Sequential, ..train.clone() };
    let scorer = Scorer::new(template, weights, data, &inner, search.use_cache)?;
    let baseline = scorer.baseline()?;
    let vocab = vocabulary(template, data);

    let mut seen: BTreeSet<Clause> = template
        .clauses()
        .iter()
        .filter(|c| c.head_kind == HeadKind::Target)
        .map(|c| canonical_form(&c.clause))
        .collect();
    let mut fresh = |cands: Vec<CandidateRule>| -> Vec<CandidateRule> {
        cands.into_iter().filter(|c| seen.insert(c.clause.clone())).collect()
    };

    let mut frontier = Vec::new();
    for (&pred, &arity) in template.targets() {
        frontier.extend(seed_candidates(&target_head(pred, arity), &vocab, search));
    }
    frontier = fresh(frontier);

    let mut best: Option<(CandidateRule, WeightStore)> = None;
    let mut beam: Vec<CandidateRule> = Vec::new();
    let mut evaluated = 0;
    while !frontier.is_empty() {
        let scored = outer.map(&frontier, |c| scorer.score(&c.clause));
        evaluated += frontier.len();
        let mut level = Vec::with_capacity(frontier.len());
        for (mut cand, result) in frontier.into_iter().zip(scored) {
            let result = result?;
            cand.score = result.score;
            let better = best.as_ref().is_none_or(|(b, _)| cand.ranking(b) == std::cmp::Ordering::Less);
            if better {
                best = Some((cand.clone(), result.weights));
            }
            level.push(cand);
        }
        level.sort_by(|a, b| a.ranking(b));
        level.truncate(search.beam_width);
        beam = level;
        log::debug!(
            "beam level: {} kept, best {}",
            beam.len(),
            best.as_ref().map(|b| b.0.to_string()).unwrap_or_default()
        );
        let children: Vec<CandidateRule> = beam.iter().flat_map(|c| refine(c, &vocab, search)).collect();
        frontier = fresh(children);
    }

    match best {
        Some((rule, weights)) if baseline - rule.score >= search.min_score_improvement => {
            Ok(SearchOutcome::Found(BeamResult { best: rule, weights, baseline, final_beam: beam, evaluated }))
        }
        other => Ok(SearchOutcome::NoRuleFound { best: other.map(|b| b.0), baseline }),
    }
}
