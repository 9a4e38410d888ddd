//! Embedding snapshots, template statistics and CSV reports.

use std::fmt;
use std::fs::OpenOptions;
use std::path::Path;

use crate::error::Result;
use crate::logic::Term;
use crate::structure::IterationRecord;
use crate::symbol::Symbol;
use crate::template::{HeadKind, Template};
use crate::weights::WeightStore;

/// Layer-1 rule weights: one row per unary dataset predicate, one column
/// per layer-1 latent predicate.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingMatrix {
    pub iteration: usize,
    pub predicates: Vec<Symbol>,
    pub values: Vec<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn from_template(template: &Template, weights: &WeightStore, iteration: usize) -> Self {
        let mut latents = template.layer1_latents();
        latents.sort_by_key(|l| l.index);
        let mut predicates: Vec<Symbol> = Vec::new();
        let mut cells: Vec<(Symbol, usize, f64)> = Vec::new();
        for c in template.clauses() {
            let clause = &c.clause;
            let Some(col) = latents.iter().position(|l| l.name == clause.head.predicate) else {
                continue;
            };
            let [body] = clause.body.as_slice() else { continue };
            let unary = body.arity() == 1
                && clause.head.args == body.args
                && matches!(body.args[0], Term::Var(_))
                && template.predicate_layer(body.predicate) == 0;
            if unary {
                if !predicates.contains(&body.predicate) {
                    predicates.push(body.predicate);
                }
                cells.push((body.predicate, col, weights.get(c.key)));
            }
        }
        predicates.sort();
        let mut values = vec![vec![0.0; latents.len()]; predicates.len()];
        for (p, col, w) in cells {
            let row = predicates.binary_search(&p).unwrap();
            values[row][col] = w;
        }
        EmbeddingMatrix { iteration, predicates, values }
    }

    pub fn dims(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }
}

/// Appends a snapshot to a CSV file, writing the header when the file is new
/// or empty.
pub fn append_embeddings(path: &Path, matrix: &EmbeddingMatrix) -> Result<()> {
    let fresh = std::fs::metadata(path).map_or(true, |m| m.len() == 0);
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        let mut header = vec!["iteration".to_string(), "predicate".to_string()];
        header.extend((1..=matrix.dims()).map(|j| format!("dim{j}")));
        w.write_record(&header)?;
    }
    for (p, row) in matrix.predicates.iter().zip(&matrix.values) {
        let mut record = vec![matrix.iteration.to_string(), p.to_string()];
        record.extend(row.iter().map(f64::to_string));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Rule count, learned target rules, their average body length, and depth
/// (number of layers counting the fact layer 0).
#[derive(Clone, Debug, PartialEq)]
pub struct TemplateStats {
    pub rules: usize,
    pub learned_patterns: usize,
    pub avg_pattern_length: f64,
    pub depth: usize,
}

pub fn template_stats(template: &Template) -> TemplateStats {
    let learned: Vec<usize> = template
        .clauses()
        .iter()
        .filter(|c| c.head_kind == HeadKind::Target && !c.clause.body.is_empty())
        .map(|c| c.clause.body.len())
        .collect();
    let avg = if learned.is_empty() { 0.0 } else { learned.iter().sum::<usize>() as f64 / learned.len() as f64 };
    TemplateStats {
        rules: template.len(),
        learned_patterns: learned.len(),
        avg_pattern_length: avg,
        depth: template.max_layer() + 1,
    }
}

impl fmt::Display for TemplateStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "rules: {}", self.rules)?;
        writeln!(f, "learned_patterns: {}", self.learned_patterns)?;
        writeln!(f, "avg_pattern_length: {}", self.avg_pattern_length)?;
        writeln!(f, "depth: {}", self.depth)
    }
}

/// One row per structure-learning iteration.
pub fn write_history_csv<W: std::io::Write>(out: W, history: &[IterationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "iteration",
        "rule",
        "score",
        "baseline",
        "invented",
        "train_squared_loss",
        "train_log_loss",
        "train_accuracy",
    ])?;
    for r in history {
        w.write_record([
            r.iteration.to_string(),
            r.rule.to_string(),
            r.score.to_string(),
            r.baseline.to_string(),
            r.invented.len().to_string(),
            r.metrics.squared_loss.to_string(),
            r.metrics.log_loss.to_string(),
            r.metrics.accuracy.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
