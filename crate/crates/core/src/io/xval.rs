//! Stratified k-fold cross-validation of structure learning.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::structure::{structure_learn, LearnConfig};
use crate::train::{evaluate, Metrics};

/// Splits example indices into `folds` test sets. Each class is shuffled
/// and dealt round-robin, continuing across classes, so fold sizes differ
/// by at most one and class proportions are preserved.
pub fn stratified_folds(data: &Dataset, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::Folds("at least 2 folds are needed".into()));
    }
    if folds > data.len() {
        return Err(Error::Folds(format!("{folds} folds for {} examples", data.len())));
    }
    let mut classes: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for i in 0..data.len() {
        match data.label(i) {
            Some(label) => classes[label as usize].push(i),
            None => return Err(Error::Folds(format!("example {} has no query", data.examples[i].id))),
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::new(); folds];
    let mut next = 0;
    for class in &mut classes {
        class.shuffle(&mut rng);
        for &i in class.iter() {
            out[next % folds].push(i);
            next += 1;
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    // every training portion keeps both classes
    for (f, test) in out.iter().enumerate() {
        for (label, class) in classes.iter().enumerate() {
            if class.iter().all(|i| test.contains(i)) {
                let name = if label == 1 { "positive" } else { "negative" };
                return Err(Error::Folds(format!("no {name} example outside fold {}", f + 1)));
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub rules: usize,
    pub train: Metrics,
    pub test: Metrics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValidation {
    pub folds: Vec<FoldResult>,
}

impl CrossValidation {
    pub fn mean_test_accuracy(&self) -> f64 {
        self.folds.iter().map(|f| f.test.accuracy).sum::<f64>() / self.folds.len() as f64
    }

    pub fn mean_train_accuracy(&self) -> f64 {
        self.folds.iter().map(|f| f.train.accuracy).sum::<f64>() / self.folds.len() as f64
    }

    /// Per-fold rows followed by a `mean` row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "fold",
            "train_size",
            "test_size",
            "rules",
            "train_accuracy",
            "train_log_loss",
            "test_accuracy",
            "test_log_loss",
        ])?;
        let n = self.folds.len() as f64;
        for f in &self.folds {
            w.write_record([
                f.fold.to_string(),
                f.train_size.to_string(),
                f.test_size.to_string(),
                f.rules.to_string(),
                f.train.accuracy.to_string(),
                f.train.log_loss.to_string(),
                f.test.accuracy.to_string(),
                f.test.log_loss.to_string(),
            ])?;
        }
        let mean = |g: &dyn Fn(&FoldResult) -> f64| (self.folds.iter().map(g).sum::<f64>() / n).to_string();
        w.write_record([
            "mean".to_string(),
            mean(&|f| f.train_size as f64),
            mean(&|f| f.test_size as f64),
            mean(&|f| f.rules as f64),
            mean(&|f| f.train.accuracy),
            mean(&|f| f.train.log_loss),
            mean(&|f| f.test.accuracy),
            mean(&|f| f.test.log_loss),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Learns on each training portion and evaluates on the held-out fold.
/// Folds are drawn with the training seed.
pub fn cross_validate(data: &Dataset, folds: usize, cfg: &LearnConfig) -> Result<CrossValidation> {
    let splits = stratified_folds(data, folds, cfg.train.seed)?;
    let mut results = Vec::with_capacity(folds);
    for (f, test_idx) in splits.iter().enumerate() {
        let train_idx: Vec<usize> = (0..data.len()).filter(|i| !test_idx.contains(i)).collect();
        let train = data.subset(&train_idx);
        let test = data.subset(test_idx);
        let learned = structure_learn(&train, cfg)?;
        let params = cfg.train.network;
        let exec = cfg.train.execution;
        let train_m = evaluate(&learned.template, &learned.weights, &train, params, exec)?;
        let test_m = evaluate(&learned.template, &learned.weights, &test, params, exec)?;
        log::info!("fold {}: train acc {:.4}, test acc {:.4}", f + 1, train_m.accuracy, test_m.accuracy);
        results.push(FoldResult {
            fold: f + 1,
            train_size: train.len(),
            test_size: test.len(),
            rules: learned.template.len(),
            train: train_m,
            test: test_m,
        });
    }
    Ok(CrossValidation { folds: results })
}
