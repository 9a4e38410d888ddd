//! Losses, stochastic gradient descent over shared weights, and evaluation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{backward_into, forward, NetworkParams, Tape};
use crate::dataset::{Dataset, QuerySet};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::network::{build_network_with, GroundNetwork};
use crate::template::{Template, WeightKey};
use crate::weights::{init_draw, WeightStore};

/// Predictions are clamped into `[LOG_CLAMP, 1 - LOG_CLAMP]` before taking logs.
pub const LOG_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LossKind {
    #[default]
    Squared,
    Logistic,
}

pub fn squared_loss(y: f64, t: f64) -> f64 {
    (y - t) * (y - t)
}

pub fn log_loss(y: f64, t: f64) -> f64 {
    let y = y.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
    -(t * y.ln() + (1.0 - t) * (1.0 - y).ln())
}

impl LossKind {
    pub fn loss(self, y: f64, t: f64) -> f64 {
        match self {
            LossKind::Squared => squared_loss(y, t),
            LossKind::Logistic => log_loss(y, t),
        }
    }

    /// d(loss)/d(y).
    pub fn derivative(self, y: f64, t: f64) -> f64 {
        match self {
            LossKind::Squared => 2.0 * (y - t),
            LossKind::Logistic => {
                let y = y.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
                -t / y + (1.0 - t) / (1.0 - y)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Number of (example, query) pairs per update.
    pub minibatch_size: usize,
    pub restarts: usize,
    pub seed: u64,
    pub loss: LossKind,
    pub network: NetworkParams,
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.3,
            epochs: 400,
            minibatch_size: 1,
            restarts: 1,
            seed: 0,
            loss: LossKind::Squared,
            network: NetworkParams::default(),
            execution: Execution::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.minibatch_size == 0 {
            return Err(Error::Config("minibatch size must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(Error::Config("restarts must be at least 1".into()));
        }
        Ok(())
    }
}

/// A set of per-example differentiable models over one shared weight store.
pub trait Model: Sync {
    type State: Send;

    fn example_count(&self) -> usize;

    fn forward(&self, example: usize, weights: &WeightStore) -> Self::State;

    /// Output of a query, `None` if the query atom is not derivable.
    fn output(&self, example: usize, state: &Self::State, query: usize) -> Option<f64>;

    /// Adds d(loss)/d(w) to `grad` given d(loss)/d(output) per query.
    fn backward(
        &self,
        example: usize,
        state: &Self::State,
        weights: &WeightStore,
        loss_grads: &[(usize, f64)],
        grad: &mut [f64],
    );
}

/// Ground networks of a dataset.
pub struct NetworkModel {
    pub networks: Vec<GroundNetwork>,
    pub params: NetworkParams,
}

impl NetworkModel {
    /// Builds one network per example from the template clauses in `keys`.
    pub fn build(
        template: &Template,
        keys: &[WeightKey],
        data: &Dataset,
        params: NetworkParams,
        execution: Execution,
    ) -> Result<Self> {
        let built = execution.map_range(data.len(), |i| {
            let atoms: Vec<_> = data.queries[i].iter().map(|q| q.atom.clone()).collect();
            build_network_with(template, keys, &data.examples[i], &atoms)
        });
        Ok(NetworkModel { networks: built.into_iter().collect::<Result<_>>()?, params })
    }
}

impl Model for NetworkModel {
    type State = Tape;

    fn example_count(&self) -> usize {
        self.networks.len()
    }

    fn forward(&self, example: usize, weights: &WeightStore) -> Tape {
        forward(&self.networks[example], weights, &self.params)
    }

    fn output(&self, example: usize, state: &Tape, query: usize) -> Option<f64> {
        self.networks[example].query_outputs()[query].map(|n| state.values[n as usize])
    }

    fn backward(
        &self,
        example: usize,
        state: &Tape,
        weights: &WeightStore,
        loss_grads: &[(usize, f64)],
        grad: &mut [f64],
    ) {
        let net = &self.networks[example];
        let mut adjoint = vec![0.0; net.len()];
        backward_into(net, state, weights, &self.params, loss_grads, &mut adjoint, grad);
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Metrics {
    pub squared_loss: f64,
    pub log_loss: f64,
    pub accuracy: f64,
    pub queries: usize,
}

impl Metrics {
    pub fn loss(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Squared => self.squared_loss,
            LossKind::Logistic => self.log_loss,
        }
    }
}

/// Mean losses and 0.5-threshold accuracy; absent queries output 0.
pub fn model_metrics<M: Model>(model: &M, queries: &QuerySet, weights: &WeightStore, execution: Execution) -> Metrics {
    let per_example = execution.map_range(model.example_count(), |e| {
        let state = model.forward(e, weights);
        let mut sq = 0.0;
        let mut ll = 0.0;
        let mut correct = 0usize;
        for (qi, q) in queries[e].iter().enumerate() {
            let y = model.output(e, &state, qi).unwrap_or(0.0);
            sq += squared_loss(y, q.target);
            ll += log_loss(y, q.target);
            if (y >= 0.5) == (q.target >= 0.5) {
                correct += 1;
            }
        }
        (sq, ll, correct, queries[e].len())
    });
    let mut m = Metrics::default();
    let mut correct = 0;
    for (sq, ll, c, n) in per_example {
        m.squared_loss += sq;
        m.log_loss += ll;
        correct += c;
        m.queries += n;
    }
    if m.queries > 0 {
        let n = m.queries as f64;
        m.squared_loss /= n;
        m.log_loss /= n;
        m.accuracy = correct as f64 / n;
    }
    m
}

/// Summed loss J over all queries.
pub fn total_loss<M: Model>(
    model: &M,
    queries: &QuerySet,
    weights: &WeightStore,
    kind: LossKind,
    execution: Execution,
) -> f64 {
    execution
        .map_range(model.example_count(), |e| {
            let state = model.forward(e, weights);
            queries[e]
                .iter()
                .enumerate()
                .map(|(qi, q)| kind.loss(model.output(e, &state, qi).unwrap_or(0.0), q.target))
                .sum::<f64>()
        })
        .into_iter()
        .sum()
}

/// Gradient of J over the given (example, query) pairs, summed.
/// Per-example gradients are reduced in example order.
pub fn batch_gradient<M: Model>(
    model: &M,
    queries: &QuerySet,
    weights: &WeightStore,
    pairs: &[(usize, usize)],
    kind: LossKind,
    execution: Execution,
) -> Vec<f64> {
    let mut total = vec![0.0; weights.len()];
    gradient_into(model, queries, weights, pairs, kind, execution, &mut total);
    total
}

fn example_gradient<M: Model>(
    model: &M,
    queries: &QuerySet,
    weights: &WeightStore,
    e: usize,
    pairs: &[(usize, usize)],
    kind: LossKind,
    grad: &mut [f64],
) {
    let state = model.forward(e, weights);
    let loss_grads: Vec<(usize, f64)> = pairs
        .iter()
        .filter(|p| p.0 == e)
        .filter_map(|&(_, qi)| model.output(e, &state, qi).map(|y| (qi, kind.derivative(y, queries[e][qi].target))))
        .collect();
    if !loss_grads.is_empty() {
        model.backward(e, &state, weights, &loss_grads, grad);
    }
}

/// [`batch_gradient`] into a caller-owned buffer, overwriting it.
fn gradient_into<M: Model>(
    model: &M,
    queries: &QuerySet,
    weights: &WeightStore,
    pairs: &[(usize, usize)],
    kind: LossKind,
    execution: Execution,
    total: &mut [f64],
) {
    total.iter_mut().for_each(|x| *x = 0.0);
    let mut examples: Vec<usize> = Vec::new();
    for &(e, _) in pairs {
        if !examples.contains(&e) {
            examples.push(e);
        }
    }
    if let [e] = examples[..] {
        example_gradient(model, queries, weights, e, pairs, kind, total);
        return;
    }
    let grads = execution.map(&examples, |&e| {
        let mut grad = vec![0.0; weights.len()];
        example_gradient(model, queries, weights, e, pairs, kind, &mut grad);
        grad
    });
    for g in grads {
        for (t, x) in total.iter_mut().zip(g) {
            *t += x;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub restart: usize,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub weights: WeightStore,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Minibatch SGD on J. Only keys with `trainable[k]` and not frozen move.
///
/// Restart 0 continues from `weights`; later restarts redraw the trainable
/// weights. The best of the initial weights and every restart is returned,
/// so the final J never exceeds the initial J.
pub fn train_model<M: Model>(
    model: &M,
    queries: &QuerySet,
    weights: &WeightStore,
    trainable: &[bool],
    cfg: &TrainConfig,
    mut observer: Option<&mut dyn FnMut(EpochStats)>,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    let exec = cfg.execution;
    let any_present = (0..model.example_count()).any(|e| {
        let state = model.forward(e, weights);
        (0..queries[e].len()).any(|q| model.output(e, &state, q).is_some())
    });
    if !any_present {
        return Err(Error::NothingTrainable);
    }
    let mask: Vec<bool> = (0..weights.len())
        .map(|k| trainable.get(k).copied().unwrap_or(false) && !weights.is_frozen(WeightKey(k)))
        .collect();

    let initial_loss = total_loss(model, queries, weights, cfg.loss, exec);
    let mut best = (initial_loss, weights.clone());
    let mut pairs: Vec<(usize, usize)> =
        (0..model.example_count()).flat_map(|e| (0..queries[e].len()).map(move |q| (e, q))).collect();
    let mut grad = vec![0.0; weights.len()];

    for restart in 0..cfg.restarts {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(restart as u64);
        let mut w = weights.clone();
        if restart > 0 {
            for (k, &m) in mask.iter().enumerate() {
                if m {
                    w.set(WeightKey(k), init_draw(&mut rng));
                }
            }
        }
        for epoch in 0..cfg.epochs {
            pairs.shuffle(&mut rng);
            for chunk in pairs.chunks(cfg.minibatch_size) {
                gradient_into(model, queries, &w, chunk, cfg.loss, exec, &mut grad);
                w.step(&grad, cfg.learning_rate / chunk.len() as f64, &mask);
            }
            if let Some(obs) = observer.as_mut() {
                let m = model_metrics(model, queries, &w, exec);
                obs(EpochStats { restart, epoch: epoch + 1, loss: m.loss(cfg.loss), accuracy: m.accuracy });
            }
        }
        let loss = total_loss(model, queries, &w, cfg.loss, exec);
        if loss < best.0 {
            best = (loss, w);
        }
    }
    Ok(TrainOutcome { weights: best.1, initial_loss, final_loss: best.0 })
}

/// Trains the template's weights on a dataset. Keys in `frozen` (and keys
/// frozen in the store) stay bit-identical, as do keys of clauses that no
/// query depends on.
pub fn train_weights(
    template: &Template,
    data: &Dataset,
    weights: &WeightStore,
    cfg: &TrainConfig,
    frozen: &[WeightKey],
) -> Result<TrainOutcome> {
    train_weights_logged(template, data, weights, cfg, frozen, None)
}

/// [`train_weights`] with a per-epoch observer.
pub fn train_weights_logged(
    template: &Template,
    data: &Dataset,
    weights: &WeightStore,
    cfg: &TrainConfig,
    frozen: &[WeightKey],
    observer: Option<&mut dyn FnMut(EpochStats)>,
) -> Result<TrainOutcome> {
    let keys = template.relevant_keys();
    let model = NetworkModel::build(template, &keys, data, cfg.network, cfg.execution)?;
    let mut trainable = vec![false; weights.len()];
    for k in keys {
        trainable[k.0] = !frozen.contains(&k);
    }
    train_model(&model, &data.queries, weights, &trainable, cfg, observer)
}

/// Mean losses and accuracy of a template on a dataset.
pub fn evaluate(
    template: &Template,
    weights: &WeightStore,
    data: &Dataset,
    params: NetworkParams,
    execution: Execution,
) -> Result<Metrics> {
    let keys = template.relevant_keys();
    let model = NetworkModel::build(template, &keys, data, params, execution)?;
    Ok(model_metrics(&model, &data.queries, weights, execution))
}
