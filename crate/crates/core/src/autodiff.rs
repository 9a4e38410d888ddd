//! Forward evaluation of ground networks and reverse-mode gradients with
//! respect to the shared weights.
//!
//! Activations:
//!
//! * atom neurons: `g_or(b) = sigm(a * (sum(b) + b0))`
//! * rule neurons: `g_and(b) = sigm(a * (sum(b) - k + 1 + b0))`
//! * aggregation neurons: `w * g_star(b)` with `g_star` the arithmetic mean
//! * fact neurons: their weight
//!
//! With `a = 6` and `b0 = -0.5` the two sigmoids track Łukasiewicz
//! disjunction `min(1, sum)` and conjunction `max(0, sum - k + 1)`.

use crate::error::{Error, Result};
use crate::network::{FactWeight, GroundNetwork, NeuronKind};
use crate::template::WeightKey;
use crate::weights::WeightStore;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActivationParams {
    /// Sigmoid sharpness.
    pub a: f64,
    /// Offset.
    pub b0: f64,
}

impl Default for ActivationParams {
    fn default() -> Self {
        ActivationParams { a: 6.0, b0: -0.5 }
    }
}

/// Where a rule's weight enters the computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RuleWeightPlacement {
    /// Aggregation outputs `w * mean(rule values)`; rule neurons are unweighted.
    #[default]
    Aggregation,
    /// Rule neurons output `sigm(a * (sum + w - k + 1 + b0))` (w not counted in
    /// k); aggregation outputs the plain mean.
    Conjunction,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NetworkParams {
    pub activation: ActivationParams,
    pub placement: RuleWeightPlacement,
}

#[inline]
pub fn sigm(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl ActivationParams {
    #[inline]
    fn or_sum(&self, sum: f64) -> f64 {
        sigm(self.a * (sum + self.b0))
    }

    #[inline]
    pub(crate) fn and_sum(&self, sum: f64, k: usize) -> f64 {
        sigm(self.a * (sum - k as f64 + 1.0 + self.b0))
    }

    /// Soft disjunction.
    pub fn g_or(&self, inputs: &[f64]) -> f64 {
        self.or_sum(inputs.iter().sum())
    }

    /// Soft conjunction; fails on an empty input list.
    pub fn g_and(&self, inputs: &[f64]) -> Result<f64> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("g_and"));
        }
        Ok(self.and_sum(inputs.iter().sum(), inputs.len()))
    }
}

/// Soft disjunction with the default parameters.
pub fn g_or(inputs: &[f64]) -> f64 {
    ActivationParams::default().g_or(inputs)
}

/// Soft conjunction with the default parameters.
pub fn g_and(inputs: &[f64]) -> Result<f64> {
    ActivationParams::default().g_and(inputs)
}

/// Arithmetic mean; fails on an empty input list.
pub fn g_star(inputs: &[f64]) -> Result<f64> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("g_star"));
    }
    Ok(inputs.iter().sum::<f64>() / inputs.len() as f64)
}

/// Forward values of every neuron.
#[derive(Clone, Debug)]
pub struct Tape {
    pub values: Vec<f64>,
}

impl Tape {
    pub fn value(&self, neuron: usize) -> f64 {
        self.values[neuron]
    }

    /// Output of query `q`; queries absent from the grounding output 0.
    pub fn query_output(&self, net: &GroundNetwork, q: usize) -> f64 {
        net.query_outputs()[q].map_or(0.0, |n| self.values[n as usize])
    }
}

pub fn forward(net: &GroundNetwork, weights: &WeightStore, params: &NetworkParams) -> Tape {
    let act = &params.activation;
    let mut values = vec![0.0; net.len()];
    for &i in net.order() {
        let i = i as usize;
        let inputs = net.inputs(i);
        let sum = || inputs.iter().map(|&j| values[j as usize]).sum::<f64>();
        values[i] = match net.neurons()[i].kind {
            NeuronKind::Fact { weight, .. } => match weight {
                FactWeight::Shared(k) => weights.get(k),
                FactWeight::Fixed(w) => w,
            },
            NeuronKind::Atom { .. } => act.or_sum(sum()),
            NeuronKind::Rule { key, .. } => match params.placement {
                RuleWeightPlacement::Aggregation => act.and_sum(sum(), inputs.len()),
                RuleWeightPlacement::Conjunction => act.and_sum(sum() + weights.get(key), inputs.len()),
            },
            NeuronKind::Aggregation { key, .. } => {
                let mean = sum() / inputs.len() as f64;
                match params.placement {
                    RuleWeightPlacement::Aggregation => weights.get(key) * mean,
                    RuleWeightPlacement::Conjunction => mean,
                }
            }
        };
    }
    Tape { values }
}

/// Gradient of a scalar loss with respect to the unfrozen weights.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMap {
    entries: Vec<Option<f64>>,
}

impl GradientMap {
    pub fn get(&self, key: WeightKey) -> Option<f64> {
        self.entries.get(key.0).copied().flatten()
    }

    pub fn iter(&self) -> impl Iterator<Item = (WeightKey, f64)> + '_ {
        self.entries.iter().enumerate().filter_map(|(i, g)| g.map(|g| (WeightKey(i), g)))
    }
}

/// Reverse sweep. `loss_grads` pairs a query index with d(loss)/d(output).
/// Every unfrozen key gets an entry (zero if the graph does not use it).
pub fn backward(
    net: &GroundNetwork,
    tape: &Tape,
    weights: &WeightStore,
    params: &NetworkParams,
    loss_grads: &[(usize, f64)],
) -> GradientMap {
    let mut grad = vec![0.0; weights.len()];
    let mut adjoint = vec![0.0; net.len()];
    backward_into(net, tape, weights, params, loss_grads, &mut adjoint, &mut grad);
    GradientMap {
        entries: grad.into_iter().enumerate().map(|(i, g)| (!weights.is_frozen(WeightKey(i))).then_some(g)).collect(),
    }
}

/// Accumulates d(loss)/d(w) into `grad` (dense over all keys, frozen ones
/// included). `adjoint` is scratch space of length `net.len()`.
pub fn backward_into(
    net: &GroundNetwork,
    tape: &Tape,
    weights: &WeightStore,
    params: &NetworkParams,
    loss_grads: &[(usize, f64)],
    adjoint: &mut [f64],
    grad: &mut [f64],
) {
    let a = params.activation.a;
    adjoint.iter_mut().for_each(|x| *x = 0.0);
    for &(q, g) in loss_grads {
        if let Some(n) = net.query_outputs()[q] {
            adjoint[n as usize] += g;
        }
    }
    for &i in net.order().iter().rev() {
        let i = i as usize;
        let adj = adjoint[i];
        if adj == 0.0 {
            continue;
        }
        let value = tape.values[i];
        let inputs = net.inputs(i);
        match net.neurons()[i].kind {
            NeuronKind::Fact { weight, .. } => {
                if let FactWeight::Shared(k) = weight {
                    grad[k.0] += adj;
                }
            }
            NeuronKind::Atom { .. } => {
                let d = adj * a * value * (1.0 - value);
                for &j in inputs {
                    adjoint[j as usize] += d;
                }
            }
            NeuronKind::Rule { key, .. } => {
                let d = adj * a * value * (1.0 - value);
                for &j in inputs {
                    adjoint[j as usize] += d;
                }
                if params.placement == RuleWeightPlacement::Conjunction {
                    grad[key.0] += d;
                }
            }
            NeuronKind::Aggregation { key, .. } => {
                let m = inputs.len() as f64;
                match params.placement {
                    RuleWeightPlacement::Aggregation => {
                        let w = weights.get(key);
                        let mean = inputs.iter().map(|&j| tape.values[j as usize]).sum::<f64>() / m;
                        grad[key.0] += adj * mean;
                        let d = adj * w / m;
                        for &j in inputs {
                            adjoint[j as usize] += d;
                        }
                    }
                    RuleWeightPlacement::Conjunction => {
                        let d = adj / m;
                        for &j in inputs {
                            adjoint[j as usize] += d;
                        }
                    }
                }
            }
        }
    }
}
