//! Adam training over balanced batches of labeled formulas.

use ndarray::{Array2, NdFloat};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::FormulaGraph;
use super::model::{batch_forward, build_loss, BatchLabels, BlockGraph, Prediction};
use super::params::{Aggregation, ModelParams};
use crate::cnf::{simplified_view, Assignment};
use crate::dataset::{balanced_batches, LabeledSample};

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub dim: usize,
    /// Message passing rounds per forward pass.
    pub iterations: usize,
    pub aggregation: Aggregation,
    /// Samples per step; must be even for balanced batches.
    pub batch_size: usize,
    pub learning_rate: f32,
    pub train_steps: usize,
    pub seed: u64,
    /// Metric cadence; step 1 and the final step are always recorded.
    pub eval_every: usize,
}

impl TrainConfig {
    pub fn new(dim: usize, iterations: usize, aggregation: Aggregation) -> TrainConfig {
        TrainConfig {
            dim,
            iterations,
            aggregation,
            batch_size: 32,
            learning_rate: 1e-4,
            train_steps: 1000,
            seed: 0,
            eval_every: 50,
        }
    }
}

/// Batch metrics recorded while training.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricPoint {
    pub step: usize,
    /// Mean-per-sample loss of the training batch.
    pub loss: f64,
    /// Mean |sat probability - label| at the final iteration.
    pub sat_error: f64,
    /// Mean |policy probability - label| at the final iteration, over the
    /// literal nodes of the batch's sat samples.
    pub policy_error: f64,
}

/// Adam with bias correction; moments are kept at parameter precision.
struct Adam {
    learning_rate: f32,
    beta1: f32,
    beta2: f32,
    epsilon: f32,
    step: i32,
    m: Vec<Array2<f32>>,
    v: Vec<Array2<f32>>,
}

impl Adam {
    fn new(learning_rate: f32, shapes: &[(usize, usize)]) -> Adam {
        Adam {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            m: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
            v: shapes.iter().map(|&s| Array2::zeros(s)).collect(),
        }
    }

    fn step(&mut self, params: &mut [&mut Array2<f32>], grads: &[Array2<f32>]) {
        self.step += 1;
        let correction1 = 1.0 - self.beta1.powi(self.step);
        let correction2 = 1.0 - self.beta2.powi(self.step);
        for (i, grad) in grads.iter().enumerate() {
            self.m[i] = &self.m[i] * self.beta1 + grad * (1.0 - self.beta1);
            self.v[i] = &self.v[i] * self.beta2 + &(grad * grad) * (1.0 - self.beta2);
            let m_hat = &self.m[i] / correction1;
            let v_hat = &self.v[i] / correction2;
            let update = m_hat / (v_hat.mapv(f32::sqrt) + self.epsilon) * self.learning_rate;
            *params[i] -= &update;
        }
    }
}

fn graph_of(sample: &LabeledSample) -> FormulaGraph {
    let empty = Assignment::new(sample.formula.num_vars());
    super::graph::build_graph(&simplified_view(&sample.formula, &empty))
}

/// Train a fresh model on `samples`, returning the final parameters and
/// the metric log. Each step draws one balanced batch; epochs reshuffle.
pub fn train(samples: &[LabeledSample], config: &TrainConfig) -> (ModelParams, Vec<MetricPoint>) {
    assert!(config.train_steps >= 1 && config.eval_every >= 1);
    let mut params = ModelParams::init(
        config.dim,
        config.iterations,
        config.aggregation,
        config.seed,
    );
    let shapes: Vec<(usize, usize)> = params.flat().iter().map(|t| t.dim()).collect();
    let mut adam = Adam::new(config.learning_rate, &shapes);
    let mut batch_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));

    let graphs: Vec<FormulaGraph> = samples.iter().map(graph_of).collect();
    let mut queue: Vec<Vec<usize>> = Vec::new();
    let mut cursor = 0;
    let mut log = Vec::new();

    for step in 1..=config.train_steps {
        if cursor == queue.len() {
            queue = balanced_batches(samples, config.batch_size, &mut batch_rng);
            assert!(
                !queue.is_empty(),
                "training needs at least batch_size/2 sat and unsat samples each"
            );
            cursor = 0;
        }
        let batch = &queue[cursor];
        cursor += 1;

        let batch_graphs: Vec<&FormulaGraph> = batch.iter().map(|&i| &graphs[i]).collect();
        let batch_samples: Vec<&LabeledSample> = batch.iter().map(|&i| &samples[i]).collect();
        let block = BlockGraph::from_graphs(&batch_graphs);
        let labels = BatchLabels::from_samples(&batch_samples);
        let mut forward = batch_forward(&params, &block);
        let root = build_loss(&mut forward, &block, &labels);

        if step == 1 || step % config.eval_every == 0 || step == config.train_steps {
            log.push(batch_metrics(step, &forward, &block, &labels, root));
        }

        let grads = forward.tape.backward(root);
        let grad_arrays: Vec<Array2<f32>> = forward
            .params
            .flat
            .iter()
            .zip(params.flat())
            .map(|(&id, tensor)| grads.get(id, tensor))
            .collect();
        let mut flats = params.flat_mut();
        adam.step(&mut flats, &grad_arrays);
    }
    (params, log)
}

/// Mean-per-sample loss of `samples` under `params`, plus its gradient for
/// every tensor in canonical `ModelParams::flat` order. Useful for
/// optimizer experiments and finite-difference validation.
pub fn batch_gradients<F: NdFloat>(
    params: &ModelParams<F>,
    samples: &[&LabeledSample],
) -> (f64, Vec<Array2<F>>) {
    let graphs: Vec<FormulaGraph> = samples.iter().map(|s| graph_of(s)).collect();
    let refs: Vec<&FormulaGraph> = graphs.iter().collect();
    let block = BlockGraph::from_graphs(&refs);
    let labels = BatchLabels::from_samples(samples);
    let mut forward = batch_forward(params, &block);
    let root = build_loss(&mut forward, &block, &labels);
    let loss = F::to_f64(&forward.tape.value(root)[(0, 0)]).expect("finite loss");
    let grads = forward.tape.backward(root);
    let arrays = forward
        .params
        .flat
        .iter()
        .zip(params.flat())
        .map(|(&id, tensor)| grads.get(id, tensor))
        .collect();
    (loss, arrays)
}

fn batch_metrics(
    step: usize,
    forward: &super::model::BatchForward<f32>,
    block: &BlockGraph,
    labels: &BatchLabels,
    root: super::tape::NodeId,
) -> MetricPoint {
    let loss = f64::from(forward.tape.value(root)[(0, 0)]);
    let last = forward.sat_prob.len() - 1;

    let sat_probs = forward.tape.value(forward.sat_prob[last]);
    let sat_error = labels
        .sat
        .iter()
        .enumerate()
        .map(|(s, &y)| (f64::from(sat_probs[(s, 0)]) - f64::from(u8::from(y))).abs())
        .sum::<f64>()
        / labels.sat.len() as f64;

    let policy_probs = forward.tape.value(forward.policy_prob[last]);
    let mut total = 0.0;
    let mut rows = 0usize;
    for l in 0..block.num_lits {
        if labels.sat[block.lit_sample[l]] {
            total += (f64::from(policy_probs[(l, 0)]) - f64::from(labels.policy[l])).abs();
            rows += 1;
        }
    }
    let policy_error = if rows == 0 { 0.0 } else { total / rows as f64 };
    MetricPoint {
        step,
        loss,
        sat_error,
        policy_error,
    }
}

/// Mean |probability - label| over literal nodes at the final iteration.
pub fn final_policy_error(prediction: &Prediction, policy_labels: &[u8]) -> f64 {
    let last = prediction.policy.nrows() - 1;
    let row = prediction.policy.row(last);
    assert_eq!(row.len(), policy_labels.len());
    row.iter()
        .zip(policy_labels)
        .map(|(&p, &y)| (p - f64::from(y)).abs())
        .sum::<f64>()
        / policy_labels.len() as f64
}

/// Whether the final-iteration sat probability lands on the right side of
/// one half.
pub fn final_sat_correct(prediction: &Prediction, sat: bool) -> bool {
    let p = *prediction.sat_prob.last().expect("at least one iteration");
    (p > 0.5) == sat
}
