//! Forward pass, prediction readout, and training loss.
//!
//! Batches are disjoint unions of sample graphs: one block of literal rows
//! and one block of clause rows, with per-sample segment indices so heads
//! and losses stay per-sample. All message passing is simultaneous: every
//! iteration-t message is computed from iteration t-1 embeddings.

use ndarray::{Array2, NdFloat};

use super::graph::FormulaGraph;
use super::params::{Affine, Aggregation, Mlp, ModelParams};
use super::tape::{NodeId, Tape};
use crate::dataset::LabeledSample;

/// Disjoint union of formula graphs with flattened row indexing.
pub(crate) struct BlockGraph {
    pub num_samples: usize,
    pub num_lits: usize,
    pub num_clauses: usize,
    /// Per edge: the literal row and clause row it connects.
    pub edge_lit: Vec<usize>,
    pub edge_clause: Vec<usize>,
    /// Per literal row: owning sample.
    pub lit_sample: Vec<usize>,
    /// Per literal row: row of its negation (same sample).
    pub neg_perm: Vec<usize>,
    /// Clause-incidence counts, for mean aggregation.
    pub lit_deg: Vec<usize>,
    pub clause_deg: Vec<usize>,
    /// Per sample: half-open literal row range.
    pub lit_ranges: Vec<(usize, usize)>,
}

impl BlockGraph {
    pub fn from_graphs(graphs: &[&FormulaGraph]) -> BlockGraph {
        let mut block = BlockGraph {
            num_samples: graphs.len(),
            num_lits: 0,
            num_clauses: 0,
            edge_lit: Vec::new(),
            edge_clause: Vec::new(),
            lit_sample: Vec::new(),
            neg_perm: Vec::new(),
            lit_deg: Vec::new(),
            clause_deg: Vec::new(),
            lit_ranges: Vec::new(),
        };
        for (sample, graph) in graphs.iter().enumerate() {
            let lit_base = block.num_lits;
            let clause_base = block.num_clauses;
            let lits = graph.num_literal_nodes();
            block.lit_ranges.push((lit_base, lit_base + lits));
            for local in 0..lits {
                block.lit_sample.push(sample);
                block.neg_perm.push(lit_base + (local ^ 1));
                block.lit_deg.push(0);
            }
            block.clause_deg.extend(std::iter::repeat_n(0, graph.num_clauses));
            for &(clause, lit) in &graph.edges {
                block.edge_lit.push(lit_base + lit);
                block.edge_clause.push(clause_base + clause);
                block.lit_deg[lit_base + lit] += 1;
                block.clause_deg[clause_base + clause] += 1;
            }
            block.num_lits += lits;
            block.num_clauses += graph.num_clauses;
        }
        block
    }
}

/// Tape leaves for every parameter tensor, in registration order equal to
/// the canonical flat order.
pub(crate) struct ParamNodes {
    pub flat: Vec<NodeId>,
    init_literal: NodeId,
    init_clause: NodeId,
    l2c: MlpNodes,
    c2l: MlpNodes,
    l2l: MlpNodes,
    upd_l: MlpNodes,
    upd_c: MlpNodes,
    q_l: Option<AffineNodes>,
    q_c: Option<AffineNodes>,
    head_policy: AffineNodes,
    head_sat: AffineNodes,
}

struct MlpNodes {
    w1: NodeId,
    b1: NodeId,
    w2: NodeId,
    b2: NodeId,
    w3: NodeId,
    b3: NodeId,
}

struct AffineNodes {
    w: NodeId,
    b: NodeId,
}

fn register<F: NdFloat>(tape: &mut Tape<F>, flat: &mut Vec<NodeId>, t: &Array2<F>) -> NodeId {
    let id = tape.leaf(t.clone());
    flat.push(id);
    id
}

fn register_mlp<F: NdFloat>(tape: &mut Tape<F>, flat: &mut Vec<NodeId>, m: &Mlp<F>) -> MlpNodes {
    MlpNodes {
        w1: register(tape, flat, &m.w1),
        b1: register(tape, flat, &m.b1),
        w2: register(tape, flat, &m.w2),
        b2: register(tape, flat, &m.b2),
        w3: register(tape, flat, &m.w3),
        b3: register(tape, flat, &m.b3),
    }
}

fn register_affine<F: NdFloat>(tape: &mut Tape<F>, flat: &mut Vec<NodeId>, a: &Affine<F>) -> AffineNodes {
    AffineNodes {
        w: register(tape, flat, &a.w),
        b: register(tape, flat, &a.b),
    }
}

/// Registration order matches the canonical flat tensor order, so `flat`
/// zips directly against gradients for the optimizer.
fn register_params<F: NdFloat>(tape: &mut Tape<F>, params: &ModelParams<F>) -> ParamNodes {
    let mut flat = Vec::new();
    let init_literal = register(tape, &mut flat, &params.init_literal);
    let init_clause = register(tape, &mut flat, &params.init_clause);
    let l2c = register_mlp(tape, &mut flat, &params.mlp_l2c);
    let c2l = register_mlp(tape, &mut flat, &params.mlp_c2l);
    let l2l = register_mlp(tape, &mut flat, &params.mlp_l2l);
    let upd_l = register_mlp(tape, &mut flat, &params.mlp_upd_l);
    let upd_c = register_mlp(tape, &mut flat, &params.mlp_upd_c);
    let q_l = params
        .q_l
        .as_ref()
        .map(|q| register_affine(tape, &mut flat, q));
    let q_c = params
        .q_c
        .as_ref()
        .map(|q| register_affine(tape, &mut flat, q));
    let head_policy = register_affine(tape, &mut flat, &params.head_policy);
    let head_sat = register_affine(tape, &mut flat, &params.head_sat);
    ParamNodes {
        flat,
        init_literal,
        init_clause,
        l2c,
        c2l,
        l2l,
        upd_l,
        upd_c,
        q_l,
        q_c,
        head_policy,
        head_sat,
    }
}

enum OutputActivation {
    Linear,
    SigmoidOut,
}

fn mlp_forward<F: NdFloat>(
    tape: &mut Tape<F>,
    x: NodeId,
    mlp: &MlpNodes,
    out: OutputActivation,
) -> NodeId {
    let slope = F::from(0.1).unwrap();
    let z1 = tape.matmul(x, mlp.w1);
    let z1 = tape.add_row_broadcast(z1, mlp.b1);
    let h1 = tape.leaky_relu(z1, slope);
    let z2 = tape.matmul(h1, mlp.w2);
    let z2 = tape.add_row_broadcast(z2, mlp.b2);
    let h2 = tape.leaky_relu(z2, slope);
    let z3 = tape.matmul(h2, mlp.w3);
    let z3 = tape.add_row_broadcast(z3, mlp.b3);
    match out {
        OutputActivation::Linear => z3,
        OutputActivation::SigmoidOut => tape.sigmoid(z3),
    }
}

fn affine_forward<F: NdFloat>(tape: &mut Tape<F>, x: NodeId, map: &AffineNodes) -> NodeId {
    let z = tape.matmul(x, map.w);
    tape.add_row_broadcast(z, map.b)
}

/// One aggregation over the clause-literal edges, in either direction.
/// `messages` holds per-sender MLP outputs (value, or value and key halves
/// in attention mode); `receiver_prev` feeds the query map.
#[allow(clippy::too_many_arguments)]
fn aggregate<F: NdFloat>(
    tape: &mut Tape<F>,
    aggregation: Aggregation,
    dim: usize,
    messages: NodeId,
    senders: &[usize],
    receivers: &[usize],
    num_receivers: usize,
    receiver_deg: &[usize],
    receiver_prev: NodeId,
    query_map: Option<&AffineNodes>,
) -> NodeId {
    match aggregation {
        Aggregation::Mean => {
            let on_edges = tape.gather_rows(messages, senders.to_vec());
            let summed = tape.segment_sum(on_edges, receivers.to_vec(), num_receivers);
            let factors = receiver_deg
                .iter()
                .map(|&d| {
                    if d == 0 {
                        F::zero()
                    } else {
                        F::from(d).unwrap().recip()
                    }
                })
                .collect();
            tape.row_scale_const(summed, factors)
        }
        Aggregation::Attention => {
            let values = tape.slice_cols(messages, 0, dim);
            let keys = tape.slice_cols(messages, dim, 2 * dim);
            let v_edges = tape.gather_rows(values, senders.to_vec());
            let k_edges = tape.gather_rows(keys, senders.to_vec());
            let queries = affine_forward(
                tape,
                receiver_prev,
                query_map.expect("attention mode carries query maps"),
            );
            let q_edges = tape.gather_rows(queries, receivers.to_vec());
            let score = tape.row_dot(k_edges, q_edges);
            let gate = tape.sigmoid(score);
            let gated = tape.mul_col_broadcast(v_edges, gate);
            tape.segment_sum(gated, receivers.to_vec(), num_receivers)
        }
    }
}

/// A full forward pass over a block graph, with per-iteration clamped
/// probability nodes kept for readout and loss.
pub(crate) struct BatchForward<F> {
    pub tape: Tape<F>,
    pub params: ParamNodes,
    /// Per iteration: sat probability per sample (S x 1), clamped.
    pub sat_prob: Vec<NodeId>,
    /// Per iteration: policy probability per literal row (L x 1), clamped.
    pub policy_prob: Vec<NodeId>,
}

/// Probability clamp applied before prediction readout and logarithms.
pub(crate) const PROB_CLAMP: f64 = 1e-7;

pub(crate) fn batch_forward<F: NdFloat>(
    model: &ModelParams<F>,
    block: &BlockGraph,
) -> BatchForward<F> {
    assert!(block.num_clauses > 0, "graphs must carry at least one clause");
    let dim = model.dim;
    let mut tape = Tape::new();
    let params = register_params(&mut tape, model);

    let ones_l = tape.leaf(Array2::ones((block.num_lits, 1)));
    let ones_c = tape.leaf(Array2::ones((block.num_clauses, 1)));
    let mut lit_state = tape.matmul(ones_l, params.init_literal);
    let mut clause_state = tape.matmul(ones_c, params.init_clause);

    let lo = F::from(PROB_CLAMP).unwrap();
    let hi = F::one() - lo;
    let mut sat_prob = Vec::with_capacity(model.iterations);
    let mut policy_prob = Vec::with_capacity(model.iterations);

    for _ in 0..model.iterations {
        let lit_msg = mlp_forward(&mut tape, lit_state, &params.l2c, OutputActivation::Linear);
        let clause_msg = mlp_forward(&mut tape, clause_state, &params.c2l, OutputActivation::Linear);
        let neg_msg_all = mlp_forward(&mut tape, lit_state, &params.l2l, OutputActivation::Linear);
        let neg_msg = tape.gather_rows(neg_msg_all, block.neg_perm.clone());

        let clause_agg = aggregate(
            &mut tape,
            model.aggregation,
            dim,
            lit_msg,
            &block.edge_lit,
            &block.edge_clause,
            block.num_clauses,
            &block.clause_deg,
            clause_state,
            params.q_c.as_ref(),
        );
        let lit_agg = aggregate(
            &mut tape,
            model.aggregation,
            dim,
            clause_msg,
            &block.edge_clause,
            &block.edge_lit,
            block.num_lits,
            &block.lit_deg,
            lit_state,
            params.q_l.as_ref(),
        );

        let lit_input = tape.concat_cols(&[lit_state, lit_agg, neg_msg]);
        let clause_input = tape.concat_cols(&[clause_state, clause_agg]);
        lit_state = mlp_forward(&mut tape, lit_input, &params.upd_l, OutputActivation::SigmoidOut);
        clause_state = mlp_forward(
            &mut tape,
            clause_input,
            &params.upd_c,
            OutputActivation::SigmoidOut,
        );

        let policy_logit = affine_forward(&mut tape, lit_state, &params.head_policy);
        let policy_p = tape.sigmoid(policy_logit);
        policy_prob.push(tape.clamp(policy_p, lo, hi));

        let sat_per_lit = affine_forward(&mut tape, lit_state, &params.head_sat);
        let sat_sum = tape.segment_sum(sat_per_lit, block.lit_sample.clone(), block.num_samples);
        let sat_p = tape.sigmoid(sat_sum);
        sat_prob.push(tape.clamp(sat_p, lo, hi));
    }

    BatchForward {
        tape,
        params,
        sat_prob,
        policy_prob,
    }
}

/// Per-sample labels aligned with a block graph.
pub(crate) struct BatchLabels {
    /// Sat bit per sample.
    pub sat: Vec<bool>,
    /// Policy bit per literal row; zero-filled for unsat samples, whose
    /// policy loss is masked out.
    pub policy: Vec<u8>,
}

impl BatchLabels {
    pub fn from_samples(samples: &[&LabeledSample]) -> BatchLabels {
        let mut sat = Vec::with_capacity(samples.len());
        let mut policy = Vec::new();
        for s in samples {
            sat.push(s.sat);
            match &s.policy {
                Some(bits) => {
                    assert_eq!(bits.len(), 2 * s.formula.num_vars());
                    policy.extend_from_slice(bits);
                }
                None => {
                    assert!(!s.sat, "sat training samples need policy labels");
                    policy.extend(std::iter::repeat_n(0u8, 2 * s.formula.num_vars()));
                }
            }
        }
        BatchLabels { sat, policy }
    }
}

/// Cross-entropy of probability node `p` against the fixed target column
/// `y`: -y ln p - (1-y) ln(1-p), elementwise.
fn cross_entropy<F: NdFloat>(tape: &mut Tape<F>, p: NodeId, y: &Array2<F>) -> NodeId {
    let ln_p = tape.ln(p);
    let one_minus = tape.affine_const(p, -F::one(), F::one());
    let ln_q = tape.ln(one_minus);
    let weighted_p = tape.mul_const(ln_p, y.mapv(|v| -v));
    let weighted_q = tape.mul_const(ln_q, y.mapv(|v| v - F::one()));
    tape.add(weighted_p, weighted_q)
}

/// Mean-per-sample training loss over the whole pass: for each iteration,
/// sat cross-entropy plus (for sat samples) the mean-over-literal-nodes
/// policy cross-entropy, summed over iterations, averaged over samples.
pub(crate) fn build_loss<F: NdFloat>(
    fw: &mut BatchForward<F>,
    block: &BlockGraph,
    labels: &BatchLabels,
) -> NodeId {
    let tape = &mut fw.tape;
    let sat_targets = Array2::from_shape_fn((block.num_samples, 1), |(s, _)| {
        if labels.sat[s] { F::one() } else { F::zero() }
    });
    let policy_targets = Array2::from_shape_fn((block.num_lits, 1), |(l, _)| {
        F::from(labels.policy[l]).unwrap()
    });
    // Weight per literal row: 1 / (sample literal count) for sat samples,
    // zero for unsat ones. Summing weighted rows yields the per-sample mean
    // and the sat mask in one step.
    let policy_weights: Vec<F> = (0..block.num_lits)
        .map(|l| {
            let s = block.lit_sample[l];
            if labels.sat[s] {
                let (a, b) = block.lit_ranges[s];
                F::from(b - a).unwrap().recip()
            } else {
                F::zero()
            }
        })
        .collect();

    let mut total: Option<NodeId> = None;
    for t in 0..fw.sat_prob.len() {
        let sat_ce = cross_entropy(tape, fw.sat_prob[t], &sat_targets);
        let sat_sum = tape.sum_all(sat_ce);
        let policy_ce = cross_entropy(tape, fw.policy_prob[t], &policy_targets);
        let policy_weighted = tape.row_scale_const(policy_ce, policy_weights.clone());
        let policy_sum = tape.sum_all(policy_weighted);
        let iter_loss = tape.add(sat_sum, policy_sum);
        total = Some(match total {
            None => iter_loss,
            Some(acc) => tape.add(acc, iter_loss),
        });
    }
    let total = total.expect("at least one iteration");
    let inv_samples = F::from(block.num_samples).unwrap().recip();
    tape.affine_const(total, inv_samples, F::zero())
}

/// Network outputs for one formula graph: per-iteration sat probability and
/// per-iteration, per-literal-node policy probabilities (row t, column =
/// literal code). All values already clamped into (0, 1).
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub sat_prob: Vec<f64>,
    pub policy: Array2<f64>,
}

/// Run the network on a single graph.
pub fn predict<F: NdFloat>(model: &ModelParams<F>, graph: &FormulaGraph) -> Prediction {
    let block = BlockGraph::from_graphs(&[graph]);
    let fw = batch_forward(model, &block);
    let iterations = model.iterations;
    let num_lits = graph.num_literal_nodes();
    let mut sat_prob = Vec::with_capacity(iterations);
    let mut policy = Array2::zeros((iterations, num_lits));
    for t in 0..iterations {
        sat_prob.push(to_f64(fw.tape.value(fw.sat_prob[t])[(0, 0)]));
        let col = fw.tape.value(fw.policy_prob[t]);
        for l in 0..num_lits {
            policy[(t, l)] = to_f64(col[(l, 0)]);
        }
    }
    Prediction { sat_prob, policy }
}

fn to_f64<F: NdFloat>(x: F) -> f64 {
    F::to_f64(&x).expect("finite probability")
}

/// Training loss of one prediction against its labels: per iteration, sat
/// cross-entropy plus (for sat samples) the mean policy cross-entropy over
/// all literal nodes; summed over iterations. Probabilities are clamped to
/// [1e-7, 1 - 1e-7] before the logarithms.
pub fn loss(prediction: &Prediction, sat_label: bool, policy_labels: Option<&[u8]>) -> f64 {
    assert_eq!(
        sat_label,
        policy_labels.is_some(),
        "policy labels accompany exactly the sat samples"
    );
    let clamp = |p: f64| p.max(PROB_CLAMP).min(1.0 - PROB_CLAMP);
    let ce = |p: f64, y: f64| {
        let p = clamp(p);
        -y * p.ln() - (1.0 - y) * (1.0 - p).ln()
    };
    let sat_y = if sat_label { 1.0 } else { 0.0 };
    let mut total = 0.0;
    for (t, &sat_p) in prediction.sat_prob.iter().enumerate() {
        total += ce(sat_p, sat_y);
        if let Some(labels) = policy_labels {
            let row = prediction.policy.row(t);
            assert_eq!(labels.len(), row.len());
            let sum: f64 = row
                .iter()
                .zip(labels)
                .map(|(&p, &y)| ce(p, f64::from(y)))
                .sum();
            total += sum / labels.len() as f64;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{simplified_view, Assignment, Clause, CnfFormula, Literal};
    use crate::dataset::{gen_sr_pair, label_policy};
    use crate::graphnet::build_graph;
    use ndarray::NdFloat;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph_of(f: &CnfFormula) -> FormulaGraph {
        build_graph(&simplified_view(f, &Assignment::new(f.num_vars())))
    }

    fn two_clause_formula() -> CnfFormula {
        let (a, b, c) = (
            Literal::positive(0),
            Literal::positive(1),
            Literal::positive(2),
        );
        let clauses = vec![
            Clause::new([a, !c, b]).unwrap(),
            Clause::new([!b, c]).unwrap(),
        ];
        CnfFormula::new(3, clauses).unwrap()
    }

    fn zeroed(dim: usize, iterations: usize, aggregation: Aggregation) -> ModelParams {
        let mut params = ModelParams::init(dim, iterations, aggregation, 0);
        for tensor in params.flat_mut() {
            tensor.fill(0.0);
        }
        params
    }

    #[test]
    fn zero_parameters_collapse_to_one_half_everywhere() {
        for aggregation in [Aggregation::Mean, Aggregation::Attention] {
            let params = zeroed(4, 1, aggregation);
            let pred = predict(&params, &graph_of(&two_clause_formula()));
            assert_eq!(pred.sat_prob, vec![0.5]);
            assert_eq!(pred.policy.shape(), &[1, 6]);
            for &p in pred.policy.iter() {
                assert_eq!(p, 0.5);
            }
        }
    }

    #[test]
    fn probabilities_stay_strictly_inside_the_unit_interval() {
        let mut params = ModelParams::init(4, 2, Aggregation::Mean, 1);
        params.head_sat.b.fill(100.0);
        params.head_policy.b.fill(-100.0);
        let pred = predict(&params, &graph_of(&two_clause_formula()));
        for &p in pred.sat_prob.iter().chain(pred.policy.iter()) {
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn truncating_iterations_is_a_prefix_of_the_longer_run() {
        let graph = graph_of(&two_clause_formula());
        for aggregation in [Aggregation::Mean, Aggregation::Attention] {
            let long = ModelParams::init(6, 4, aggregation, 2).lift::<f64>();
            let mut short = long.clone();
            short.iterations = 2;
            let pred_long = predict(&long, &graph);
            let pred_short = predict(&short, &graph);
            assert_eq!(&pred_short.sat_prob[..], &pred_long.sat_prob[..2]);
            for t in 0..2 {
                for l in 0..graph.num_literal_nodes() {
                    assert_eq!(pred_short.policy[(t, l)], pred_long.policy[(t, l)]);
                }
            }
        }
    }

    #[test]
    fn unsat_chance_predictions_cost_ln2_per_iteration() {
        let t = 20;
        let pred = Prediction {
            sat_prob: vec![0.5; t],
            policy: Array2::from_elem((t, 6), 0.5),
        };
        let expected = t as f64 * std::f64::consts::LN_2;
        assert!((loss(&pred, false, None) - expected).abs() < 1e-12);
    }

    #[test]
    fn single_literal_chance_prediction_costs_two_ln2() {
        let pred = Prediction {
            sat_prob: vec![0.5],
            policy: Array2::from_elem((1, 1), 0.5),
        };
        let expected = 2.0 * std::f64::consts::LN_2;
        assert!((loss(&pred, true, Some(&[1])) - expected).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_cost_nearly_nothing() {
        let t = 20;
        let pred = Prediction {
            sat_prob: vec![1.0 - 1e-7; t],
            policy: Array2::from_elem((t, 4), 1.0 - 1e-7),
        };
        let bound = 2.0 * t as f64 * -(1.0f64 - 1e-7).ln();
        let value = loss(&pred, true, Some(&[1, 1, 1, 1]));
        assert!(value <= bound && value < 4.05e-6, "loss {value}");
    }

    #[test]
    fn batch_loss_of_a_single_sample_matches_the_standalone_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (_, sat_formula) = gen_sr_pair(5, &mut rng);
        let sample = label_policy(&sat_formula);
        for aggregation in [Aggregation::Mean, Aggregation::Attention] {
            let params = ModelParams::init(6, 3, aggregation, 4).lift::<f64>();
            let graph = graph_of(&sample.formula);
            let block = BlockGraph::from_graphs(&[&graph]);
            let labels = BatchLabels::from_samples(&[&sample]);
            let mut fw = batch_forward(&params, &block);
            let root = build_loss(&mut fw, &block, &labels);
            let batch_value = fw.tape.value(root)[(0, 0)];

            let standalone = loss(
                &predict(&params, &graph),
                sample.sat,
                sample.policy.as_deref(),
            );
            assert!(
                (batch_value - standalone).abs() < 1e-12,
                "batch {batch_value} vs standalone {standalone}"
            );
        }
    }

    #[test]
    fn duplicating_a_sample_preserves_mean_loss_and_gradients() {
        // Mean-per-sample normalization: a batch of two identical samples
        // has the same loss and the same parameter gradients as the single
        // sample, which is the linearity of the underlying sum.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let (unsat_formula, _) = gen_sr_pair(5, &mut rng);
        let sample = label_policy(&unsat_formula);
        let params = ModelParams::init(5, 2, Aggregation::Attention, 6).lift::<f64>();
        let graph = graph_of(&sample.formula);

        let run = |copies: usize| {
            let graphs: Vec<&FormulaGraph> = vec![&graph; copies];
            let samples: Vec<&LabeledSample> = vec![&sample; copies];
            let block = BlockGraph::from_graphs(&graphs);
            let labels = BatchLabels::from_samples(&samples);
            let mut fw = batch_forward(&params, &block);
            let root = build_loss(&mut fw, &block, &labels);
            let value = fw.tape.value(root)[(0, 0)];
            let grads = fw.tape.backward(root);
            let flats: Vec<Array2<f64>> = fw
                .params
                .flat
                .iter()
                .zip(params.flat())
                .map(|(&id, t)| grads.get(id, t))
                .collect();
            (value, flats)
        };
        let (single_loss, single_grads) = run(1);
        let (double_loss, double_grads) = run(2);
        assert!((single_loss - double_loss).abs() < 1e-12);
        for (a, b) in single_grads.iter().zip(&double_grads) {
            for (x, y) in a.iter().zip(b.iter()) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0), "{x} vs {y}");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences_in_both_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (unsat_formula, sat_formula) = gen_sr_pair(4, &mut rng);
        let samples = [label_policy(&unsat_formula), label_policy(&sat_formula)];
        let graphs = [graph_of(&samples[0].formula), graph_of(&samples[1].formula)];
        let block = BlockGraph::from_graphs(&[&graphs[0], &graphs[1]]);
        let labels = BatchLabels::from_samples(&[&samples[0], &samples[1]]);

        for aggregation in [Aggregation::Mean, Aggregation::Attention] {
            let params = ModelParams::init(6, 3, aggregation, 21).lift::<f64>();
            let eval = |p: &ModelParams<f64>| {
                let mut fw = batch_forward(p, &block);
                let root = build_loss(&mut fw, &block, &labels);
                fw.tape.value(root)[(0, 0)]
            };
            let mut fw = batch_forward(&params, &block);
            let root = build_loss(&mut fw, &block, &labels);
            let grads = fw.tape.backward(root);
            let analytic: Vec<Array2<f64>> = fw
                .params
                .flat
                .iter()
                .zip(params.flat())
                .map(|(&id, t)| grads.get(id, t))
                .collect();

            let h = 1e-4;
            for ti in 0..analytic.len() {
                let len = params.flat()[ti].len();
                for idx in 0..len {
                    let cols = params.flat()[ti].ncols();
                    let pos = (idx / cols, idx % cols);
                    let mut plus = params.clone();
                    plus.flat_mut()[ti][pos] += h;
                    let mut minus = params.clone();
                    minus.flat_mut()[ti][pos] -= h;
                    let fd = (eval(&plus) - eval(&minus)) / (2.0 * h);
                    let an = analytic[ti][pos];
                    // Relative 1e-3 with an absolute floor: elements below
                    // 1e-8 sit under central-difference resolution.
                    assert!(
                        (fd - an).abs() < 1e-8 + 1e-3 * fd.abs().max(an.abs()),
                        "mode {aggregation:?} tensor {ti} element {pos:?}: fd {fd} vs analytic {an}"
                    );
                }
            }
        }
    }

    #[test]
    fn saturated_correct_predictions_have_vanishing_gradients() {
        // Push every readout deep into the clamp and label it correct: the
        // clamp blocks all gradient flow.
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let (_, sat_formula) = gen_sr_pair(4, &mut rng);
        let mut sample = label_policy(&sat_formula);
        sample.policy = Some(vec![1; 2 * sat_formula.num_vars()]);
        let mut params = ModelParams::init(5, 2, Aggregation::Mean, 23).lift::<f64>();
        params.head_policy.w.fill(0.0);
        params.head_policy.b.fill(50.0);
        params.head_sat.w.fill(0.0);
        params.head_sat.b.fill(50.0);

        let graph = graph_of(&sample.formula);
        let block = BlockGraph::from_graphs(&[&graph]);
        let labels = BatchLabels::from_samples(&[&sample]);
        let mut fw = batch_forward(&params, &block);
        let root = build_loss(&mut fw, &block, &labels);
        let grads = fw.tape.backward(root);
        let mut norm = 0.0f64;
        for (&id, t) in fw.params.flat.iter().zip(params.flat()) {
            norm += grads.get(id, t).iter().map(|g| g * g).sum::<f64>();
        }
        assert!(norm.sqrt() < 1e-5, "gradient norm {}", norm.sqrt());
    }

    #[test]
    fn mean_aggregation_cannot_distinguish_same_size_formulas() {
        // All rows start from one broadcast vector, and a mean of identical
        // messages is independent of how many arrived, so with every
        // literal code present the forward pass depends only on the
        // variable count. Attention's gated sums are degree-sensitive and
        // must tell the same two formulas apart.
        let lit = |code: u32| Literal::from_code(code);
        let triangle = CnfFormula::new(
            3,
            vec![
                Clause::new([lit(0), lit(2)]).unwrap(),
                Clause::new([lit(1), lit(4)]).unwrap(),
                Clause::new([lit(3), lit(5)]).unwrap(),
            ],
        )
        .unwrap();
        let pair = CnfFormula::new(
            3,
            vec![
                Clause::new([lit(0), lit(2), lit(4)]).unwrap(),
                Clause::new([lit(1), lit(3), lit(5)]).unwrap(),
            ],
        )
        .unwrap();

        let mean_params = ModelParams::init(6, 3, Aggregation::Mean, 41).lift::<f64>();
        let a = predict(&mean_params, &graph_of(&triangle));
        let b = predict(&mean_params, &graph_of(&pair));
        for t in 0..3 {
            assert!((a.sat_prob[t] - b.sat_prob[t]).abs() < 1e-12);
            for l in 0..6 {
                assert!((a.policy[(t, l)] - b.policy[(t, l)]).abs() < 1e-12);
            }
        }

        let attn_params = ModelParams::init(6, 3, Aggregation::Attention, 41).lift::<f64>();
        let a = predict(&attn_params, &graph_of(&triangle));
        let b = predict(&attn_params, &graph_of(&pair));
        let gap: f64 = (0..3)
            .map(|t| (a.sat_prob[t] - b.sat_prob[t]).abs())
            .sum();
        assert!(gap > 1e-9, "attention saw no difference");
    }

    /// Rename variables by `perm` (variable v becomes perm[v]).
    fn rename_vars(f: &CnfFormula, perm: &[usize]) -> CnfFormula {
        let clauses = f
            .clauses()
            .iter()
            .map(|c| {
                Clause::new(c.iter().map(|l| {
                    if l.is_positive() {
                        Literal::positive(perm[l.variable()])
                    } else {
                        Literal::negative(perm[l.variable()])
                    }
                }))
                .unwrap()
            })
            .collect();
        CnfFormula::new(f.num_vars(), clauses).unwrap()
    }

    /// Flip the polarity of every occurrence of variable `v`.
    fn negate_var(f: &CnfFormula, v: usize) -> CnfFormula {
        let clauses = f
            .clauses()
            .iter()
            .map(|c| {
                Clause::new(c.iter().map(|l| {
                    if l.variable() == v {
                        l.negated()
                    } else {
                        *l
                    }
                }))
                .unwrap()
            })
            .collect();
        CnfFormula::new(f.num_vars(), clauses).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
        assert!((a - b).abs() < tol, "{what}: {a} vs {b}");
    }

    #[test]
    fn predictions_are_invariant_to_renaming_negation_and_reordering() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for aggregation in [Aggregation::Mean, Aggregation::Attention] {
            let params = ModelParams::init(6, 3, aggregation, 31).lift::<f64>();
            for round in 0..3 {
                let (f, _) = gen_sr_pair(5, &mut rng);
                let base = predict(&params, &graph_of(&f));
                let t_last = base.sat_prob.len() - 1;

                // Variable renaming permutes policy columns, sat unchanged.
                let perm: Vec<usize> = {
                    let mut p: Vec<usize> = (0..f.num_vars()).collect();
                    for i in (1..p.len()).rev() {
                        let j = rand::Rng::random_range(&mut rng, 0..=i);
                        p.swap(i, j);
                    }
                    p
                };
                let renamed = predict(&params, &graph_of(&rename_vars(&f, &perm)));
                assert_close(
                    renamed.sat_prob[t_last],
                    base.sat_prob[t_last],
                    1e-6,
                    "sat after renaming",
                );
                for v in 0..f.num_vars() {
                    for s in 0..2 {
                        assert_close(
                            renamed.policy[(t_last, 2 * perm[v] + s)],
                            base.policy[(t_last, 2 * v + s)],
                            1e-6,
                            "policy after renaming",
                        );
                    }
                }

                // Negating one variable swaps its two policy columns.
                let v = rand::Rng::random_range(&mut rng, 0..f.num_vars());
                let negated = predict(&params, &graph_of(&negate_var(&f, v)));
                assert_close(
                    negated.sat_prob[t_last],
                    base.sat_prob[t_last],
                    1e-6,
                    "sat after negation",
                );
                for l in 0..2 * f.num_vars() {
                    let source = if l / 2 == v { l ^ 1 } else { l };
                    assert_close(
                        negated.policy[(t_last, l)],
                        base.policy[(t_last, source)],
                        1e-6,
                        "policy after negation",
                    );
                }

                // Clause and in-clause literal reordering change nothing.
                let mut clauses = f.clauses().to_vec();
                clauses.reverse();
                let mut shuffled = Vec::new();
                for c in clauses {
                    let mut lits = c.literals().to_vec();
                    lits.reverse();
                    shuffled.push(Clause::new(lits).unwrap());
                }
                let reordered =
                    CnfFormula::new(f.num_vars(), shuffled).unwrap();
                let re = predict(&params, &graph_of(&reordered));
                assert_close(
                    re.sat_prob[t_last],
                    base.sat_prob[t_last],
                    1e-6,
                    "sat after reordering",
                );
                for l in 0..2 * f.num_vars() {
                    assert_close(
                        re.policy[(t_last, l)],
                        base.policy[(t_last, l)],
                        1e-6,
                        "policy after reordering",
                    );
                }
                let _ = round;
            }
        }
    }
}
