//! Branching heuristics over residual views: Jeroslow-Wang one-sided,
//! DLIS, a uniform-random baseline, a learned policy, and a hybrid that
//! falls back to JW-OS when the network doubts satisfiability.
//!
//! Every heuristic returns a literal that occurs in the view, breaking ties
//! by smallest literal code.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cnf::{Literal, ResidualView};
use crate::graphnet::{build_graph, predict, ModelParams, Prediction};
use crate::solvers::BranchingHeuristic;

/// Per-literal Jeroslow-Wang scores: J(l) = sum of 2^(-|c|) over unresolved
/// clauses c containing l, with |c| the residual clause length. Indexed by
/// literal code.
fn jw_scores(view: &ResidualView) -> Vec<f64> {
    let mut scores = vec![0.0; 2 * view.num_vars()];
    for clause in view.clauses() {
        let weight = (clause.literals.len() as f64).exp2().recip();
        for lit in &clause.literals {
            scores[lit.index()] += weight;
        }
    }
    scores
}

/// Argmax over the view's literals of a per-code score table. Iterating
/// codes in ascending order with a strict comparison implements the
/// smallest-code tie-break.
fn argmax_present<S: PartialOrd + Copy>(view: &ResidualView, scores: &[S]) -> Literal {
    let present = view.present_literals();
    let mut best = present[0];
    for &lit in &present[1..] {
        if scores[lit.index()] > scores[best.index()] {
            best = lit;
        }
    }
    best
}

/// Jeroslow-Wang one-sided: the literal maximizing J(l) = Σ 2^(-|c|) over
/// unresolved clauses containing it.
pub fn jw_os(view: &ResidualView) -> Literal {
    argmax_present(view, &jw_scores(view))
}

/// DLIS: the literal occurring in the most unresolved clauses.
pub fn dlis(view: &ResidualView) -> Literal {
    let mut counts = vec![0u64; 2 * view.num_vars()];
    for clause in view.clauses() {
        for lit in &clause.literals {
            counts[lit.index()] += 1;
        }
    }
    argmax_present(view, &counts)
}

/// Uniform choice among the literals occurring in the view.
pub fn random_choice<R: Rng + ?Sized>(view: &ResidualView, rng: &mut R) -> Literal {
    let present = view.present_literals();
    present[rng.random_range(0..present.len())]
}

/// [`random_choice`] carrying its own seeded generator, for use as a
/// [`BranchingHeuristic`].
pub struct RandomBranching {
    rng: ChaCha8Rng,
}

impl RandomBranching {
    /// Heuristic with a fixed seed; identical seeds give identical runs.
    pub fn from_seed(seed: u64) -> Self {
        RandomBranching {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl BranchingHeuristic for RandomBranching {
    fn choose(&mut self, view: &ResidualView) -> Literal {
        random_choice(view, &mut self.rng)
    }
}

/// Fallback threshold of [`hybrid_choice`]: below this predicted sat
/// probability the hybrid distrusts the policy and plays JW-OS.
pub const DEFAULT_SAT_THRESHOLD: f64 = 0.3;

/// The literal among the view's present literals with the highest
/// final-iteration policy probability.
fn policy_argmax(view: &ResidualView, prediction: &Prediction) -> Literal {
    let last = prediction.policy.nrows() - 1;
    let row = prediction.policy.row(last);
    let scores: Vec<f64> = row.iter().copied().collect();
    argmax_present(view, &scores)
}

/// Learned policy: run the network on the view's graph and take the policy
/// argmax over present literals.
pub fn neural_choice(view: &ResidualView, params: &ModelParams<f64>) -> Literal {
    let prediction = predict(params, &build_graph(view));
    policy_argmax(view, &prediction)
}

/// Hybrid guidance: one network call per decision; when the predicted sat
/// probability at the final iteration drops strictly below `threshold`,
/// defer to JW-OS, otherwise follow the policy argmax.
pub fn hybrid_choice(view: &ResidualView, params: &ModelParams<f64>, threshold: f64) -> Literal {
    let prediction = predict(params, &build_graph(view));
    let sat_prob = *prediction.sat_prob.last().expect("at least one iteration");
    if sat_prob < threshold {
        jw_os(view)
    } else {
        policy_argmax(view, &prediction)
    }
}

/// [`neural_choice`] with parameters lifted once to f64.
pub struct NeuralBranching {
    params: ModelParams<f64>,
}

impl NeuralBranching {
    pub fn new(params: &ModelParams) -> Self {
        NeuralBranching {
            params: params.lift(),
        }
    }
}

impl BranchingHeuristic for NeuralBranching {
    fn choose(&mut self, view: &ResidualView) -> Literal {
        neural_choice(view, &self.params)
    }
}

/// [`hybrid_choice`] with parameters lifted once to f64.
pub struct HybridBranching {
    params: ModelParams<f64>,
    threshold: f64,
}

impl HybridBranching {
    pub fn new(params: &ModelParams, threshold: f64) -> Self {
        HybridBranching {
            params: params.lift(),
            threshold,
        }
    }
}

impl BranchingHeuristic for HybridBranching {
    fn choose(&mut self, view: &ResidualView) -> Literal {
        hybrid_choice(view, &self.params, self.threshold)
    }
}
