//! Desk-scale benchmark harnesses: a capped solve-rate sweep across
//! branching heuristics, an uncapped decision-count duel against JW-OS, and
//! a mean-versus-attention aggregation sweep over trained replicas with the
//! replica filter used when aggregating runs.
//!
//! Every harness derives all randomness from one recorded run seed, so
//! rerunning with the same arguments reproduces each table cell exactly.
//! Instances are processed sequentially in index order and aggregated in
//! that order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use satkit_core::cnf::simplified_view;
use satkit_core::dataset::{gen_sr_pair, label_policy, write_dataset, LabeledSample};
use satkit_core::graphnet::{
    build_graph, final_policy_error, final_sat_correct, loss, predict, train, Aggregation,
    ModelParams, TrainConfig,
};
use satkit_core::heuristics::{dlis, jw_os, HybridBranching, NeuralBranching, RandomBranching};
use satkit_core::solvers::{cdcl, dpll};
use satkit_core::{Assignment, BranchingHeuristic, CnfFormula, Verdict};

/// SplitMix64 finalizer; decorrelates structured seed material.
fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed streams drawn from one run seed. Distinct salts keep the streams
/// for instances, heuristic randomness, dataset draws, and replica training
/// independent of one another.
fn derive_seed(run_seed: u64, salt: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(run_seed ^ salt) ^ a) ^ b)
}

const INSTANCE_SALT: u64 = 0x01;
const HEURISTIC_SALT: u64 = 0x02;
const TRAIN_SET_SALT: u64 = 0x03;
const EVAL_SET_SALT: u64 = 0x04;
const REPLICA_SALT: u64 = 0x05;

/// Generator seed of evaluation instance `index` in size class `n`.
pub fn instance_seed(run_seed: u64, n: usize, index: usize) -> u64 {
    derive_seed(run_seed, INSTANCE_SALT, n as u64, index as u64)
}

/// The satisfiable member of a fresh SR(n) pair drawn from `seed`.
pub fn sat_instance(n: usize, seed: u64) -> CnfFormula {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gen_sr_pair(n, &mut rng).1
}

/// Branching heuristics selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeuristicKind {
    Jw,
    Dlis,
    Random,
    Neural,
    Hybrid,
}

impl HeuristicKind {
    /// Heuristics that need no trained model.
    pub const CLASSICAL: [HeuristicKind; 3] =
        [HeuristicKind::Jw, HeuristicKind::Dlis, HeuristicKind::Random];
    /// Heuristics driven by a trained model.
    pub const LEARNED: [HeuristicKind; 2] = [HeuristicKind::Neural, HeuristicKind::Hybrid];

    pub fn name(self) -> &'static str {
        match self {
            HeuristicKind::Jw => "jw",
            HeuristicKind::Dlis => "dlis",
            HeuristicKind::Random => "random",
            HeuristicKind::Neural => "neural",
            HeuristicKind::Hybrid => "hybrid",
        }
    }
}

/// Fresh heuristic instance. `seed` feeds only the random baseline; the
/// learned kinds require `model`.
pub fn make_heuristic(
    kind: HeuristicKind,
    model: Option<&ModelParams>,
    threshold: f64,
    seed: u64,
) -> Box<dyn BranchingHeuristic> {
    match kind {
        HeuristicKind::Jw => Box::new(jw_os),
        HeuristicKind::Dlis => Box::new(dlis),
        HeuristicKind::Random => Box::new(RandomBranching::from_seed(seed)),
        HeuristicKind::Neural => {
            Box::new(NeuralBranching::new(model.expect("neural branching needs a model")))
        }
        HeuristicKind::Hybrid => Box::new(HybridBranching::new(
            model.expect("hybrid branching needs a model"),
            threshold,
        )),
    }
}

/// Backtracking solvers selectable by name.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverKind {
    Dpll,
    Cdcl,
}

impl SolverKind {
    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Dpll => "dpll",
            SolverKind::Cdcl => "cdcl",
        }
    }
}

/// Number of `instances` solved by DPLL within `cap` decisions, building a
/// fresh heuristic per instance via `make(index)`.
pub fn solved_within_cap<F>(instances: &[CnfFormula], cap: u64, mut make: F) -> usize
where
    F: FnMut(usize) -> Box<dyn BranchingHeuristic>,
{
    instances
        .iter()
        .enumerate()
        .filter(|(i, f)| {
            let mut heuristic = make(*i);
            dpll(f, &mut *heuristic, Some(cap)).verdict == Verdict::Sat
        })
        .count()
}

/// Uncapped decision counts over `instances`, one fresh heuristic per
/// instance via `make(index)`; the result is indexed like `instances`.
pub fn decision_counts<F>(instances: &[CnfFormula], solver: SolverKind, mut make: F) -> Vec<u64>
where
    F: FnMut(usize) -> Box<dyn BranchingHeuristic>,
{
    instances
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut heuristic = make(i);
            match solver {
                SolverKind::Dpll => dpll(f, &mut *heuristic, None),
                SolverKind::Cdcl => cdcl(f, &mut *heuristic, None),
            }
            .decisions
        })
        .collect()
}

/// One (heuristic, size-class) cell of the capped solve-rate table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveRateRow {
    pub heuristic: &'static str,
    pub n: usize,
    pub count: usize,
    pub cap: u64,
    pub solved: usize,
    pub seed: u64,
}

impl SolveRateRow {
    pub fn solve_rate(&self) -> f64 {
        self.solved as f64 / self.count as f64
    }
}

/// Capped DPLL solve rates over fresh satisfiable SR(n) instances, one row
/// per (heuristic, n). Classical heuristics always run; the learned kinds
/// join when a model is given. Every heuristic sees the identical instance
/// list for its size class.
pub fn solve_rate_experiment(
    sizes: &[usize],
    count: usize,
    cap: u64,
    seed: u64,
    model: Option<&ModelParams>,
    threshold: f64,
) -> Vec<SolveRateRow> {
    let mut kinds: Vec<HeuristicKind> = HeuristicKind::CLASSICAL.to_vec();
    if model.is_some() {
        kinds.extend(HeuristicKind::LEARNED);
    }
    let mut rows = Vec::new();
    for &n in sizes {
        let instances: Vec<CnfFormula> = (0..count)
            .map(|i| sat_instance(n, instance_seed(seed, n, i)))
            .collect();
        for &kind in &kinds {
            let solved = solved_within_cap(&instances, cap, |i| {
                make_heuristic(kind, model, threshold, derive_seed(seed, HEURISTIC_SALT, n as u64, i as u64))
            });
            rows.push(SolveRateRow {
                heuristic: kind.name(),
                n,
                count,
                cap,
                solved,
                seed,
            });
        }
    }
    rows
}

/// One size class of the uncapped decision duel against the JW-OS baseline.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DuelRow {
    pub solver: &'static str,
    pub n: usize,
    pub count: usize,
    /// Instances the challenger solved in strictly fewer decisions.
    pub wins: usize,
    pub draws: usize,
    pub losses: usize,
    pub seed: u64,
}

impl DuelRow {
    pub fn win_pct(&self) -> f64 {
        100.0 * self.wins as f64 / self.count as f64
    }
    pub fn draw_pct(&self) -> f64 {
        100.0 * self.draws as f64 / self.count as f64
    }
    pub fn loss_pct(&self) -> f64 {
        100.0 * self.losses as f64 / self.count as f64
    }
}

/// Win/draw/loss partition of `challenger` versus `baseline` from decision
/// counts on the same instances: a win is strictly fewer decisions.
pub fn duel_partition(challenger: &[u64], baseline: &[u64]) -> (usize, usize, usize) {
    assert_eq!(challenger.len(), baseline.len());
    let mut wins = 0;
    let mut draws = 0;
    let mut losses = 0;
    for (&c, &b) in challenger.iter().zip(baseline) {
        match c.cmp(&b) {
            std::cmp::Ordering::Less => wins += 1,
            std::cmp::Ordering::Equal => draws += 1,
            std::cmp::Ordering::Greater => losses += 1,
        }
    }
    (wins, draws, losses)
}

/// Uncapped decision duel on fresh satisfiable SR(n) instances: the
/// challenger and the JW-OS baseline each solve the identical instance
/// list; wins, draws and losses partition it.
pub fn duel_experiment(
    sizes: &[usize],
    count: usize,
    seed: u64,
    challenger: HeuristicKind,
    model: Option<&ModelParams>,
    threshold: f64,
    solver: SolverKind,
) -> Vec<DuelRow> {
    let mut rows = Vec::new();
    for &n in sizes {
        let instances: Vec<CnfFormula> = (0..count)
            .map(|i| sat_instance(n, instance_seed(seed, n, i)))
            .collect();
        let challenger_counts = decision_counts(&instances, solver, |i| {
            make_heuristic(challenger, model, threshold, derive_seed(seed, HEURISTIC_SALT, n as u64, i as u64))
        });
        let baseline_counts = decision_counts(&instances, solver, |_| Box::new(jw_os));
        let (wins, draws, losses) = duel_partition(&challenger_counts, &baseline_counts);
        rows.push(DuelRow {
            solver: solver.name(),
            n,
            count,
            wins,
            draws,
            losses,
            seed,
        });
    }
    rows
}

/// Labeled SR(n) pairs, in (unsat, sat) order per pair; pair `i` draws
/// from `instance_seed(seed, n, i)`.
pub fn labeled_pairs(n: usize, pairs: usize, seed: u64) -> Vec<LabeledSample> {
    let mut out = Vec::with_capacity(2 * pairs);
    for i in 0..pairs {
        let mut rng = ChaCha8Rng::seed_from_u64(instance_seed(seed, n, i));
        let (unsat, sat) = gen_sr_pair(n, &mut rng);
        out.push(label_policy(&unsat));
        out.push(label_policy(&sat));
    }
    out
}

/// Held-out evaluation summary of one trained model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalStats {
    /// Mean per-sample loss.
    pub loss: f64,
    /// Mean final-iteration policy error over the satisfiable samples.
    pub policy_error: f64,
    /// Fraction of samples whose final sat probability lands on the
    /// correct side of one half.
    pub sat_accuracy: f64,
}

/// Evaluate `params` over `eval` at the final iteration.
pub fn evaluate_model(params: &ModelParams, eval: &[LabeledSample]) -> EvalStats {
    assert!(!eval.is_empty());
    let lifted: ModelParams<f64> = params.lift();
    let mut total_loss = 0.0;
    let mut total_error = 0.0;
    let mut sat_count = 0usize;
    let mut correct = 0usize;
    for sample in eval {
        let empty = Assignment::new(sample.formula.num_vars());
        let graph = build_graph(&simplified_view(&sample.formula, &empty));
        let prediction = predict(&lifted, &graph);
        total_loss += loss(&prediction, sample.sat, sample.policy.as_deref());
        correct += usize::from(final_sat_correct(&prediction, sample.sat));
        if let Some(policy) = &sample.policy {
            total_error += final_policy_error(&prediction, policy);
            sat_count += 1;
        }
    }
    EvalStats {
        loss: total_loss / eval.len() as f64,
        policy_error: total_error / sat_count.max(1) as f64,
        sat_accuracy: correct as f64 / eval.len() as f64,
    }
}

/// Replicas dropped at most per run, following the practice of discarding
/// up to two of five.
pub const MAX_DROPPED: usize = 2;

/// Sample spread above which a replica set counts as unstable.
pub const SPREAD_LIMIT: f64 = 1.0;

/// Unbiased (n-1) sample standard deviation; zero below two values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sum_sq: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (sum_sq / (values.len() - 1) as f64).sqrt()
}

/// Outcome of replica filtering: retained indices in ascending order, and
/// whether the spread still exceeded [`SPREAD_LIMIT`] after the allowed
/// drops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FilterOutcome {
    pub kept: Vec<usize>,
    pub flagged: bool,
}

/// Greedy replica filter over per-replica eval losses: while the sample
/// std exceeds [`SPREAD_LIMIT`], drop the replica whose removal reduces
/// the std most (first index wins ties), at most [`MAX_DROPPED`] times and
/// never below one replica.
pub fn filter_replicas(losses: &[f64]) -> FilterOutcome {
    assert!(!losses.is_empty());
    let std_of = |kept: &[usize]| {
        let values: Vec<f64> = kept.iter().map(|&i| losses[i]).collect();
        sample_std(&values)
    };
    let mut kept: Vec<usize> = (0..losses.len()).collect();
    let mut dropped = 0;
    while kept.len() > 1 && dropped < MAX_DROPPED && std_of(&kept) > SPREAD_LIMIT {
        let mut best_pos = 0;
        let mut best_std = f64::INFINITY;
        for pos in 0..kept.len() {
            let mut rest = kept.clone();
            rest.remove(pos);
            let std = std_of(&rest);
            if std < best_std {
                best_std = std;
                best_pos = pos;
            }
        }
        kept.remove(best_pos);
        dropped += 1;
    }
    FilterOutcome {
        flagged: std_of(&kept) > SPREAD_LIMIT,
        kept,
    }
}

/// Configuration of the aggregation sweep: trains `replicas` models per
/// (message passing depth, aggregation mode) cell on a shared train set
/// and compares policy error on one shared eval set.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub n: usize,
    pub iteration_counts: Vec<usize>,
    pub replicas: usize,
    pub dim: usize,
    pub batch_size: usize,
    pub train_steps: usize,
    pub learning_rate: f32,
    pub train_pairs: usize,
    pub eval_pairs: usize,
    pub seed: u64,
}

/// One (depth, aggregation) cell of the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub iterations: usize,
    pub aggregation: &'static str,
    pub replicas_trained: usize,
    pub replicas_kept: usize,
    /// Set when the kept spread stays above [`SPREAD_LIMIT`] or fewer than
    /// three replicas survive the filter.
    pub flagged: bool,
    pub policy_error_mean: f64,
    pub policy_error_std: f64,
    /// Hex digest of the serialized eval set; identical across all rows of
    /// one run, making the controlled comparison checkable.
    pub eval_hash: String,
    pub seed: u64,
}

fn aggregation_name(aggregation: Aggregation) -> &'static str {
    match aggregation {
        Aggregation::Mean => "mean",
        Aggregation::Attention => "attention",
    }
}

/// Mean-versus-attention comparison: for every message passing depth and
/// both aggregation modes, trains `config.replicas` replicas (fresh
/// parameter and batch seeds each), filters them on eval loss, and reports
/// mean and unbiased std of the kept replicas' policy errors. All cells
/// share one train set and one eval set.
pub fn aggregation_sweep(config: &SweepConfig) -> Vec<SweepRow> {
    let train_set = labeled_pairs(
        config.n,
        config.train_pairs,
        derive_seed(config.seed, TRAIN_SET_SALT, config.n as u64, 0),
    );
    let eval_set = labeled_pairs(
        config.n,
        config.eval_pairs,
        derive_seed(config.seed, EVAL_SET_SALT, config.n as u64, 0),
    );
    let mut hasher = Sha256::new();
    hasher.update(write_dataset(&eval_set).as_bytes());
    let eval_hash = hex(&hasher.finalize());

    let mut rows = Vec::new();
    for &iterations in &config.iteration_counts {
        for (tag, aggregation) in [(0u64, Aggregation::Mean), (1u64, Aggregation::Attention)] {
            let mut losses = Vec::with_capacity(config.replicas);
            let mut errors = Vec::with_capacity(config.replicas);
            for replica in 0..config.replicas {
                let mut train_config = TrainConfig::new(config.dim, iterations, aggregation);
                train_config.batch_size = config.batch_size;
                train_config.learning_rate = config.learning_rate;
                train_config.train_steps = config.train_steps;
                train_config.eval_every = config.train_steps;
                train_config.seed = derive_seed(
                    config.seed,
                    REPLICA_SALT,
                    (iterations as u64) << 8 | tag,
                    replica as u64,
                );
                let (params, _) = train(&train_set, &train_config);
                let stats = evaluate_model(&params, &eval_set);
                losses.push(stats.loss);
                errors.push(stats.policy_error);
            }
            let filter = filter_replicas(&losses);
            let kept: Vec<f64> = filter.kept.iter().map(|&i| errors[i]).collect();
            rows.push(SweepRow {
                n: config.n,
                iterations,
                aggregation: aggregation_name(aggregation),
                replicas_trained: config.replicas,
                replicas_kept: kept.len(),
                flagged: filter.flagged || kept.len() < 3,
                policy_error_mean: kept.iter().sum::<f64>() / kept.len() as f64,
                policy_error_std: sample_std(&kept),
                eval_hash: eval_hash.clone(),
                seed: config.seed,
            });
        }
    }
    rows
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
