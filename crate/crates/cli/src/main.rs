//! satkit: generate and label random instance pairs, train branching
//! models, solve DIMACS files, and run the benchmark harnesses.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use satkit_cli::experiments::{
    aggregation_sweep, duel_experiment, solve_rate_experiment, HeuristicKind, SolverKind,
    SweepConfig,
};
use satkit_cli::report;
use satkit_cli::selftest::run_selftest;
use satkit_core::dataset::{gen_sr_pair, label_policy, read_dataset, write_dataset, LabeledSample};
use satkit_core::graphnet::{load_checkpoint, save_checkpoint, Aggregation, ModelParams, TrainConfig};
use satkit_core::heuristics::DEFAULT_SAT_THRESHOLD;
use satkit_core::solvers::{cdcl, dpll};
use satkit_core::{cnf, Verdict};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(
    name = "satkit",
    version,
    about = "SAT toolkit: random instance pairs, trainable branching heuristics, and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum HeuristicArg {
    Jw,
    Dlis,
    Random,
    Neural,
    Hybrid,
}

impl HeuristicArg {
    fn kind(self) -> HeuristicKind {
        match self {
            HeuristicArg::Jw => HeuristicKind::Jw,
            HeuristicArg::Dlis => HeuristicKind::Dlis,
            HeuristicArg::Random => HeuristicKind::Random,
            HeuristicArg::Neural => HeuristicKind::Neural,
            HeuristicArg::Hybrid => HeuristicKind::Hybrid,
        }
    }

    fn needs_model(self) -> bool {
        matches!(self, HeuristicArg::Neural | HeuristicArg::Hybrid)
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Dpll,
    Cdcl,
}

impl SolverArg {
    fn kind(self) -> SolverKind {
        match self {
            SolverArg::Dpll => SolverKind::Dpll,
            SolverArg::Cdcl => SolverKind::Cdcl,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate random SR(n) pairs (one unsatisfiable formula and its
    /// satisfiable twin per pair), without policy labels
    Gen {
        /// Variables per formula
        #[arg(long)]
        n: usize,
        /// Number of pairs
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output dataset file
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute sat labels and add per-literal policy labels to a dataset
    Label {
        /// Input dataset file
        #[arg(long)]
        input: PathBuf,
        /// Output dataset file
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a branching model on a labeled dataset
    Train {
        /// Labeled dataset file
        #[arg(long)]
        data: PathBuf,
        /// Embedding width
        #[arg(long, default_value_t = 32)]
        dim: usize,
        /// Message passing rounds per forward pass
        #[arg(long, default_value_t = 16)]
        iters: usize,
        /// Samples per training step (must be even)
        #[arg(long, default_value_t = 32)]
        batch: usize,
        #[arg(long, default_value_t = 2500)]
        steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f32,
        /// Gated attention aggregation (on) or mean aggregation (off)
        #[arg(long, value_enum, default_value_t = Switch::On)]
        attention: Switch,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Metric cadence in steps
        #[arg(long, default_value_t = 50)]
        eval_every: usize,
        /// Checkpoint output file
        #[arg(long)]
        out: PathBuf,
        /// Metric log output file (CSV)
        #[arg(long)]
        metrics: PathBuf,
    },
    /// Solve a DIMACS CNF file and print verdict, decisions, and witness
    Solve {
        /// DIMACS CNF input file
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = HeuristicArg::Jw)]
        heuristic: HeuristicArg,
        /// Checkpoint file (required for neural and hybrid)
        #[arg(long)]
        model: Option<PathBuf>,
        /// Decision cap; omit to run uncapped
        #[arg(long)]
        cap: Option<u64>,
        #[arg(long, value_enum, default_value_t = SolverArg::Dpll)]
        solver: SolverArg,
        /// Sat-probability threshold below which hybrid falls back to JW-OS
        #[arg(long, default_value_t = DEFAULT_SAT_THRESHOLD)]
        threshold: f64,
        /// Seed for the random heuristic
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Capped solve-rate table across heuristics on fresh satisfiable
    /// instances
    Bench1 {
        /// Size classes, comma separated; empty yields a header-only table
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Instances per size class
        #[arg(long, default_value_t = 100)]
        count: usize,
        /// Decision cap
        #[arg(long, default_value_t = 1000)]
        cap: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint file; adds the neural and hybrid heuristics
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SAT_THRESHOLD)]
        threshold: f64,
        /// Output CSV file
        #[arg(long)]
        out: PathBuf,
        /// Optional bar chart mirroring the CSV
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Uncapped decision duel of the hybrid heuristic against JW-OS
    Bench2 {
        /// Size classes, comma separated
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        /// Instances per size class
        #[arg(long, default_value_t = 100)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Checkpoint file backing the hybrid challenger
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SAT_THRESHOLD)]
        threshold: f64,
        #[arg(long, value_enum, default_value_t = SolverArg::Dpll)]
        solver: SolverArg,
        /// Output CSV file
        #[arg(long)]
        out: PathBuf,
        /// Optional bar chart mirroring the CSV
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Mean-versus-attention aggregation sweep over trained replicas
    Bench3 {
        /// Variables per training formula
        #[arg(long, default_value_t = 8)]
        n: usize,
        /// Message passing depths, comma separated
        #[arg(long, value_delimiter = ',', default_values_t = [4usize, 8])]
        iters: Vec<usize>,
        /// Replicas trained per (depth, mode) cell
        #[arg(long, default_value_t = 3)]
        replicas: usize,
        #[arg(long, default_value_t = 16)]
        dim: usize,
        #[arg(long, default_value_t = 16)]
        batch: usize,
        #[arg(long, default_value_t = 2500)]
        steps: usize,
        #[arg(long, default_value_t = 1e-3)]
        lr: f32,
        /// Training pairs (two samples each)
        #[arg(long, default_value_t = 60)]
        train_pairs: usize,
        /// Held-out eval pairs shared by every cell
        #[arg(long, default_value_t = 30)]
        eval_pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV file
        #[arg(long)]
        out: PathBuf,
        /// Optional bar chart mirroring the CSV
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Run the built-in diagnostic suites
    Selftest,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { n, count, seed, out } => gen(n, count, seed, &out),
        Command::Label { input, out } => label(&input, &out),
        Command::Train {
            data,
            dim,
            iters,
            batch,
            steps,
            lr,
            attention,
            seed,
            eval_every,
            out,
            metrics,
        } => train_command(
            &data, dim, iters, batch, steps, lr, attention, seed, eval_every, &out, &metrics,
        ),
        Command::Solve {
            input,
            heuristic,
            model,
            cap,
            solver,
            threshold,
            seed,
        } => solve(&input, heuristic, model.as_deref(), cap, solver, threshold, seed),
        Command::Bench1 {
            sizes,
            count,
            cap,
            seed,
            model,
            threshold,
            out,
            svg,
        } => {
            let params = model.as_deref().map(read_model).transpose()?;
            let rows = solve_rate_experiment(&sizes, count, cap, seed, params.as_ref(), threshold);
            write_output(&out, &report::solve_rate_csv(&rows))?;
            if let Some(path) = svg {
                write_output(&path, &report::solve_rate_svg(&rows))?;
            }
            Ok(())
        }
        Command::Bench2 {
            sizes,
            count,
            seed,
            model,
            threshold,
            solver,
            out,
            svg,
        } => {
            let params = read_model(&model)?;
            let rows = duel_experiment(
                &sizes,
                count,
                seed,
                HeuristicKind::Hybrid,
                Some(&params),
                threshold,
                solver.kind(),
            );
            write_output(&out, &report::duel_csv(&rows))?;
            if let Some(path) = svg {
                write_output(&path, &report::duel_svg(&rows))?;
            }
            Ok(())
        }
        Command::Bench3 {
            n,
            iters,
            replicas,
            dim,
            batch,
            steps,
            lr,
            train_pairs,
            eval_pairs,
            seed,
            out,
            svg,
        } => {
            if replicas < 3 {
                bail!("--replicas must be at least 3");
            }
            if batch % 2 != 0 {
                bail!("--batch must be even to balance sat and unsat samples");
            }
            let config = SweepConfig {
                n,
                iteration_counts: iters,
                replicas,
                dim,
                batch_size: batch,
                train_steps: steps,
                learning_rate: lr,
                train_pairs,
                eval_pairs,
                seed,
            };
            let rows = aggregation_sweep(&config);
            for row in &rows {
                if row.flagged {
                    eprintln!(
                        "warning: depth {} {} kept {} of {} replicas with spread {}; treat the row with caution",
                        row.iterations,
                        row.aggregation,
                        row.replicas_kept,
                        row.replicas_trained,
                        row.policy_error_std
                    );
                }
            }
            write_output(&out, &report::sweep_csv(&rows))?;
            if let Some(path) = svg {
                write_output(&path, &report::sweep_svg(&rows))?;
            }
            Ok(())
        }
        Command::Selftest => {
            let summary = run_selftest().map_err(anyhow::Error::msg)?;
            println!("{summary}");
            Ok(())
        }
    }
}

fn gen(n: usize, count: usize, seed: u64, out: &Path) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(2 * count);
    for _ in 0..count {
        let (unsat, sat) = gen_sr_pair(n, &mut rng);
        samples.push(LabeledSample { formula: unsat, sat: false, policy: None });
        samples.push(LabeledSample { formula: sat, sat: true, policy: None });
    }
    write_output(out, &write_dataset(&samples))
}

fn label(input: &Path, out: &Path) -> Result<()> {
    let text = read_text(input)?;
    let samples = read_dataset(&text).with_context(|| format!("parsing {}", input.display()))?;
    let labeled: Vec<LabeledSample> = samples.iter().map(|s| label_policy(&s.formula)).collect();
    write_output(out, &write_dataset(&labeled))
}

#[allow(clippy::too_many_arguments)]
fn train_command(
    data: &Path,
    dim: usize,
    iters: usize,
    batch: usize,
    steps: usize,
    lr: f32,
    attention: Switch,
    seed: u64,
    eval_every: usize,
    out: &Path,
    metrics: &Path,
) -> Result<()> {
    if batch % 2 != 0 {
        bail!("--batch must be even to balance sat and unsat samples");
    }
    let text = read_text(data)?;
    let samples = read_dataset(&text).with_context(|| format!("parsing {}", data.display()))?;
    let aggregation = match attention {
        Switch::On => Aggregation::Attention,
        Switch::Off => Aggregation::Mean,
    };
    let mut config = TrainConfig::new(dim, iters, aggregation);
    config.batch_size = batch;
    config.train_steps = steps;
    config.learning_rate = lr;
    config.seed = seed;
    config.eval_every = eval_every;
    let (params, log) = satkit_core::graphnet::train(&samples, &config);
    save_checkpoint(&params, out).with_context(|| format!("writing {}", out.display()))?;
    write_output(metrics, &report::metrics_csv(&log))?;
    let last = log.last().expect("at least one metric point");
    println!(
        "trained {} steps: loss {}, sat error {}, policy error {}",
        last.step, last.loss, last.sat_error, last.policy_error
    );
    Ok(())
}

fn solve(
    input: &Path,
    heuristic: HeuristicArg,
    model: Option<&Path>,
    cap: Option<u64>,
    solver: SolverArg,
    threshold: f64,
    seed: u64,
) -> Result<()> {
    if heuristic.needs_model() && model.is_none() {
        bail!("--heuristic neural and hybrid require --model");
    }
    let text = read_text(input)?;
    let formula = cnf::parse_dimacs(&text).with_context(|| format!("parsing {}", input.display()))?;
    let params = match model {
        Some(path) if heuristic.needs_model() => Some(read_model(path)?),
        _ => None,
    };
    let mut chooser = satkit_cli::experiments::make_heuristic(
        heuristic.kind(),
        params.as_ref(),
        threshold,
        seed,
    );
    let result = match solver {
        SolverArg::Dpll => dpll(&formula, &mut *chooser, cap),
        SolverArg::Cdcl => cdcl(&formula, &mut *chooser, cap),
    };
    match result.verdict {
        Verdict::Sat => println!("SAT"),
        Verdict::Unsat => println!("UNSAT"),
        Verdict::StepLimit => println!("STEP-LIMIT"),
    }
    println!("decisions {}", result.decisions);
    if let Some(witness) = result.witness {
        let literals: Vec<String> = witness
            .iter()
            .enumerate()
            .map(|(var, &value)| {
                if value {
                    format!("{}", var + 1)
                } else {
                    format!("-{}", var + 1)
                }
            })
            .collect();
        println!("v {} 0", literals.join(" "));
    }
    Ok(())
}

fn read_model(path: &Path) -> Result<ModelParams> {
    load_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn write_output(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}
