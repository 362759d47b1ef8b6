//! Built-in diagnostics: solver agreement against exhaustive enumeration,
//! and finite-difference validation of the training gradients.

use ndarray::Array2;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use satkit_core::dataset::{gen_sr_pair, label_policy, LabeledSample};
use satkit_core::graphnet::{batch_gradients, Aggregation, ModelParams};
use satkit_core::heuristics::{dlis, jw_os};
use satkit_core::solvers::{brute_force, cdcl, dpll, BruteForceOutcome};
use satkit_core::Verdict;

const SOLVER_SIZES: std::ops::RangeInclusive<usize> = 4..=8;
const PAIRS_PER_SIZE: usize = 10;

/// Finite-difference step and acceptance bound for the gradient check.
/// The absolute floor covers gradients below central-difference resolution.
const FD_STEP: f64 = 1e-4;
const FD_ABSOLUTE: f64 = 1e-8;
const FD_RELATIVE: f64 = 1e-3;

/// Run both diagnostic suites; the `Ok` value is a one-line summary and
/// the `Err` value a one-line failure diagnostic.
pub fn run_selftest() -> Result<String, String> {
    let solved = solver_agreement()?;
    let checked = gradient_check()?;
    Ok(format!(
        "selftest ok: {solved} formulas agree with exhaustive search, {checked} gradient elements match finite differences"
    ))
}

/// DPLL (JW-OS and DLIS) and CDCL verdicts against brute force on fresh
/// SR(n) pairs; every sat witness is checked against its formula.
fn solver_agreement() -> Result<usize, String> {
    let mut checked = 0;
    for n in SOLVER_SIZES {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        for pair in 0..PAIRS_PER_SIZE {
            let (unsat, sat) = gen_sr_pair(n, &mut rng);
            for formula in [&unsat, &sat] {
                let expect_sat = match brute_force(formula).map_err(|e| e.to_string())? {
                    BruteForceOutcome::Sat(_) => true,
                    BruteForceOutcome::Unsat => false,
                };
                let runs = [
                    ("dpll/jw", dpll(formula, &mut jw_os, None)),
                    ("dpll/dlis", dpll(formula, &mut dlis, None)),
                    ("cdcl/jw", cdcl(formula, &mut jw_os, None)),
                ];
                for (name, result) in runs {
                    let got_sat = match result.verdict {
                        Verdict::Sat => true,
                        Verdict::Unsat => false,
                        Verdict::StepLimit => {
                            return Err(format!(
                                "selftest: {name} hit a step limit uncapped on SR({n}) pair {pair}"
                            ))
                        }
                    };
                    if got_sat != expect_sat {
                        return Err(format!(
                            "selftest: {name} disagrees with exhaustive search on SR({n}) pair {pair}"
                        ));
                    }
                    if let Some(witness) = result.witness {
                        if !formula.satisfied_by(&witness) {
                            return Err(format!(
                                "selftest: {name} returned a non-model witness on SR({n}) pair {pair}"
                            ));
                        }
                    }
                }
                checked += 1;
            }
        }
    }
    Ok(checked)
}

/// Central-difference check of every gradient element on a small labeled
/// batch, in both aggregation modes.
fn gradient_check() -> Result<usize, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let (unsat, sat) = gen_sr_pair(4, &mut rng);
    let samples = [label_policy(&unsat), label_policy(&sat)];
    let refs: Vec<&LabeledSample> = samples.iter().collect();

    let mut checked = 0;
    for aggregation in [Aggregation::Mean, Aggregation::Attention] {
        let mut params: ModelParams<f64> = ModelParams::init(4, 2, aggregation, 23).lift();
        let (_, grads): (f64, Vec<Array2<f64>>) = batch_gradients(&params, &refs);
        for tensor_index in 0..grads.len() {
            let (rows, cols) = grads[tensor_index].dim();
            for row in 0..rows {
                for col in 0..cols {
                    let original = params.flat()[tensor_index][(row, col)];
                    *params.flat_mut()[tensor_index].get_mut((row, col)).expect("in bounds") =
                        original + FD_STEP;
                    let up = batch_gradients(&params, &refs).0;
                    *params.flat_mut()[tensor_index].get_mut((row, col)).expect("in bounds") =
                        original - FD_STEP;
                    let down = batch_gradients(&params, &refs).0;
                    *params.flat_mut()[tensor_index].get_mut((row, col)).expect("in bounds") =
                        original;
                    let fd = (up - down) / (2.0 * FD_STEP);
                    let analytic = grads[tensor_index][(row, col)];
                    if (fd - analytic).abs() > FD_ABSOLUTE + FD_RELATIVE * fd.abs().max(analytic.abs())
                    {
                        return Err(format!(
                            "selftest: gradient mismatch in {aggregation:?} tensor {tensor_index} at ({row}, {col}): finite difference {fd}, analytic {analytic}"
                        ));
                    }
                    checked += 1;
                }
            }
        }
    }
    Ok(checked)
}
