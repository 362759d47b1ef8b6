//! Iterative DPLL with chronological backtracking.

use crate::cnf::{Assignment, CnfFormula, PropagationOutcome, Reason};
use crate::cnf::{simplified_view, unit_propagate};

use super::{BranchingHeuristic, SolveResult};

/// One open branch: the decision literal, the trail length before it was
/// assigned, and whether its negation has already been tried.
struct Frame {
    lit: crate::cnf::Literal,
    mark: usize,
    flipped: bool,
}

/// DPLL search: repeat unit propagation, succeed on an empty residual view,
/// backtrack on conflict, otherwise branch on the heuristic's literal first
/// positively as chosen, then negated.
///
/// Each heuristic invocation counts as one decision; trying the negation of
/// an earlier choice does not invoke the heuristic and is free. When `cap`
/// is set, the search aborts with a step-limit verdict rather than make the
/// `cap + 1`-th decision.
pub fn dpll<H>(formula: &CnfFormula, heuristic: &mut H, cap: Option<u64>) -> SolveResult
where
    H: BranchingHeuristic + ?Sized,
{
    let mut assignment = Assignment::new(formula.num_vars());
    let mut frames: Vec<Frame> = Vec::new();
    let mut decisions: u64 = 0;

    loop {
        match unit_propagate(formula, &mut assignment) {
            PropagationOutcome::Conflict { .. } => {
                // Backtrack to the most recent decision whose negation is
                // untried; exhausting the frame stack proves unsatisfiability.
                loop {
                    let Some(frame) = frames.pop() else {
                        return SolveResult::unsat(decisions);
                    };
                    if frame.flipped {
                        continue;
                    }
                    assignment.backtrack_to(frame.mark);
                    let flipped = frame.lit.negated();
                    assignment.assign(flipped, Reason::Decision);
                    frames.push(Frame {
                        lit: flipped,
                        mark: frame.mark,
                        flipped: true,
                    });
                    break;
                }
            }
            PropagationOutcome::Fixpoint => {
                let view = simplified_view(formula, &assignment);
                if view.is_empty() {
                    return SolveResult::sat(decisions, assignment.complete_with_false());
                }
                if let Some(cap) = cap {
                    if decisions >= cap {
                        return SolveResult::step_limit(decisions);
                    }
                }
                let lit = heuristic.choose(&view);
                debug_assert_eq!(assignment.literal_value(lit), None);
                decisions += 1;
                frames.push(Frame {
                    lit,
                    mark: assignment.trail().len(),
                    flipped: false,
                });
                assignment.assign(lit, Reason::Decision);
            }
        }
    }
}
