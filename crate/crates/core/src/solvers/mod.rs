//! Complete backtracking SAT search: DPLL and CDCL, both parameterized by a
//! branching heuristic, plus a brute-force enumeration oracle for testing.
//!
//! Performance is measured in branching decisions: a decision is one
//! invocation of the heuristic. Propagated (implied) literals are free.

mod brute;
mod cdcl;
mod dpll;

pub use brute::{brute_force, BruteForceError, BruteForceOutcome};
pub use cdcl::{cdcl, cdcl_with_learned};
pub use dpll::dpll;

use crate::cnf::{Literal, ResidualView};

/// Outcome class of a solver run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    /// A satisfying assignment was found.
    Sat,
    /// The formula has no model.
    Unsat,
    /// The decision cap was reached before an answer.
    StepLimit,
}

/// Result of a solver run: verdict, decision count, and the witness when sat.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    /// Outcome of the search.
    pub verdict: Verdict,
    /// Number of branching decisions (heuristic invocations) made.
    pub decisions: u64,
    /// A full satisfying assignment, present iff the verdict is [`Verdict::Sat`].
    pub witness: Option<Vec<bool>>,
}

impl SolveResult {
    pub(crate) fn sat(decisions: u64, witness: Vec<bool>) -> Self {
        SolveResult {
            verdict: Verdict::Sat,
            decisions,
            witness: Some(witness),
        }
    }

    pub(crate) fn unsat(decisions: u64) -> Self {
        SolveResult {
            verdict: Verdict::Unsat,
            decisions,
            witness: None,
        }
    }

    pub(crate) fn step_limit(decisions: u64) -> Self {
        SolveResult {
            verdict: Verdict::StepLimit,
            decisions,
            witness: None,
        }
    }
}

/// The `choose-literal` contract: pick one unassigned literal to branch on.
///
/// The heuristic chooses both the variable and its phase. The view it
/// receives is nonempty and free of empty clauses, and every clause in it
/// has at least two free literals (units have already been propagated).
/// The returned literal must occur in the view.
pub trait BranchingHeuristic {
    /// Select the branching literal for the given residual view.
    fn choose(&mut self, view: &ResidualView) -> Literal;
}

impl<F> BranchingHeuristic for F
where
    F: FnMut(&ResidualView) -> Literal,
{
    fn choose(&mut self, view: &ResidualView) -> Literal {
        self(view)
    }
}
