//! Unit propagation and the residual view of a partially assigned formula.

use super::{Assignment, Clause, CnfFormula, Literal, Reason};

/// Result of running unit propagation to fixpoint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PropagationOutcome {
    /// No more units and no conflict.
    Fixpoint,
    /// Some clause has all literals false; carries the clause index.
    Conflict {
        /// Index of the conflicting clause in the formula.
        clause: usize,
    },
}

/// Repeatedly assign the sole unassigned literal of any clause whose other
/// literals are all false, until fixpoint or until some clause has all
/// literals false.
///
/// Every propagated literal is appended to the trail with its reason clause.
/// Conflict is a normal outcome, not an error. At fixpoint no unresolved
/// clause has exactly one free literal.
pub fn unit_propagate(formula: &CnfFormula, assignment: &mut Assignment) -> PropagationOutcome {
    loop {
        let mut changed = false;
        'clauses: for (idx, clause) in formula.clauses().iter().enumerate() {
            let mut unassigned = None;
            let mut free = 0usize;
            for &lit in clause.iter() {
                match assignment.literal_value(lit) {
                    Some(true) => continue 'clauses,
                    Some(false) => {}
                    None => {
                        free += 1;
                        if free > 1 {
                            continue 'clauses;
                        }
                        unassigned = Some(lit);
                    }
                }
            }
            match unassigned {
                None => return PropagationOutcome::Conflict { clause: idx },
                Some(lit) => {
                    assignment.assign(lit, Reason::Propagated(idx));
                    changed = true;
                }
            }
        }
        if !changed {
            return PropagationOutcome::Fixpoint;
        }
    }
}

/// An unresolved clause in a residual view: the original clause index plus
/// the literals still free under the assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewClause {
    /// Index of the clause in the original formula.
    pub id: usize,
    /// Free literals remaining after removing false ones.
    pub literals: Vec<Literal>,
}

/// The residual of a formula under a partial assignment: satisfied clauses
/// removed, false literals removed from the rest.
///
/// The view is empty iff every clause is satisfied; it contains an empty
/// clause iff some clause has all literals false. Heuristics and graph
/// construction consume this view.
#[derive(Clone, Debug)]
pub struct ResidualView {
    num_vars: usize,
    clauses: Vec<ViewClause>,
}

impl ResidualView {
    /// Variable count of the underlying formula.
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// The unresolved clauses.
    pub fn clauses(&self) -> &[ViewClause] {
        &self.clauses
    }

    /// True when every clause of the formula is satisfied.
    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    /// True when some clause has lost all its literals.
    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(|c| c.literals.is_empty())
    }

    /// Distinct literals occurring in the view, sorted by code.
    pub fn present_literals(&self) -> Vec<Literal> {
        let mut lits: Vec<Literal> = self
            .clauses
            .iter()
            .flat_map(|c| c.literals.iter().copied())
            .collect();
        lits.sort_unstable();
        lits.dedup();
        lits
    }

    /// Materialize the view as a standalone formula over the same variables.
    pub fn to_formula(&self) -> CnfFormula {
        let clauses = self
            .clauses
            .iter()
            .map(|c| Clause::new(c.literals.iter().copied()).expect("view clause is tautology-free"))
            .collect();
        CnfFormula::new(self.num_vars, clauses).expect("view literals are in range")
    }

    /// Build a view directly from bare clauses. Used by solvers that keep
    /// their own clause database.
    pub(crate) fn from_parts(num_vars: usize, clauses: Vec<ViewClause>) -> Self {
        ResidualView { num_vars, clauses }
    }
}

/// Compute the residual view of `formula` under `assignment`.
pub fn simplified_view(formula: &CnfFormula, assignment: &Assignment) -> ResidualView {
    let mut clauses = Vec::new();
    'clauses: for (idx, clause) in formula.clauses().iter().enumerate() {
        let mut free = Vec::new();
        for &lit in clause.iter() {
            match assignment.literal_value(lit) {
                Some(true) => continue 'clauses,
                Some(false) => {}
                None => free.push(lit),
            }
        }
        clauses.push(ViewClause {
            id: idx,
            literals: free,
        });
    }
    ResidualView {
        num_vars: formula.num_vars(),
        clauses,
    }
}
