//! CNF formula representation, DIMACS I/O, assignments, and unit propagation.

mod dimacs;
mod propagate;

pub use dimacs::{parse_dimacs, write_dimacs, ParseError};
pub use propagate::{simplified_view, unit_propagate, PropagationOutcome, ResidualView, ViewClause};

use std::fmt;
use thiserror::Error;

/// A literal: a propositional variable together with a polarity.
///
/// Variable `v` with positive polarity encodes to code `2v`, negative
/// polarity to `2v + 1`, so negation is `code XOR 1` and the variable is
/// `code / 2`. Codes double as dense array indices everywhere.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal(u32);

impl Literal {
    /// The positive literal of variable `var`.
    pub fn positive(var: usize) -> Self {
        Literal((var as u32) << 1)
    }

    /// The negative literal of variable `var`.
    pub fn negative(var: usize) -> Self {
        Literal(((var as u32) << 1) | 1)
    }

    /// Build a literal from its integer code.
    pub fn from_code(code: u32) -> Self {
        Literal(code)
    }

    /// The integer code of this literal.
    pub fn code(self) -> u32 {
        self.0
    }

    /// Code widened for indexing literal-keyed tables.
    pub(crate) fn index(self) -> usize {
        self.0 as usize
    }

    /// The variable index this literal talks about.
    pub fn variable(self) -> usize {
        (self.0 >> 1) as usize
    }

    /// True if this is the positive polarity.
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// The opposite polarity of the same variable.
    pub fn negated(self) -> Self {
        Literal(self.0 ^ 1)
    }

    /// Encode as a signed DIMACS integer (`±(variable + 1)`).
    pub fn to_dimacs(self) -> i64 {
        let v = self.variable() as i64 + 1;
        if self.is_positive() {
            v
        } else {
            -v
        }
    }

    /// Decode a nonzero signed DIMACS integer.
    pub fn from_dimacs(lit: i64) -> Self {
        debug_assert!(lit != 0);
        let var = (lit.unsigned_abs() - 1) as usize;
        if lit > 0 {
            Literal::positive(var)
        } else {
            Literal::negative(var)
        }
    }
}

impl std::ops::Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        self.negated()
    }
}

impl fmt::Debug for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// Error raised when a clause would contain both polarities of a variable.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("tautological clause: contains both polarities of variable {variable}")]
pub struct TautologyError {
    /// Zero-based index of the offending variable.
    pub variable: usize,
}

/// A disjunction of literals.
///
/// Construction deduplicates repeated literals and rejects tautologies, so a
/// well-formed clause never contains a literal twice or together with its
/// negation. The empty clause is permitted and stands for falsity.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Build a clause, dropping duplicate literals and rejecting tautologies.
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Result<Self, TautologyError> {
        let mut seen: Vec<Literal> = Vec::new();
        for lit in literals {
            if seen.contains(&lit.negated()) {
                return Err(TautologyError {
                    variable: lit.variable(),
                });
            }
            if !seen.contains(&lit) {
                seen.push(lit);
            }
        }
        Ok(Clause { literals: seen })
    }

    /// The literals of this clause, in construction order.
    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    /// Number of literals.
    pub fn len(&self) -> usize {
        self.literals.len()
    }

    /// True for the empty clause.
    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// Iterate over the literals.
    pub fn iter(&self) -> std::slice::Iter<'_, Literal> {
        self.literals.iter()
    }

    /// True if any literal is true under the given total assignment.
    pub fn satisfied_by(&self, values: &[bool]) -> bool {
        self.literals
            .iter()
            .any(|l| values[l.variable()] == l.is_positive())
    }
}

impl fmt::Debug for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.literals.iter()).finish()
    }
}

/// Error raised when a formula references a variable outside its range.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("literal {literal} references variable {variable} but the formula declares {num_vars} variables")]
pub struct VariableRangeError {
    /// The out-of-range literal, DIMACS-encoded.
    pub literal: i64,
    /// Its zero-based variable index.
    pub variable: usize,
    /// Declared variable count.
    pub num_vars: usize,
}

/// A CNF formula: a conjunction of clauses over `num_vars` variables.
///
/// Immutable after construction and safe to share across threads.
#[derive(Clone, PartialEq, Eq)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    /// Build a formula, checking that every literal is in range.
    pub fn new(num_vars: usize, clauses: Vec<Clause>) -> Result<Self, VariableRangeError> {
        assert!(num_vars > 0, "formula must declare at least one variable");
        for clause in &clauses {
            for lit in clause.iter() {
                if lit.variable() >= num_vars {
                    return Err(VariableRangeError {
                        literal: lit.to_dimacs(),
                        variable: lit.variable(),
                        num_vars,
                    });
                }
            }
        }
        Ok(CnfFormula { num_vars, clauses })
    }

    /// Declared variable count.
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// The clauses of this formula.
    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    /// Number of clauses.
    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// The formula conjoined with a unit clause `(literal)`.
    ///
    /// The variable count is unchanged; the unit clause is appended last.
    pub fn condition(&self, literal: Literal) -> CnfFormula {
        assert!(
            literal.variable() < self.num_vars,
            "conditioning literal out of range"
        );
        let mut clauses = self.clauses.clone();
        clauses.push(Clause::new([literal]).expect("unit clause cannot be tautological"));
        CnfFormula {
            num_vars: self.num_vars,
            clauses,
        }
    }

    /// True if the total assignment satisfies every clause.
    pub fn satisfied_by(&self, values: &[bool]) -> bool {
        assert_eq!(values.len(), self.num_vars);
        self.clauses.iter().all(|c| c.satisfied_by(values))
    }
}

impl fmt::Debug for CnfFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CnfFormula")
            .field("num_vars", &self.num_vars)
            .field("clauses", &self.clauses)
            .finish()
    }
}

/// Why a literal ended up on the trail.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reason {
    /// A branching decision (or a forced second branch in DPLL).
    Decision,
    /// Forced by unit propagation; carries the index of the unit clause.
    Propagated(usize),
}

/// A partial assignment with an ordered trail of (literal, reason) records.
///
/// Single-owner mutable state: each solver run owns one `Assignment`.
#[derive(Clone, Debug)]
pub struct Assignment {
    values: Vec<Option<bool>>,
    trail: Vec<(Literal, Reason)>,
}

impl Assignment {
    /// An empty assignment over `num_vars` variables.
    pub fn new(num_vars: usize) -> Self {
        Assignment {
            values: vec![None; num_vars],
            trail: Vec::new(),
        }
    }

    /// Tri-state value of a variable.
    pub fn value(&self, var: usize) -> Option<bool> {
        self.values[var]
    }

    /// Tri-state truth value of a literal under this assignment.
    pub fn literal_value(&self, lit: Literal) -> Option<bool> {
        self.values[lit.variable()].map(|v| v == lit.is_positive())
    }

    /// Make `lit` true, recording why. The variable must be unassigned.
    pub fn assign(&mut self, lit: Literal, reason: Reason) {
        debug_assert!(self.values[lit.variable()].is_none(), "double assignment");
        self.values[lit.variable()] = Some(lit.is_positive());
        self.trail.push((lit, reason));
    }

    /// Undo trail entries beyond `mark`, unassigning their variables.
    pub fn backtrack_to(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let (lit, _) = self.trail.pop().unwrap();
            self.values[lit.variable()] = None;
        }
    }

    /// The trail in assignment order.
    pub fn trail(&self) -> &[(Literal, Reason)] {
        &self.trail
    }

    /// Number of assigned variables.
    pub fn num_assigned(&self) -> usize {
        self.trail.len()
    }

    /// Number of variables this assignment ranges over.
    pub fn num_vars(&self) -> usize {
        self.values.len()
    }

    /// Total assignment with unassigned variables defaulted to false.
    pub fn complete_with_false(&self) -> Vec<bool> {
        self.values.iter().map(|v| v.unwrap_or(false)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_encoding() {
        let a = Literal::positive(0);
        let not_a = Literal::negative(0);
        assert_eq!(a.code(), 0);
        assert_eq!(not_a.code(), 1);
        assert_eq!(Literal::positive(3).code(), 6);
        assert_eq!(Literal::negative(3).code(), 7);
        assert_eq!(a.negated(), not_a);
        assert_eq!(!not_a, a);
    }

    #[test]
    fn negation_is_an_involution() {
        for code in 0..2048 {
            let lit = Literal::from_code(code);
            assert_eq!(lit.negated().negated(), lit);
            assert_eq!(lit.negated().variable(), lit.variable());
            assert_ne!(lit.negated(), lit);
        }
    }

    #[test]
    fn dimacs_codec() {
        assert_eq!(Literal::from_dimacs(1), Literal::positive(0));
        assert_eq!(Literal::from_dimacs(-1), Literal::negative(0));
        assert_eq!(Literal::from_dimacs(5).to_dimacs(), 5);
        assert_eq!(Literal::from_dimacs(-7).to_dimacs(), -7);
    }

    #[test]
    fn clause_rejects_tautology() {
        let err = Clause::new([Literal::positive(2), Literal::negative(2)]);
        assert_eq!(err.unwrap_err().variable, 2);
    }

    #[test]
    fn clause_deduplicates() {
        let c = Clause::new([
            Literal::positive(0),
            Literal::positive(1),
            Literal::positive(0),
        ])
        .unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.literals(), &[Literal::positive(0), Literal::positive(1)]);
    }

    #[test]
    fn formula_checks_variable_range() {
        let c = Clause::new([Literal::positive(4)]).unwrap();
        let err = CnfFormula::new(3, vec![c]).unwrap_err();
        assert_eq!(err.variable, 4);
        assert_eq!(err.num_vars, 3);
    }

    #[test]
    fn condition_appends_unit() {
        // ({(¬B ∨ C)}, B) → {(¬B ∨ C), (B)}
        let b = Literal::positive(1);
        let c = Literal::positive(2);
        let f = CnfFormula::new(3, vec![Clause::new([!b, c]).unwrap()]).unwrap();
        let g = f.condition(b);
        assert_eq!(g.num_vars(), 3);
        assert_eq!(g.num_clauses(), 2);
        assert_eq!(g.clauses()[1].literals(), &[b]);

        // (empty formula, x0) → {(x0)}
        let empty = CnfFormula::new(1, vec![]).unwrap();
        let g = empty.condition(Literal::positive(0));
        assert_eq!(g.num_clauses(), 1);
    }

    #[test]
    fn assignment_trail_bookkeeping() {
        let mut asg = Assignment::new(3);
        asg.assign(Literal::positive(0), Reason::Decision);
        asg.assign(Literal::negative(2), Reason::Propagated(4));
        assert_eq!(asg.value(0), Some(true));
        assert_eq!(asg.value(2), Some(false));
        assert_eq!(asg.literal_value(Literal::negative(2)), Some(true));
        assert_eq!(asg.num_assigned(), 2);
        asg.backtrack_to(1);
        assert_eq!(asg.value(2), None);
        assert_eq!(asg.value(0), Some(true));
    }
}
