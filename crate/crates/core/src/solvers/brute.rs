//! Exhaustive-enumeration oracle for small formulas.

use crate::cnf::CnfFormula;

/// Verdict of [`brute_force`]: the lexicographically smallest model, or
/// proof by exhaustion that none exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BruteForceOutcome {
    /// Satisfiable; carries the smallest model under the order false < true
    /// with variable 0 most significant.
    Sat(Vec<bool>),
    /// All assignments falsify some clause.
    Unsat,
}

/// Formula too large to enumerate.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("brute force supports at most 26 variables, formula has {num_vars}")]
pub struct BruteForceError {
    /// Variable count of the rejected formula.
    pub num_vars: usize,
}

/// Try all `2^n` assignments in lexicographic order (variable 0 is the most
/// significant position) and return the first model found.
pub fn brute_force(formula: &CnfFormula) -> Result<BruteForceOutcome, BruteForceError> {
    let n = formula.num_vars();
    if n > 26 {
        return Err(BruteForceError { num_vars: n });
    }
    let mut values = vec![false; n];
    for mask in 0u64..1 << n {
        for (v, value) in values.iter_mut().enumerate() {
            *value = mask >> (n - 1 - v) & 1 == 1;
        }
        if formula.satisfied_by(&values) {
            return Ok(BruteForceOutcome::Sat(values));
        }
    }
    Ok(BruteForceOutcome::Unsat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::{Clause, Literal};

    fn formula(num_vars: usize, clauses: &[&[Literal]]) -> CnfFormula {
        let clauses = clauses
            .iter()
            .map(|lits| Clause::new(lits.iter().copied()).unwrap())
            .collect();
        CnfFormula::new(num_vars, clauses).unwrap()
    }

    #[test]
    fn single_positive_unit() {
        let a = Literal::positive(0);
        let f = formula(1, &[&[a]]);
        assert_eq!(brute_force(&f).unwrap(), BruteForceOutcome::Sat(vec![true]));
    }

    #[test]
    fn contradictory_units() {
        let a = Literal::positive(0);
        let f = formula(1, &[&[a], &[!a]]);
        assert_eq!(brute_force(&f).unwrap(), BruteForceOutcome::Unsat);
    }

    #[test]
    fn all_sign_patterns_over_two_vars() {
        let (a, b) = (Literal::positive(0), Literal::positive(1));
        let f = formula(2, &[&[a, b], &[!a, b], &[a, !b], &[!a, !b]]);
        assert_eq!(brute_force(&f).unwrap(), BruteForceOutcome::Unsat);
    }

    #[test]
    fn witness_is_lexicographically_smallest() {
        // Models of (x0 or x1) in order: 01, 10, 11; smallest is x0=false,
        // x1=true.
        let (a, b) = (Literal::positive(0), Literal::positive(1));
        let f = formula(2, &[&[a, b]]);
        assert_eq!(
            brute_force(&f).unwrap(),
            BruteForceOutcome::Sat(vec![false, true])
        );
    }

    #[test]
    fn empty_formula_yields_all_false() {
        let f = formula(3, &[]);
        assert_eq!(
            brute_force(&f).unwrap(),
            BruteForceOutcome::Sat(vec![false, false, false])
        );
    }

    #[test]
    fn rejects_formulas_beyond_26_variables() {
        let f = formula(27, &[&[Literal::positive(26)]]);
        assert_eq!(brute_force(&f), Err(BruteForceError { num_vars: 27 }));
    }
}
