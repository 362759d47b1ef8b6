//! DIMACS CNF reading and writing.
//!
//! Comment lines (`c ...`) are accepted anywhere and dropped; the writer
//! never emits them. Output uses UTF-8 with LF line endings. Clauses may
//! span lines on input; the writer puts one clause per line.

use super::{Clause, CnfFormula, Literal};
use std::fmt::Write as _;
use thiserror::Error;

/// Errors produced while parsing DIMACS CNF text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    /// No `p cnf <vars> <clauses>` header before clause data or EOF.
    #[error("line {line}: expected `p cnf <vars> <clauses>` header")]
    MissingHeader {
        /// 1-based line number.
        line: usize,
    },
    /// A `p` line that is not a well-formed `p cnf <vars> <clauses>`.
    #[error("line {line}: malformed header `{text}`")]
    MalformedHeader {
        /// 1-based line number.
        line: usize,
        /// The offending line.
        text: String,
    },
    /// A token that is not a signed integer literal.
    #[error("line {line}: invalid token `{token}`")]
    InvalidToken {
        /// 1-based line number.
        line: usize,
        /// The offending token.
        token: String,
    },
    /// A literal whose variable exceeds the declared count.
    #[error("line {line}: literal {literal} exceeds declared variable count {num_vars}")]
    LiteralOutOfRange {
        /// 1-based line number.
        line: usize,
        /// The offending literal as written.
        literal: i64,
        /// Declared variable count.
        num_vars: usize,
    },
    /// Input ended inside a clause, before its terminating 0.
    #[error("line {line}: clause is missing its terminating 0")]
    MissingTerminator {
        /// 1-based line number of the last clause token.
        line: usize,
    },
    /// A clause containing both polarities of some variable.
    #[error("line {line}: tautological clause (variable {variable} occurs with both polarities)")]
    TautologicalClause {
        /// 1-based line number where the clause ended.
        line: usize,
        /// Zero-based variable index.
        variable: usize,
    },
    /// Clause count differs from the header.
    #[error("header declares {declared} clauses but {found} were found")]
    ClauseCountMismatch {
        /// Count from the header.
        declared: usize,
        /// Count actually parsed.
        found: usize,
    },
}

/// Parse DIMACS CNF text into a formula.
///
/// Literal `±k` maps to variable `k − 1` with the written polarity. The
/// clause count must match the header.
pub fn parse_dimacs(input: &str) -> Result<CnfFormula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut last_line = 0usize;

    for (idx, raw) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(ParseError::MalformedHeader {
                    line: line_no,
                    text: raw.to_string(),
                });
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let parsed = match fields.as_slice() {
                ["p", "cnf", vars, count] => vars
                    .parse::<usize>()
                    .ok()
                    .filter(|&v| v > 0)
                    .zip(count.parse::<usize>().ok()),
                _ => None,
            };
            match parsed {
                Some(hdr) => header = Some(hdr),
                None => {
                    return Err(ParseError::MalformedHeader {
                        line: line_no,
                        text: raw.to_string(),
                    })
                }
            }
            continue;
        }
        let (num_vars, _) = header.ok_or(ParseError::MissingHeader { line: line_no })?;
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| ParseError::InvalidToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                let clause = Clause::new(current.drain(..)).map_err(|e| {
                    ParseError::TautologicalClause {
                        line: line_no,
                        variable: e.variable,
                    }
                })?;
                clauses.push(clause);
            } else {
                if value.unsigned_abs() as usize > num_vars {
                    return Err(ParseError::LiteralOutOfRange {
                        line: line_no,
                        literal: value,
                        num_vars,
                    });
                }
                current.push(Literal::from_dimacs(value));
            }
        }
        last_line = line_no;
    }

    let (num_vars, declared) = header.ok_or(ParseError::MissingHeader {
        line: last_line.max(1),
    })?;
    if !current.is_empty() {
        return Err(ParseError::MissingTerminator { line: last_line });
    }
    if clauses.len() != declared {
        return Err(ParseError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    Ok(CnfFormula::new(num_vars, clauses).expect("literals were range-checked during parsing"))
}

/// Serialize a formula as DIMACS CNF text.
///
/// Round-trip: `parse_dimacs(write_dimacs(f))` is structurally equal to `f`.
pub fn write_dimacs(formula: &CnfFormula) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "p cnf {} {}",
        formula.num_vars(),
        formula.num_clauses()
    );
    for clause in formula.clauses() {
        for lit in clause.iter() {
            let _ = write!(out, "{} ", lit.to_dimacs());
        }
        out.push_str("0\n");
    }
    out
}
