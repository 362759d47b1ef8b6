//! SR(n) instance-pair generation, labeling via the CDCL solver, and the
//! line-oriented dataset file format.
//!
//! An SR(n) pair is built by adding random clauses until the formula first
//! becomes unsatisfiable; negating one literal of the final clause yields a
//! satisfiable twin differing in a single literal occurrence.

use std::fmt;

use rand::Rng;

use crate::cnf::{Clause, CnfFormula, Literal};
use crate::heuristics::jw_os;
use crate::solvers::{cdcl, Verdict};

/// A formula with its sat label and, when satisfiable, per-literal policy
/// labels: policy[l] = 1 iff the formula conditioned on literal code l is
/// satisfiable. Policy is indexed by literal code, length 2 * num_vars.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSample {
    pub formula: CnfFormula,
    pub sat: bool,
    pub policy: Option<Vec<u8>>,
}

/// Clause width sample: 1 + Bernoulli(0.7) + Geometric(0.4), the geometric
/// counting trials up to and including the first success (support >= 1,
/// mean 2.5). Draw order: Bernoulli, then geometric.
fn clause_width<R: Rng + ?Sized>(rng: &mut R) -> usize {
    let bernoulli = usize::from(rng.random_bool(0.7));
    let u: f64 = rng.random();
    let geometric = ((1.0 - u).ln() / (1.0 - 0.4f64).ln()).floor() as usize + 1;
    1 + bernoulli + geometric
}

/// Satisfiability oracle used by generation and labeling: uncapped CDCL
/// under the deterministic JW-OS heuristic.
fn oracle_is_sat(formula: &CnfFormula) -> bool {
    cdcl(formula, &mut jw_os, None).verdict == Verdict::Sat
}

/// Sample an SR(n) pair: clauses are added one at a time, each over
/// distinct variables with signs flipped fair-coin, until the formula turns
/// unsatisfiable. Returns (unsat formula, sat twin); the twin negates the
/// first literal of the final clause.
pub fn gen_sr_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (CnfFormula, CnfFormula) {
    assert!(n >= 2, "SR(n) needs at least 2 variables");
    let mut clauses: Vec<Clause> = Vec::new();
    loop {
        let width = clause_width(rng).min(n);
        // Partial Fisher-Yates: the first `width` entries are a uniform
        // draw of distinct variables.
        let mut vars: Vec<usize> = (0..n).collect();
        for k in 0..width {
            let swap = rng.random_range(k..n);
            vars.swap(k, swap);
        }
        let literals: Vec<Literal> = vars[..width]
            .iter()
            .map(|&v| {
                if rng.random_bool(0.5) {
                    Literal::positive(v)
                } else {
                    Literal::negative(v)
                }
            })
            .collect();
        clauses.push(Clause::new(literals).expect("distinct variables cannot clash"));
        let formula = CnfFormula::new(n, clauses.clone()).expect("variables drawn in range");
        if !oracle_is_sat(&formula) {
            let twin = satisfiable_twin(&formula);
            return (formula, twin);
        }
    }
}

/// The same formula with the first literal of the last clause negated.
fn satisfiable_twin(unsat: &CnfFormula) -> CnfFormula {
    let mut clauses = unsat.clauses().to_vec();
    let last = clauses.last().expect("generation adds at least one clause");
    let mut literals = last.literals().to_vec();
    literals[0] = literals[0].negated();
    *clauses.last_mut().unwrap() = Clause::new(literals).expect("sign flip keeps variables distinct");
    CnfFormula::new(unsat.num_vars(), clauses).expect("same variables")
}

/// Label a formula: sat verdict, and per-literal satisfiability of the
/// conditioned formula when sat.
pub fn label_policy(formula: &CnfFormula) -> LabeledSample {
    if !oracle_is_sat(formula) {
        return LabeledSample {
            formula: formula.clone(),
            sat: false,
            policy: None,
        };
    }
    let policy = (0..2 * formula.num_vars() as u32)
        .map(|code| {
            let conditioned = formula.condition(Literal::from_code(code));
            u8::from(oracle_is_sat(&conditioned))
        })
        .collect();
    LabeledSample {
        formula: formula.clone(),
        sat: true,
        policy: Some(policy),
    }
}

/// Serialize samples, one per line: `n m` then each clause as DIMACS-style
/// signed integers with a 0 terminator, the sat bit, and (when present) the
/// policy bits as a string in literal-code order.
pub fn write_dataset(samples: &[LabeledSample]) -> String {
    let mut out = String::new();
    for sample in samples {
        let f = &sample.formula;
        out.push_str(&format!("{} {}", f.num_vars(), f.num_clauses()));
        for clause in f.clauses() {
            for lit in clause.iter() {
                out.push_str(&format!(" {}", lit.to_dimacs()));
            }
            out.push_str(" 0");
        }
        out.push_str(if sample.sat { " 1" } else { " 0" });
        if let Some(policy) = &sample.policy {
            out.push(' ');
            for &bit in policy {
                out.push(if bit == 1 { '1' } else { '0' });
            }
        }
        out.push('\n');
    }
    out
}

/// Why a dataset line failed to parse.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DatasetErrorKind {
    MissingField(&'static str),
    InvalidNumber(String),
    LiteralOutOfRange(i64),
    BadPolicyLength { expected: usize, got: usize },
    PolicyOnUnsat,
    MissingPolicy,
    TrailingTokens,
}

/// Parse failure with the 1-based line it occurred on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetParseError {
    pub line: usize,
    pub kind: DatasetErrorKind,
}

impl fmt::Display for DatasetParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            DatasetErrorKind::MissingField(what) => write!(f, "missing {what}"),
            DatasetErrorKind::InvalidNumber(tok) => write!(f, "invalid number {tok:?}"),
            DatasetErrorKind::LiteralOutOfRange(l) => write!(f, "literal {l} out of range"),
            DatasetErrorKind::BadPolicyLength { expected, got } => {
                write!(f, "policy has {got} bits, expected {expected}")
            }
            DatasetErrorKind::PolicyOnUnsat => write!(f, "unsat sample carries a policy"),
            DatasetErrorKind::MissingPolicy => write!(f, "sat sample lacks a policy"),
            DatasetErrorKind::TrailingTokens => write!(f, "trailing tokens"),
        }
    }
}

impl std::error::Error for DatasetParseError {}

/// Parse the output of [`write_dataset`]. Sat samples may omit the policy
/// field (labels not yet computed); unsat samples must.
pub fn read_dataset(text: &str) -> Result<Vec<LabeledSample>, DatasetParseError> {
    let mut samples = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(parse_line(line, line_no)?);
    }
    Ok(samples)
}

fn parse_line(line: &str, line_no: usize) -> Result<LabeledSample, DatasetParseError> {
    let fail = |kind| DatasetParseError { line: line_no, kind };
    let mut tokens = line.split_ascii_whitespace();
    let next_int = |what: &'static str, tokens: &mut dyn Iterator<Item = &str>| {
        let tok = tokens.next().ok_or_else(|| fail(DatasetErrorKind::MissingField(what)))?;
        tok.parse::<i64>()
            .map_err(|_| fail(DatasetErrorKind::InvalidNumber(tok.to_string())))
    };

    let num_vars = next_int("variable count", &mut tokens)?;
    let num_clauses = next_int("clause count", &mut tokens)?;
    if num_vars <= 0 || num_clauses < 0 {
        return Err(fail(DatasetErrorKind::InvalidNumber(format!(
            "{num_vars} {num_clauses}"
        ))));
    }
    let num_vars = num_vars as usize;

    let mut clauses = Vec::with_capacity(num_clauses as usize);
    for _ in 0..num_clauses {
        let mut literals = Vec::new();
        loop {
            let value = next_int("clause literal", &mut tokens)?;
            if value == 0 {
                break;
            }
            if value.unsigned_abs() as usize > num_vars {
                return Err(fail(DatasetErrorKind::LiteralOutOfRange(value)));
            }
            literals.push(Literal::from_dimacs(value));
        }
        clauses.push(
            Clause::new(literals)
                .map_err(|e| fail(DatasetErrorKind::InvalidNumber(format!("tautology on variable {}", e.variable))))?,
        );
    }
    let formula = CnfFormula::new(num_vars, clauses)
        .map_err(|e| fail(DatasetErrorKind::LiteralOutOfRange(e.variable as i64)))?;

    let sat = match next_int("sat bit", &mut tokens)? {
        0 => false,
        1 => true,
        other => return Err(fail(DatasetErrorKind::InvalidNumber(other.to_string()))),
    };

    let policy = match tokens.next() {
        None => None,
        Some(bits) => {
            if !sat {
                return Err(fail(DatasetErrorKind::PolicyOnUnsat));
            }
            if bits.len() != 2 * num_vars || bits.bytes().any(|b| b != b'0' && b != b'1') {
                return Err(fail(DatasetErrorKind::BadPolicyLength {
                    expected: 2 * num_vars,
                    got: bits.len(),
                }));
            }
            Some(bits.bytes().map(|b| b - b'0').collect())
        }
    };
    if tokens.next().is_some() {
        return Err(fail(DatasetErrorKind::TrailingTokens));
    }
    Ok(LabeledSample { formula, sat, policy })
}

/// Index batches balanced to exactly half sat, half unsat: shuffled sat and
/// unsat pools are zipped into pairs and cut into batches of
/// `batch_size / 2` pairs. Trailing samples that cannot fill a balanced
/// batch are dropped. `batch_size` must be even and positive.
pub fn balanced_batches<R: Rng + ?Sized>(
    samples: &[LabeledSample],
    batch_size: usize,
    rng: &mut R,
) -> Vec<Vec<usize>> {
    assert!(batch_size >= 2 && batch_size % 2 == 0, "balanced batches need an even size");
    let mut sat_pool: Vec<usize> = Vec::new();
    let mut unsat_pool: Vec<usize> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        if s.sat {
            sat_pool.push(i);
        } else {
            unsat_pool.push(i);
        }
    }
    shuffle(&mut sat_pool, rng);
    shuffle(&mut unsat_pool, rng);
    let pairs = sat_pool.len().min(unsat_pool.len());
    let per_batch = batch_size / 2;
    let mut batches = Vec::new();
    let mut start = 0;
    while start + per_batch <= pairs {
        let mut batch = Vec::with_capacity(batch_size);
        for k in start..start + per_batch {
            batch.push(unsat_pool[k]);
            batch.push(sat_pool[k]);
        }
        batches.push(batch);
        start += per_batch;
    }
    batches
}

fn shuffle<R: Rng + ?Sized>(items: &mut [usize], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}
