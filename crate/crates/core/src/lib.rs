//! A SAT-solving toolkit where DPLL and CDCL search is steered by pluggable
//! branching heuristics: the classical JW-OS and DLIS rules, a uniform-random
//! baseline, and a message-passing graph network with a gated attention
//! aggregator that is trained to predict satisfiability and per-literal
//! branching quality.
//!
//! The crate is organized around the search pipeline:
//!
//! - [`cnf`] — formulas, DIMACS I/O, assignments, and unit propagation
//! - [`solvers`] — DPLL and CDCL parameterized by a heuristic, plus a
//!   brute-force oracle for testing
//! - [`heuristics`] — implementations of the `choose-literal` contract
//! - [`graphnet`] — the literal/clause graph encoding, message passing,
//!   training, and checkpoints
//! - [`dataset`] — random instance-pair generation and labeling

pub mod cnf;
pub mod dataset;
pub mod graphnet;
pub mod heuristics;
pub mod solvers;

pub use cnf::{Assignment, Clause, CnfFormula, Literal, ResidualView};
pub use solvers::{BranchingHeuristic, SolveResult, Verdict};
