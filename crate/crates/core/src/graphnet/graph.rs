//! Bipartite graph encoding of a formula: one node per literal (both
//! polarities of every variable), one node per unresolved clause,
//! clause-literal incidence edges, and the implicit literal-negation
//! pairing (code XOR 1).

use crate::cnf::ResidualView;

/// Graph form of a residual view. Literal node i is literal code i; clause
/// nodes are numbered in view order. Nodes carry no variable identity, so
/// renaming variables only permutes rows.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormulaGraph {
    /// Variable count; literal nodes number 2 * num_vars.
    pub num_vars: usize,
    /// Clause node count.
    pub num_clauses: usize,
    /// One (clause node, literal node) entry per clause-literal occurrence.
    pub edges: Vec<(usize, usize)>,
}

impl FormulaGraph {
    pub fn num_literal_nodes(&self) -> usize {
        2 * self.num_vars
    }

    /// The negation partner of a literal node.
    pub fn negation_of(&self, literal_node: usize) -> usize {
        literal_node ^ 1
    }
}

/// Encode a residual view. Every variable of the underlying formula keeps
/// both literal nodes even when assigned or absent from all clauses; such
/// nodes are isolated apart from their negation pairing.
pub fn build_graph(view: &ResidualView) -> FormulaGraph {
    let mut edges = Vec::new();
    for (clause_node, clause) in view.clauses().iter().enumerate() {
        for lit in &clause.literals {
            edges.push((clause_node, lit.index()));
        }
    }
    FormulaGraph {
        num_vars: view.num_vars(),
        num_clauses: view.clauses().len(),
        edges,
    }
}
