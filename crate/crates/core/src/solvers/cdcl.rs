//! Conflict-driven clause learning with two-watched-literal propagation,
//! first-UIP conflict analysis, and non-chronological backjumping.
//!
//! No restarts and no clause deletion: both would perturb decision counts,
//! which are the quantity under study.

use crate::cnf::{Clause, CnfFormula, Literal, ResidualView, ViewClause};

use super::{BranchingHeuristic, SolveResult};

/// CDCL search. Decisions are heuristic invocations, exactly as in
/// [`super::dpll`]; propagated and asserted literals are free. The heuristic
/// sees the residual view of the full clause database, learned clauses
/// included.
pub fn cdcl<H>(formula: &CnfFormula, heuristic: &mut H, cap: Option<u64>) -> SolveResult
where
    H: BranchingHeuristic + ?Sized,
{
    cdcl_with_learned(formula, heuristic, cap).0
}

/// [`cdcl`], additionally returning every clause learned during the run.
/// Each learned clause is a logical consequence of the input formula.
pub fn cdcl_with_learned<H>(
    formula: &CnfFormula,
    heuristic: &mut H,
    cap: Option<u64>,
) -> (SolveResult, Vec<Clause>)
where
    H: BranchingHeuristic + ?Sized,
{
    let mut engine = Engine::new(formula);
    let result = engine.solve(heuristic, cap);
    let learned = engine.learned_clauses();
    (result, learned)
}

/// Clause index into the engine's database (originals first, then learned).
type ClauseId = usize;

struct Engine {
    num_vars: usize,
    num_original: usize,
    clauses: Vec<Vec<Literal>>,
    /// watches[code] lists clauses currently watching that literal; watched
    /// literals sit at positions 0 and 1 of their clause.
    watches: Vec<Vec<ClauseId>>,
    values: Vec<Option<bool>>,
    levels: Vec<u32>,
    reasons: Vec<Option<ClauseId>>,
    trail: Vec<Literal>,
    /// trail_lim[d] is the trail length when decision level d + 1 began.
    trail_lim: Vec<usize>,
    head: usize,
    /// Set when clause setup already refutes the formula (empty clause or
    /// contradictory units).
    root_conflict: bool,
}

impl Engine {
    fn new(formula: &CnfFormula) -> Self {
        let num_vars = formula.num_vars();
        let mut engine = Engine {
            num_vars,
            num_original: formula.num_clauses(),
            clauses: Vec::with_capacity(formula.num_clauses()),
            watches: vec![Vec::new(); 2 * num_vars],
            values: vec![None; num_vars],
            levels: vec![0; num_vars],
            reasons: vec![None; num_vars],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            head: 0,
            root_conflict: false,
        };
        for clause in formula.clauses() {
            let id = engine.clauses.len();
            engine.clauses.push(clause.literals().to_vec());
            match clause.literals() {
                [] => engine.root_conflict = true,
                [unit] => match engine.value_of(*unit) {
                    Some(false) => engine.root_conflict = true,
                    Some(true) => {}
                    None => engine.enqueue(*unit, Some(id)),
                },
                [first, second, ..] => {
                    engine.watches[first.index()].push(id);
                    engine.watches[second.index()].push(id);
                }
            }
        }
        engine
    }

    fn solve<H>(&mut self, heuristic: &mut H, cap: Option<u64>) -> SolveResult
    where
        H: BranchingHeuristic + ?Sized,
    {
        let mut decisions: u64 = 0;
        if self.root_conflict {
            return SolveResult::unsat(decisions);
        }
        loop {
            match self.propagate() {
                Some(conflict) => {
                    if self.level() == 0 {
                        return SolveResult::unsat(decisions);
                    }
                    let (learned, backjump) = self.analyze(conflict);
                    self.backtrack_to(backjump);
                    self.attach_learned(learned);
                }
                None => {
                    if self.original_clauses_satisfied() {
                        return SolveResult::sat(decisions, self.witness());
                    }
                    if let Some(cap) = cap {
                        if decisions >= cap {
                            return SolveResult::step_limit(decisions);
                        }
                    }
                    let lit = heuristic.choose(&self.residual_view());
                    debug_assert_eq!(self.value_of(lit), None);
                    decisions += 1;
                    self.trail_lim.push(self.trail.len());
                    self.enqueue(lit, None);
                }
            }
        }
    }

    fn level(&self) -> u32 {
        self.trail_lim.len() as u32
    }

    fn value_of(&self, lit: Literal) -> Option<bool> {
        self.values[lit.variable()].map(|v| v == lit.is_positive())
    }

    fn enqueue(&mut self, lit: Literal, reason: Option<ClauseId>) {
        let var = lit.variable();
        debug_assert_eq!(self.values[var], None);
        self.values[var] = Some(lit.is_positive());
        self.levels[var] = self.level();
        self.reasons[var] = reason;
        self.trail.push(lit);
    }

    /// Propagate to fixpoint; returns the conflicting clause if one arises.
    fn propagate(&mut self) -> Option<ClauseId> {
        while self.head < self.trail.len() {
            let assigned = self.trail[self.head];
            self.head += 1;
            let falsified = assigned.negated();
            // The watch list is detached while clauses migrate to new
            // watches; replacement watches can never be `falsified` itself,
            // so pushes elsewhere cannot touch the detached slot.
            let mut watchers = std::mem::take(&mut self.watches[falsified.index()]);
            let mut i = 0;
            while i < watchers.len() {
                let id = watchers[i];
                if self.clauses[id][0] == falsified {
                    self.clauses[id].swap(0, 1);
                }
                debug_assert_eq!(self.clauses[id][1], falsified);
                let other = self.clauses[id][0];
                if self.value_of(other) == Some(true) {
                    i += 1;
                    continue;
                }
                let replacement = (2..self.clauses[id].len())
                    .find(|&k| self.value_of(self.clauses[id][k]) != Some(false));
                if let Some(k) = replacement {
                    self.clauses[id].swap(1, k);
                    let new_watch = self.clauses[id][1];
                    self.watches[new_watch.index()].push(id);
                    watchers.swap_remove(i);
                } else if self.value_of(other) == Some(false) {
                    self.watches[falsified.index()] = watchers;
                    return Some(id);
                } else {
                    self.enqueue(other, Some(id));
                    i += 1;
                }
            }
            self.watches[falsified.index()] = watchers;
        }
        None
    }

    /// First-UIP conflict analysis. Returns the learned clause (asserting
    /// literal first) and the backjump level: the second-highest decision
    /// level in the clause, or zero for a unit.
    fn analyze(&mut self, conflict: ClauseId) -> (Vec<Literal>, u32) {
        let current = self.level();
        let mut seen = vec![false; self.num_vars];
        let mut pending = 0usize;
        let mut learned_tail: Vec<Literal> = Vec::new();
        let mut clause_id = conflict;
        let mut resolved: Option<Literal> = None;
        let mut index = self.trail.len();

        let uip = loop {
            let skip = usize::from(resolved.is_some());
            for k in skip..self.clauses[clause_id].len() {
                let q = self.clauses[clause_id][k];
                let var = q.variable();
                if !seen[var] && self.levels[var] > 0 {
                    seen[var] = true;
                    if self.levels[var] == current {
                        pending += 1;
                    } else {
                        learned_tail.push(q);
                    }
                }
            }
            // Next resolution candidate: most recent trail literal still
            // marked. All marked current-level literals lie above the last
            // decision, so the scan stays within this level.
            loop {
                index -= 1;
                if seen[self.trail[index].variable()] {
                    break;
                }
            }
            let p = self.trail[index];
            seen[p.variable()] = false;
            pending -= 1;
            if pending == 0 {
                break p;
            }
            clause_id = self.reasons[p.variable()]
                .expect("non-UIP current-level literal must be propagated");
            resolved = Some(p);
        };

        let mut learned = Vec::with_capacity(1 + learned_tail.len());
        learned.push(uip.negated());
        learned.extend(learned_tail);
        let backjump = learned[1..]
            .iter()
            .map(|l| self.levels[l.variable()])
            .max()
            .unwrap_or(0);
        (learned, backjump)
    }

    fn backtrack_to(&mut self, level: u32) {
        let keep = self.trail_lim[level as usize];
        for lit in self.trail.drain(keep..) {
            let var = lit.variable();
            self.values[var] = None;
            self.reasons[var] = None;
        }
        self.trail_lim.truncate(level as usize);
        self.head = self.trail.len();
    }

    /// Add a learned clause and assert its first literal. Position 1 holds a
    /// literal from the backjump level so the watch invariant holds.
    fn attach_learned(&mut self, mut learned: Vec<Literal>) {
        let id = self.clauses.len();
        let asserting = learned[0];
        if learned.len() >= 2 {
            let deepest = (1..learned.len())
                .max_by_key(|&k| self.levels[learned[k].variable()])
                .expect("nonempty tail");
            learned.swap(1, deepest);
            self.watches[learned[0].index()].push(id);
            self.watches[learned[1].index()].push(id);
        }
        self.clauses.push(learned);
        self.enqueue(asserting, Some(id));
    }

    /// Sat condition: every original clause has a true literal. Learned
    /// clauses are implied, so they are satisfied by any such assignment's
    /// completion and need not be checked.
    fn original_clauses_satisfied(&self) -> bool {
        self.clauses[..self.num_original]
            .iter()
            .all(|c| c.iter().any(|&l| self.value_of(l) == Some(true)))
    }

    fn witness(&self) -> Vec<bool> {
        self.values.iter().map(|v| v.unwrap_or(false)).collect()
    }

    /// Residual view of the full database (originals and learned) under the
    /// current assignment. At propagation fixpoint every unresolved clause
    /// has at least two free literals.
    fn residual_view(&self) -> ResidualView {
        let mut view = Vec::new();
        for (id, clause) in self.clauses.iter().enumerate() {
            if clause.iter().any(|&l| self.value_of(l) == Some(true)) {
                continue;
            }
            let free: Vec<Literal> = clause
                .iter()
                .copied()
                .filter(|&l| self.value_of(l).is_none())
                .collect();
            debug_assert!(free.len() >= 2);
            view.push(ViewClause { id, literals: free });
        }
        ResidualView::from_parts(self.num_vars, view)
    }

    /// Clauses learned so far, in learning order.
    fn learned_clauses(&self) -> Vec<Clause> {
        self.clauses[self.num_original..]
            .iter()
            .map(|lits| {
                Clause::new(lits.iter().copied())
                    .expect("first-UIP resolvents mention each variable once")
            })
            .collect()
    }
}
