//! A small DPLL SAT solver: two watched literals, unit propagation, and
//! conflict-directed chronological backtracking. No clause learning — the
//! instances this crate produces are desk-scale, and DIMACS export covers
//! anything bigger.

use super::Cnf;

/// Resource limits for the search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverLimits {
    /// Maximum number of branching decisions before giving up. Propagation
    /// is not counted, so limit 0 still decides purely unit instances.
    pub max_decisions: u64,
}

impl Default for SolverLimits {
    fn default() -> Self {
        // Roughly a second of search on desk-scale instances.
        SolverLimits {
            max_decisions: 5_000_000,
        }
    }
}

/// Outcome of a SAT call. `Unknown` means the decision cap was hit — it is
/// never conflated with UNSAT.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SatOutcome {
    /// A satisfying assignment, indexed by `variable − 1`.
    Sat(Vec<bool>),
    Unsat,
    Unknown,
}

struct Search {
    /// 0 unassigned, 1 true, -1 false; index = variable.
    assign: Vec<i8>,
    trail: Vec<i32>,
    /// Trail index of each decision plus whether it was already flipped.
    decisions: Vec<(usize, bool)>,
    /// Watch lists indexed by encoded literal.
    watches: Vec<Vec<usize>>,
    /// Clauses under watch (every clause here has ≥ 2 literals).
    clauses: Vec<Vec<i32>>,
    prop_head: usize,
}

fn widx(lit: i32) -> usize {
    ((lit.unsigned_abs() as usize) << 1) | usize::from(lit < 0)
}

impl Search {
    fn value(&self, lit: i32) -> i8 {
        let v = self.assign[lit.unsigned_abs() as usize];
        if lit < 0 {
            -v
        } else {
            v
        }
    }

    fn assign_true(&mut self, lit: i32) {
        debug_assert_eq!(self.value(lit), 0);
        self.assign[lit.unsigned_abs() as usize] = if lit > 0 { 1 } else { -1 };
        self.trail.push(lit);
    }

    /// Propagates everything queued on the trail; returns false on conflict.
    fn propagate(&mut self) -> bool {
        while self.prop_head < self.trail.len() {
            let lit = self.trail[self.prop_head];
            self.prop_head += 1;
            let falsified = -lit;
            let mut i = 0;
            while i < self.watches[widx(falsified)].len() {
                let ci = self.watches[widx(falsified)][i];
                // Keep the falsified literal in slot 1.
                if self.clauses[ci][0] == falsified {
                    self.clauses[ci].swap(0, 1);
                }
                let other = self.clauses[ci][0];
                if self.value(other) == 1 {
                    i += 1;
                    continue;
                }
                // Look for a replacement watch.
                let mut moved = false;
                for k in 2..self.clauses[ci].len() {
                    if self.value(self.clauses[ci][k]) != -1 {
                        let new_watch = self.clauses[ci][k];
                        self.clauses[ci].swap(1, k);
                        self.watches[widx(falsified)].swap_remove(i);
                        self.watches[widx(new_watch)].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                match self.value(other) {
                    0 => {
                        self.assign_true(other);
                        i += 1;
                    }
                    -1 => return false,
                    _ => unreachable!(),
                }
            }
        }
        true
    }

    /// Undoes to the deepest unflipped decision and flips it; returns
    /// false when no decision is left to flip.
    fn backtrack(&mut self) -> bool {
        while let Some((idx, flipped)) = self.decisions.pop() {
            let decided = self.trail[idx];
            for &l in &self.trail[idx..] {
                self.assign[l.unsigned_abs() as usize] = 0;
            }
            self.trail.truncate(idx);
            self.prop_head = idx;
            if !flipped {
                self.decisions.push((idx, true));
                self.assign_true(-decided);
                return true;
            }
        }
        false
    }
}

/// Decides a CNF instance. A `Sat` model is verified against every clause
/// before being returned.
pub fn sat(c: &Cnf, limits: &SolverLimits) -> SatOutcome {
    let n = c.num_vars as usize;
    let mut s = Search {
        assign: vec![0; n + 1],
        trail: Vec::new(),
        decisions: Vec::new(),
        watches: vec![Vec::new(); 2 * (n + 1)],
        clauses: Vec::new(),
        prop_head: 0,
    };

    // Load clauses: drop duplicate literals and tautologies, assert units
    // at the root level, watch the rest.
    for clause in &c.clauses {
        let mut lits = clause.clone();
        // Sort by variable so duplicate and complementary literals sit
        // side by side.
        lits.sort_unstable_by_key(|l| (l.unsigned_abs(), *l < 0));
        lits.dedup();
        if lits.is_empty() {
            return SatOutcome::Unsat;
        }
        if lits.windows(2).any(|w| w[0] == -w[1]) {
            continue; // tautology
        }
        if lits.len() == 1 {
            match s.value(lits[0]) {
                1 => {}
                0 => s.assign_true(lits[0]),
                _ => return SatOutcome::Unsat,
            }
            continue;
        }
        let ci = s.clauses.len();
        s.watches[widx(lits[0])].push(ci);
        s.watches[widx(lits[1])].push(ci);
        s.clauses.push(lits);
    }

    let mut used_decisions = 0u64;
    loop {
        if !s.propagate() {
            if !s.backtrack() {
                return SatOutcome::Unsat;
            }
            continue;
        }
        match (1..=n).find(|&v| s.assign[v] == 0) {
            None => break,
            Some(v) => {
                if used_decisions >= limits.max_decisions {
                    return SatOutcome::Unknown;
                }
                used_decisions += 1;
                s.decisions.push((s.trail.len(), false));
                s.assign_true(v as i32);
            }
        }
    }

    let model: Vec<bool> = (1..=n).map(|v| s.assign[v] == 1).collect();
    for clause in &c.clauses {
        assert!(
            clause
                .iter()
                .any(|&l| model[(l.unsigned_abs() - 1) as usize] == (l > 0)),
            "internal error: model fails clause {clause:?}"
        );
    }
    SatOutcome::Sat(model)
}
