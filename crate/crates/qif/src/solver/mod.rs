//! Weakest preconditions for loop-free programs and a self-contained SAT
//! layer.
//!
//! The pipeline is: symbolically execute a loop-free program into
//! single-assignment form (every variable bit becomes a formula over the
//! high input bits), substitute the final store into a postcondition to
//! get its weakest precondition, translate to CNF with a structure-sharing
//! Tseitin encoding, and decide with a small DPLL solver. DIMACS export is
//! the escape hatch to industrial solvers.
//!
//! All formulas produced here are hash-consed through a [`FormulaBuilder`],
//! so shared subterms are represented once; `dag_size` measures that
//! representation, which is what the polynomial-size guarantee is about.

mod cnf;
mod dpll;

pub use cnf::{export_dimacs, parse_model_line, tseitin, Cnf};
pub use dpll::{sat, SatOutcome, SolverLimits};

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use thiserror::Error;

use crate::lang::{Formula, Pos, Program, Stmt, StmtKind, VarKind};

/// Why weakest-precondition generation failed.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WpError {
    #[error("loop at {pos}: weakest preconditions are only defined for loop-free programs")]
    LoopNotSupported { pos: Pos },
    #[error("formula references undeclared bit {name}[{bit}]")]
    UnknownVariable { name: String, bit: u32 },
}

/// Hash-consing factory for core formulas. Every node is created through
/// the builder, which reuses structurally identical nodes and applies
/// constant folding, double-negation elimination, and absorption of
/// `x ∧ x` / `x ∧ ¬x`. Pointer equality on builder output therefore
/// implies semantic equality (the converse does not hold).
pub struct FormulaBuilder {
    true_node: Arc<Formula>,
    false_node: Arc<Formula>,
    vars: HashMap<(String, u32), Arc<Formula>>,
    nots: HashMap<usize, Arc<Formula>>,
    ands: HashMap<(usize, usize), Arc<Formula>>,
}

fn ptr(f: &Arc<Formula>) -> usize {
    Arc::as_ptr(f) as usize
}

impl FormulaBuilder {
    pub fn new() -> Self {
        let true_node = Formula::t();
        let false_node = Formula::not(true_node.clone());
        FormulaBuilder {
            true_node,
            false_node,
            vars: HashMap::new(),
            nots: HashMap::new(),
            ands: HashMap::new(),
        }
    }

    pub fn t(&self) -> Arc<Formula> {
        self.true_node.clone()
    }

    /// Core-language false: `!true`.
    pub fn f(&self) -> Arc<Formula> {
        self.false_node.clone()
    }

    pub fn var(&mut self, name: &str, bit: u32) -> Arc<Formula> {
        self.vars
            .entry((name.to_string(), bit))
            .or_insert_with(|| Formula::var(name, bit))
            .clone()
    }

    pub fn not(&mut self, a: Arc<Formula>) -> Arc<Formula> {
        if Arc::ptr_eq(&a, &self.true_node) {
            return self.f();
        }
        if Arc::ptr_eq(&a, &self.false_node) {
            return self.t();
        }
        if let Formula::Not(inner) = &*a {
            return inner.clone();
        }
        self.nots
            .entry(ptr(&a))
            .or_insert_with(|| Formula::not(a))
            .clone()
    }

    pub fn and(&mut self, a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        if Arc::ptr_eq(&a, &self.true_node) {
            return b;
        }
        if Arc::ptr_eq(&b, &self.true_node) {
            return a;
        }
        if Arc::ptr_eq(&a, &self.false_node) || Arc::ptr_eq(&b, &self.false_node) {
            return self.f();
        }
        if Arc::ptr_eq(&a, &b) {
            return a;
        }
        let complement = match (&*a, &*b) {
            (Formula::Not(x), _) if Arc::ptr_eq(x, &b) => true,
            (_, Formula::Not(y)) if Arc::ptr_eq(y, &a) => true,
            _ => false,
        };
        if complement {
            return self.f();
        }
        // Conjunction is commutative; a canonical operand order doubles the
        // cache hit rate.
        let key = if ptr(&a) <= ptr(&b) {
            (ptr(&a), ptr(&b))
        } else {
            (ptr(&b), ptr(&a))
        };
        self.ands
            .entry(key)
            .or_insert_with(|| Formula::and(a, b))
            .clone()
    }

    pub fn or(&mut self, a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        let na = self.not(a);
        let nb = self.not(b);
        let both = self.and(na, nb);
        self.not(both)
    }

    pub fn xor(&mut self, a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        let nb = self.not(b.clone());
        let na = self.not(a.clone());
        let left = self.and(a, nb);
        let right = self.and(na, b);
        self.or(left, right)
    }

    pub fn eq(&mut self, a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        let x = self.xor(a, b);
        self.not(x)
    }

    /// `if c then a else b`, bit-level: `(c ∧ a) ∨ (¬c ∧ b)`.
    pub fn ite(&mut self, c: Arc<Formula>, a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        let nc = self.not(c.clone());
        let left = self.and(c, a);
        let right = self.and(nc, b);
        self.or(left, right)
    }
}

impl Default for FormulaBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Number of distinct nodes in a formula DAG (shared subterms count once).
pub fn dag_size(f: &Arc<Formula>) -> usize {
    fn walk(f: &Arc<Formula>, seen: &mut std::collections::HashSet<usize>) {
        if !seen.insert(ptr(f)) {
            return;
        }
        match &**f {
            Formula::True | Formula::False | Formula::Var { .. } => {}
            Formula::Not(a) => walk(a, seen),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Xor(a, b)
            | Formula::Eq(a, b) => {
                walk(a, seen);
                walk(b, seen);
            }
        }
    }
    let mut seen = std::collections::HashSet::new();
    walk(f, &mut seen);
    seen.len()
}

/// The symbolic store: one formula per declared bit, flat-indexed.
struct SymEnv {
    index: HashMap<String, (usize, u32)>,
    slots: Vec<Arc<Formula>>,
}

impl SymEnv {
    fn new(p: &Program, b: &mut FormulaBuilder) -> SymEnv {
        let mut index = HashMap::new();
        let mut slots = Vec::new();
        for d in &p.decls {
            index.insert(d.name.clone(), (slots.len(), d.width));
            for bit in 0..d.width {
                slots.push(match d.kind {
                    VarKind::High => b.var(&d.name, bit),
                    // out and local bits start false.
                    VarKind::Out | VarKind::Local => b.f(),
                });
            }
        }
        SymEnv { index, slots }
    }

    fn slot(&self, name: &str, bit: u32) -> Result<usize, WpError> {
        match self.index.get(name) {
            Some(&(base, width)) if bit < width => Ok(base + bit as usize),
            _ => Err(WpError::UnknownVariable {
                name: name.to_string(),
                bit,
            }),
        }
    }

    fn get(&self, name: &str, bit: u32) -> Result<Arc<Formula>, WpError> {
        Ok(self.slots[self.slot(name, bit)?].clone())
    }
}

/// Evaluates a (possibly sugared) formula under a symbolic store,
/// producing a core formula over the high input bits.
fn sym_eval(
    f: &Arc<Formula>,
    env: &SymEnv,
    b: &mut FormulaBuilder,
    memo: &mut HashMap<usize, Arc<Formula>>,
) -> Result<Arc<Formula>, WpError> {
    if let Some(hit) = memo.get(&ptr(f)) {
        return Ok(hit.clone());
    }
    let result = match &**f {
        Formula::True => b.t(),
        Formula::False => b.f(),
        Formula::Var { name, bit } => env.get(name, *bit)?,
        Formula::Not(a) => {
            let a = sym_eval(a, env, b, memo)?;
            b.not(a)
        }
        Formula::And(x, y) => {
            let x = sym_eval(x, env, b, memo)?;
            let y = sym_eval(y, env, b, memo)?;
            b.and(x, y)
        }
        Formula::Or(x, y) => {
            let x = sym_eval(x, env, b, memo)?;
            let y = sym_eval(y, env, b, memo)?;
            b.or(x, y)
        }
        Formula::Xor(x, y) => {
            let x = sym_eval(x, env, b, memo)?;
            let y = sym_eval(y, env, b, memo)?;
            b.xor(x, y)
        }
        Formula::Eq(x, y) => {
            let x = sym_eval(x, env, b, memo)?;
            let y = sym_eval(y, env, b, memo)?;
            b.eq(x, y)
        }
    };
    memo.insert(ptr(f), result.clone());
    Ok(result)
}

fn exec_stmt(s: &Stmt, env: &mut SymEnv, b: &mut FormulaBuilder) -> Result<(), WpError> {
    match &s.kind {
        StmtKind::Skip | StmtKind::Observe => Ok(()),
        StmtKind::Assign { var, bit, value } => {
            let mut memo = HashMap::new();
            let v = sym_eval(value, env, b, &mut memo)?;
            let slot = env.slot(var, *bit)?;
            env.slots[slot] = v;
            Ok(())
        }
        StmtKind::Seq(first, second) => {
            exec_stmt(first, env, b)?;
            exec_stmt(second, env, b)
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            let mut memo = HashMap::new();
            let c = sym_eval(cond, env, b, &mut memo)?;
            // Constant guards select one branch outright; this keeps the
            // single-assignment form tight and mirrors what the concrete
            // interpreter would do.
            if Arc::ptr_eq(&c, &b.t()) {
                return exec_stmt(then_branch, env, b);
            }
            if Arc::ptr_eq(&c, &b.f()) {
                return exec_stmt(else_branch, env, b);
            }
            let mut then_env = SymEnv {
                index: env.index.clone(),
                slots: env.slots.clone(),
            };
            exec_stmt(then_branch, &mut then_env, b)?;
            exec_stmt(else_branch, env, b)?;
            for i in 0..env.slots.len() {
                if !Arc::ptr_eq(&then_env.slots[i], &env.slots[i]) {
                    env.slots[i] =
                        b.ite(c.clone(), then_env.slots[i].clone(), env.slots[i].clone());
                }
            }
            Ok(())
        }
        StmtKind::While { .. } => Err(WpError::LoopNotSupported { pos: s.pos }),
    }
}

/// A loop-free program in single-assignment form: every out bit bound to a
/// core formula over the high input bits, plus the distinct intermediate
/// definitions in dependency order.
pub struct PassiveProgram {
    /// `(variable, bit)` → defining formula, for every out bit.
    pub outputs: BTreeMap<(String, u32), Arc<Formula>>,
    /// Every distinct node reachable from the outputs, children first;
    /// its length is the size of the single-assignment form.
    pub defs: Vec<Arc<Formula>>,
}

/// Converts a loop-free program to single-assignment form.
pub fn passify(p: &Program) -> Result<PassiveProgram, WpError> {
    let mut b = FormulaBuilder::new();
    let mut env = SymEnv::new(p, &mut b);
    exec_stmt(&p.body, &mut env, &mut b)?;

    let mut outputs = BTreeMap::new();
    for d in p.decls.iter().filter(|d| d.kind == VarKind::Out) {
        for bit in 0..d.width {
            outputs.insert((d.name.clone(), bit), env.get(&d.name, bit)?);
        }
    }

    let mut defs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    fn topo(
        f: &Arc<Formula>,
        seen: &mut std::collections::HashSet<usize>,
        defs: &mut Vec<Arc<Formula>>,
    ) {
        if !seen.insert(ptr(f)) {
            return;
        }
        match &**f {
            Formula::True | Formula::False | Formula::Var { .. } => {}
            Formula::Not(a) => topo(a, seen, defs),
            Formula::And(a, b)
            | Formula::Or(a, b)
            | Formula::Xor(a, b)
            | Formula::Eq(a, b) => {
                topo(a, seen, defs);
                topo(b, seen, defs);
            }
        }
        defs.push(f.clone());
    }
    for f in outputs.values() {
        topo(f, &mut seen, &mut defs);
    }
    Ok(PassiveProgram { outputs, defs })
}

/// Weakest precondition of a loop-free program with respect to a
/// postcondition over its variables: a core formula over the high input
/// bits that holds for exactly the inputs whose final store satisfies the
/// postcondition.
pub fn wp(p: &Program, post: &Arc<Formula>) -> Result<Arc<Formula>, WpError> {
    let mut b = FormulaBuilder::new();
    let mut env = SymEnv::new(p, &mut b);
    exec_stmt(&p.body, &mut env, &mut b)?;
    let mut memo = HashMap::new();
    sym_eval(post, &env, &mut b, &mut memo)
}

/// Validity outcome for [`valid`]; `Invalid` carries the named-bit
/// counter-model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValidityOutcome {
    Valid,
    Invalid(BTreeMap<(String, u32), bool>),
    Unknown,
}

/// Decides validity of a formula by refuting its negation: valid iff
/// `¬f` is unsatisfiable. An `Invalid` result carries a falsifying
/// assignment of the formula's named bits.
pub fn valid(f: &Arc<Formula>, limits: &SolverLimits) -> ValidityOutcome {
    let negated = Formula::not(f.clone());
    let c = tseitin(&negated);
    match sat(&c, limits) {
        SatOutcome::Unsat => ValidityOutcome::Valid,
        SatOutcome::Sat(model) => ValidityOutcome::Invalid(c.project(&model)),
        SatOutcome::Unknown => ValidityOutcome::Unknown,
    }
}

#[cfg(test)]
mod tests;
