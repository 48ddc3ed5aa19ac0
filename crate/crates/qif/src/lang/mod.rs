//! The boolean program language.
//!
//! Programs operate on declared bit-vector variables. Secret inputs are
//! `high` variables, attacker-visible results are `out` variables, and
//! scratch state is `local`. The statement language is deliberately small:
//! single-bit assignment, sequencing, conditionals, loops, `skip`, and an
//! explicit `observe` that emits the current output tuple in trace mode.
//!
//! Formulas come in a sugared surface form (`false`, `|`, `^`, `==`) that
//! [`desugar`] lowers onto the four-constructor core (`true`, variable,
//! `&`, `!`). All downstream analyses consume the core form only.

mod lexer;
mod parser;

pub use lexer::Pos;
pub use parser::{parse, parse_annotated, parse_formula_with, ParseError};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Default ceiling on the total number of high (secret) bits a program may
/// declare; exhaustive enumeration beyond this is impractical.
pub const DEFAULT_HIGH_BIT_CAP: u32 = 24;

/// Role of a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    /// Secret input; read-only.
    High,
    /// Attacker-visible output.
    Out,
    /// Scratch state, neither secret nor observable.
    Local,
}

impl fmt::Display for VarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarKind::High => "high",
            VarKind::Out => "out",
            VarKind::Local => "local",
        })
    }
}

/// A variable declaration, e.g. `high h:bool[2];`.
///
/// Equality ignores source positions.
#[derive(Debug, Clone, Eq)]
pub struct Decl {
    pub name: String,
    pub kind: VarKind,
    pub width: u32,
    pub pos: Pos,
}

impl PartialEq for Decl {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.kind == other.kind && self.width == other.width
    }
}

/// A boolean formula over single bits of declared variables.
///
/// `True`, `Var`, `And`, and `Not` form the core; the remaining
/// constructors are surface sugar removed by [`desugar`]. Subterms are
/// reference-counted so analyses can share structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    True,
    /// Sugar for `!true`.
    False,
    Var {
        name: String,
        bit: u32,
    },
    Not(Arc<Formula>),
    And(Arc<Formula>, Arc<Formula>),
    /// Sugar: `a | b` is `!(!a & !b)`.
    Or(Arc<Formula>, Arc<Formula>),
    /// Sugar: `a ^ b` is `(a & !b) | (!a & b)`.
    Xor(Arc<Formula>, Arc<Formula>),
    /// Sugar: `a == b` is `!(a ^ b)`.
    Eq(Arc<Formula>, Arc<Formula>),
}

// The constructors are associated functions, not methods, so `Formula::not`
// cannot collide with `std::ops::Not::not` at a call site.
#[allow(clippy::should_implement_trait)]
impl Formula {
    pub fn t() -> Arc<Formula> {
        Arc::new(Formula::True)
    }

    pub fn f() -> Arc<Formula> {
        Arc::new(Formula::False)
    }

    pub fn var(name: impl Into<String>, bit: u32) -> Arc<Formula> {
        Arc::new(Formula::Var {
            name: name.into(),
            bit,
        })
    }

    pub fn not(a: Arc<Formula>) -> Arc<Formula> {
        Arc::new(Formula::Not(a))
    }

    pub fn and(a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        Arc::new(Formula::And(a, b))
    }

    pub fn or(a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        Arc::new(Formula::Or(a, b))
    }

    pub fn xor(a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        Arc::new(Formula::Xor(a, b))
    }

    pub fn eq(a: Arc<Formula>, b: Arc<Formula>) -> Arc<Formula> {
        Arc::new(Formula::Eq(a, b))
    }

    /// True when only the core constructors (`True`, `Var`, `And`, `Not`)
    /// appear.
    pub fn is_core(&self) -> bool {
        match self {
            Formula::True | Formula::Var { .. } => true,
            Formula::Not(a) => a.is_core(),
            Formula::And(a, b) => a.is_core() && b.is_core(),
            Formula::False | Formula::Or(..) | Formula::Xor(..) | Formula::Eq(..) => false,
        }
    }

    /// Number of nodes in the formula tree (sharing not collapsed).
    pub fn tree_size(&self) -> usize {
        match self {
            Formula::True | Formula::False | Formula::Var { .. } => 1,
            Formula::Not(a) => 1 + a.tree_size(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Xor(a, b) | Formula::Eq(a, b) => {
                1 + a.tree_size() + b.tree_size()
            }
        }
    }

    /// All `(name, bit)` pairs referenced by the formula, sorted.
    pub fn vars(&self) -> Vec<(String, u32)> {
        fn walk(f: &Formula, acc: &mut BTreeMap<(String, u32), ()>) {
            match f {
                Formula::True | Formula::False => {}
                Formula::Var { name, bit } => {
                    acc.insert((name.clone(), *bit), ());
                }
                Formula::Not(a) => walk(a, acc),
                Formula::And(a, b)
                | Formula::Or(a, b)
                | Formula::Xor(a, b)
                | Formula::Eq(a, b) => {
                    walk(a, acc);
                    walk(b, acc);
                }
            }
        }
        let mut acc = BTreeMap::new();
        walk(self, &mut acc);
        acc.into_keys().collect()
    }
}

/// Rewrites a formula onto the four-constructor core.
///
/// `false` becomes `!true`; `|`, `^`, and `==` are expanded through the
/// usual De Morgan identities. The result is logically equivalent to the
/// input under every assignment.
pub fn desugar(f: &Arc<Formula>) -> Arc<Formula> {
    match f.as_ref() {
        Formula::True | Formula::Var { .. } => f.clone(),
        Formula::False => Formula::not(Formula::t()),
        Formula::Not(a) => Formula::not(desugar(a)),
        Formula::And(a, b) => Formula::and(desugar(a), desugar(b)),
        // a | b  =  !(!a & !b)
        Formula::Or(a, b) => {
            let (a, b) = (desugar(a), desugar(b));
            Formula::not(Formula::and(Formula::not(a), Formula::not(b)))
        }
        // a ^ b  =  (a & !b) | (!a & b)
        Formula::Xor(a, b) => {
            let (a, b) = (desugar(a), desugar(b));
            let left = Formula::and(a.clone(), Formula::not(b.clone()));
            let right = Formula::and(Formula::not(a), b);
            Formula::not(Formula::and(Formula::not(left), Formula::not(right)))
        }
        // a == b  =  !(a ^ b)
        Formula::Eq(a, b) => Formula::not(desugar(&Formula::xor(a.clone(), b.clone()))),
    }
}

/// Evaluates a formula under a bit-level environment. Handles sugared and
/// core constructors alike.
pub fn eval(f: &Formula, env: &mut impl FnMut(&str, u32) -> bool) -> bool {
    match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Var { name, bit } => env(name, *bit),
        Formula::Not(a) => !eval(a, env),
        Formula::And(a, b) => eval(a, env) && eval(b, env),
        Formula::Or(a, b) => eval(a, env) || eval(b, env),
        Formula::Xor(a, b) => eval(a, env) != eval(b, env),
        Formula::Eq(a, b) => eval(a, env) == eval(b, env),
    }
}

/// A statement together with its source position.
///
/// Equality ignores positions so that pretty-printing and re-parsing
/// round-trips structurally.
#[derive(Debug, Clone, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub pos: Pos,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt {
            kind,
            pos: Pos::default(),
        }
    }
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Skip,
    /// Emits the current output tuple in trace mode; no effect otherwise.
    Observe,
    /// `var[bit] := value`
    Assign {
        var: String,
        bit: u32,
        value: Arc<Formula>,
    },
    Seq(Box<Stmt>, Box<Stmt>),
    If {
        cond: Arc<Formula>,
        then_branch: Box<Stmt>,
        else_branch: Box<Stmt>,
    },
    While {
        cond: Arc<Formula>,
        body: Box<Stmt>,
    },
}

/// A complete program: a name, variable declarations, and a body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub decls: Vec<Decl>,
    pub body: Stmt,
}

impl Program {
    /// Looks up a declaration by name.
    pub fn decl(&self, name: &str) -> Option<&Decl> {
        self.decls.iter().find(|d| d.name == name)
    }

    /// True when the body contains no `while` loop.
    pub fn loop_free(&self) -> bool {
        fn check(s: &Stmt) -> bool {
            match &s.kind {
                StmtKind::Skip | StmtKind::Observe | StmtKind::Assign { .. } => true,
                StmtKind::Seq(a, b) => check(a) && check(b),
                StmtKind::If {
                    then_branch,
                    else_branch,
                    ..
                } => check(then_branch) && check(else_branch),
                StmtKind::While { .. } => false,
            }
        }
        check(&self.body)
    }

    /// Total width of all `high` declarations.
    pub fn high_bits(&self) -> u32 {
        self.bits_of_kind(VarKind::High)
    }

    /// Total width of all `out` declarations.
    pub fn out_bits(&self) -> u32 {
        self.bits_of_kind(VarKind::Out)
    }

    /// Total width of every declaration.
    pub fn total_bits(&self) -> u32 {
        self.decls.iter().map(|d| d.width).sum()
    }

    fn bits_of_kind(&self, kind: VarKind) -> u32 {
        self.decls
            .iter()
            .filter(|d| d.kind == kind)
            .map(|d| d.width)
            .sum()
    }

    /// AST size: statement nodes plus formula tree nodes. Used for the
    /// precondition-size accounting in the verification pipeline.
    pub fn size(&self) -> usize {
        fn stmt_size(s: &Stmt) -> usize {
            match &s.kind {
                StmtKind::Skip | StmtKind::Observe => 1,
                StmtKind::Assign { value, .. } => 1 + value.tree_size(),
                StmtKind::Seq(a, b) => 1 + stmt_size(a) + stmt_size(b),
                StmtKind::If {
                    cond,
                    then_branch,
                    else_branch,
                } => 1 + cond.tree_size() + stmt_size(then_branch) + stmt_size(else_branch),
                StmtKind::While { cond, body } => 1 + cond.tree_size() + stmt_size(body),
            }
        }
        stmt_size(&self.body)
    }

    /// Renders the program in canonical surface syntax. Parsing the result
    /// yields a program structurally equal to `self`.
    pub fn to_source(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("program {};\n", self.name));
        for d in &self.decls {
            out.push_str(&format!("{} {}:bool[{}];\n", d.kind, d.name, d.width));
        }
        write_seq(&self.body, 0, &mut out);
        out.push('\n');
        out
    }
}

fn indent(level: usize, out: &mut String) {
    for _ in 0..level {
        out.push_str("    ");
    }
}

/// Flattens a `Seq` chain and prints one statement per line.
fn write_seq(s: &Stmt, level: usize, out: &mut String) {
    let mut items = Vec::new();
    fn flatten<'a>(s: &'a Stmt, items: &mut Vec<&'a Stmt>) {
        if let StmtKind::Seq(a, b) = &s.kind {
            flatten(a, items);
            flatten(b, items);
        } else {
            items.push(s);
        }
    }
    flatten(s, &mut items);
    for (i, item) in items.iter().enumerate() {
        indent(level, out);
        write_atom(item, level, out);
        if i + 1 < items.len() {
            out.push(';');
        }
        if i + 1 < items.len() {
            out.push('\n');
        }
    }
}

/// Prints a single statement; `Seq` children become braced blocks.
fn write_atom(s: &Stmt, level: usize, out: &mut String) {
    match &s.kind {
        StmtKind::Skip => out.push_str("skip"),
        StmtKind::Observe => out.push_str("observe"),
        StmtKind::Assign { var, bit, value } => {
            out.push_str(&format!("{var}[{bit}] := {value}"));
        }
        StmtKind::Seq(..) => {
            out.push_str("{\n");
            write_seq(s, level + 1, out);
            out.push('\n');
            indent(level, out);
            out.push('}');
        }
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            out.push_str(&format!("if ({cond}) then "));
            write_atom(then_branch, level, out);
            out.push_str(" else ");
            write_atom(else_branch, level, out);
        }
        StmtKind::While { cond, body } => {
            out.push_str(&format!("while ({cond}) do "));
            write_atom(body, level, out);
        }
    }
}

// Operator precedence for printing: higher binds tighter.
fn prec(f: &Formula) -> u8 {
    match f {
        Formula::Eq(..) => 1,
        Formula::Or(..) => 2,
        Formula::Xor(..) => 3,
        Formula::And(..) => 4,
        Formula::Not(..) => 5,
        Formula::True | Formula::False | Formula::Var { .. } => 6,
    }
}

fn fmt_prec(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let p = prec(f);
    if p < min {
        out.write_str("(")?;
        fmt_prec(f, 0, out)?;
        return out.write_str(")");
    }
    match f {
        Formula::True => out.write_str("true"),
        Formula::False => out.write_str("false"),
        Formula::Var { name, bit } => write!(out, "{name}[{bit}]"),
        Formula::Not(a) => {
            out.write_str("!")?;
            fmt_prec(a, 5, out)
        }
        Formula::And(a, b) => {
            fmt_prec(a, p, out)?;
            out.write_str(" & ")?;
            fmt_prec(b, p + 1, out)
        }
        Formula::Xor(a, b) => {
            fmt_prec(a, p, out)?;
            out.write_str(" ^ ")?;
            fmt_prec(b, p + 1, out)
        }
        Formula::Or(a, b) => {
            fmt_prec(a, p, out)?;
            out.write_str(" | ")?;
            fmt_prec(b, p + 1, out)
        }
        Formula::Eq(a, b) => {
            fmt_prec(a, p, out)?;
            out.write_str(" == ")?;
            fmt_prec(b, p + 1, out)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}

/// What a [`validate`] check found wrong.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    DuplicateDeclaration,
    ZeroWidth,
    NoHighVariable,
    NoOutVariable,
    UnknownVariable,
    BitOutOfRange,
    AssignToHigh,
    HighBitsExceedCap,
}

/// A single validation failure, human-readable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

/// Everything [`validate`] found; empty means the program is well-formed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks program well-formedness with the default high-bit cap.
///
/// Violations are reported as data rather than raised, so callers can show
/// all of them at once.
pub fn validate(p: &Program) -> ValidationReport {
    validate_with_cap(p, DEFAULT_HIGH_BIT_CAP)
}

/// [`validate`] with an explicit ceiling on total high bits.
pub fn validate_with_cap(p: &Program, high_bit_cap: u32) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = BTreeMap::new();
    for d in &p.decls {
        if seen.insert(d.name.clone(), ()).is_some() {
            violations.push(Violation {
                kind: ViolationKind::DuplicateDeclaration,
                message: format!("variable {:?} is declared more than once", d.name),
            });
        }
        if d.width == 0 {
            violations.push(Violation {
                kind: ViolationKind::ZeroWidth,
                message: format!("variable {:?} has width 0; widths must be at least 1", d.name),
            });
        }
    }
    if !p.decls.iter().any(|d| d.kind == VarKind::High) {
        violations.push(Violation {
            kind: ViolationKind::NoHighVariable,
            message: "program declares no high (secret) variable".into(),
        });
    }
    if !p.decls.iter().any(|d| d.kind == VarKind::Out) {
        violations.push(Violation {
            kind: ViolationKind::NoOutVariable,
            message: "program declares no out (observable) variable".into(),
        });
    }
    if p.high_bits() > high_bit_cap {
        violations.push(Violation {
            kind: ViolationKind::HighBitsExceedCap,
            message: format!(
                "program declares {} high bits, above the cap of {high_bit_cap}",
                p.high_bits()
            ),
        });
    }

    let mut check_ref = |name: &str, bit: u32, violations: &mut Vec<Violation>| match p.decl(name) {
        None => violations.push(Violation {
            kind: ViolationKind::UnknownVariable,
            message: format!("reference to undeclared variable {name:?}"),
        }),
        Some(d) if bit >= d.width => violations.push(Violation {
            kind: ViolationKind::BitOutOfRange,
            message: format!(
                "bit index {bit} out of range for {name:?} (width {})",
                d.width
            ),
        }),
        Some(_) => {}
    };

    fn check_formula(
        f: &Formula,
        check_ref: &mut impl FnMut(&str, u32, &mut Vec<Violation>),
        violations: &mut Vec<Violation>,
    ) {
        match f {
            Formula::True | Formula::False => {}
            Formula::Var { name, bit } => check_ref(name, *bit, violations),
            Formula::Not(a) => check_formula(a, check_ref, violations),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Xor(a, b) | Formula::Eq(a, b) => {
                check_formula(a, check_ref, violations);
                check_formula(b, check_ref, violations);
            }
        }
    }

    fn check_stmt(
        s: &Stmt,
        p: &Program,
        check_ref: &mut impl FnMut(&str, u32, &mut Vec<Violation>),
        violations: &mut Vec<Violation>,
    ) {
        match &s.kind {
            StmtKind::Skip | StmtKind::Observe => {}
            StmtKind::Assign { var, bit, value } => {
                check_ref(var, *bit, violations);
                if let Some(d) = p.decl(var) {
                    if d.kind == VarKind::High {
                        violations.push(Violation {
                            kind: ViolationKind::AssignToHigh,
                            message: format!("high variable {var:?} is read-only"),
                        });
                    }
                }
                check_formula(value, check_ref, violations);
            }
            StmtKind::Seq(a, b) => {
                check_stmt(a, p, check_ref, violations);
                check_stmt(b, p, check_ref, violations);
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                check_formula(cond, check_ref, violations);
                check_stmt(then_branch, p, check_ref, violations);
                check_stmt(else_branch, p, check_ref, violations);
            }
            StmtKind::While { cond, body } => {
                check_formula(cond, check_ref, violations);
                check_stmt(body, p, check_ref, violations);
            }
        }
    }

    check_stmt(&p.body, p, &mut check_ref, &mut violations);
    ValidationReport { violations }
}
