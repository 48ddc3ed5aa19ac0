//! k-fold self-composition and the witness-size formulas.
//!
//! Running k renamed copies of a program in sequence turns a relational
//! question ("do some k inputs produce pairwise-distinct outputs?") into a
//! reachability question about a single program. The copies share no
//! variables, so the sequential order is immaterial for terminating runs
//! and the product's final outputs are the k single-run outputs side by
//! side.
//!
//! The witness-size formulas say how many copies suffice for the bounding
//! problems: `k_for_me(q) = ⌊2^q⌋ + 1` distinct outputs refute `ME ≤ q`,
//! and `k_for_ge(q) = ⌊(⌊q⌋+1)²/(⌊q⌋+1−q)⌋ + 1` caps the witness search
//! for `GE > q`. Both are evaluated exactly — no floating point.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive};
use thiserror::Error;

use crate::lang::{desugar, Decl, Formula, Program, Stmt, StmtKind, VarKind};

/// Shape of a composed program's postcondition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// All copies produce pairwise-distinct outputs.
    Distinctness,
    /// Some two copies produce equal outputs.
    Collision,
    /// Both copies agree (two copies only) — the non-interference shape.
    Agreement,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Distinctness => "distinctness",
            Polarity::Collision => "collision",
            Polarity::Agreement => "agreement",
        })
    }
}

impl FromStr for Polarity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "distinctness" => Ok(Polarity::Distinctness),
            "collision" => Ok(Polarity::Collision),
            "agreement" => Ok(Polarity::Agreement),
            other => Err(format!(
                "unknown polarity {other:?}: expected distinctness, collision, or agreement"
            )),
        }
    }
}

/// Why a composition request was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ComposeError {
    #[error("self-composition needs at least 2 copies, got {0}")]
    KTooSmall(u64),
    #[error("agreement is a two-copy postcondition, got k = {0}")]
    AgreementNeedsTwoCopies(u64),
}

/// A k-fold self-composition: the renamed product program plus the
/// postcondition over its copies' outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ComposedProgram {
    /// Name of the program that was composed.
    pub base: String,
    /// Number of copies.
    pub k: u64,
    /// The product: decls of copy 1, then copy 2, …; bodies in sequence.
    pub program: Program,
    /// Postcondition over the copies' out variables, in core connectives.
    pub post: Arc<Formula>,
    pub polarity: Polarity,
}

impl ComposedProgram {
    /// Renders the product with the postcondition as a trailing
    /// `assert(φ)` annotation, the form `parse_annotated` reads back.
    pub fn to_source(&self) -> String {
        format!("{}assert({});\n", self.program.to_source(), self.post)
    }
}

fn copy_name(name: &str, i: u64) -> String {
    format!("{name}_{i}")
}

fn rename_formula(f: &Arc<Formula>, i: u64) -> Arc<Formula> {
    match &**f {
        Formula::True | Formula::False => f.clone(),
        Formula::Var { name, bit } => Formula::var(copy_name(name, i), *bit),
        Formula::Not(a) => Formula::not(rename_formula(a, i)),
        Formula::And(a, b) => Formula::and(rename_formula(a, i), rename_formula(b, i)),
        Formula::Or(a, b) => Formula::or(rename_formula(a, i), rename_formula(b, i)),
        Formula::Xor(a, b) => Formula::xor(rename_formula(a, i), rename_formula(b, i)),
        Formula::Eq(a, b) => Formula::eq(rename_formula(a, i), rename_formula(b, i)),
    }
}

fn rename_stmt(s: &Stmt, i: u64) -> Stmt {
    let kind = match &s.kind {
        StmtKind::Skip => StmtKind::Skip,
        StmtKind::Observe => StmtKind::Observe,
        StmtKind::Assign { var, bit, value } => StmtKind::Assign {
            var: copy_name(var, i),
            bit: *bit,
            value: rename_formula(value, i),
        },
        StmtKind::Seq(a, b) => StmtKind::Seq(
            Box::new(rename_stmt(a, i)),
            Box::new(rename_stmt(b, i)),
        ),
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => StmtKind::If {
            cond: rename_formula(cond, i),
            then_branch: Box::new(rename_stmt(then_branch, i)),
            else_branch: Box::new(rename_stmt(else_branch, i)),
        },
        StmtKind::While { cond, body } => StmtKind::While {
            cond: rename_formula(cond, i),
            body: Box::new(rename_stmt(body, i)),
        },
    };
    Stmt::new(kind)
}

/// `O_i = O_j` as a formula: every bit of every out variable agrees.
fn outputs_equal(p: &Program, i: u64, j: u64) -> Arc<Formula> {
    let mut acc: Option<Arc<Formula>> = None;
    for d in p.decls.iter().filter(|d| d.kind == VarKind::Out) {
        for bit in 0..d.width {
            let term = Formula::eq(
                Formula::var(copy_name(&d.name, i), bit),
                Formula::var(copy_name(&d.name, j), bit),
            );
            acc = Some(match acc {
                None => term,
                Some(a) => Formula::and(a, term),
            });
        }
    }
    acc.expect("programs always declare at least one out bit")
}

/// Builds the k-fold self-composition of a validated program.
pub fn self_compose(p: &Program, k: u64, polarity: Polarity) -> Result<ComposedProgram, ComposeError> {
    if k < 2 {
        return Err(ComposeError::KTooSmall(k));
    }
    if polarity == Polarity::Agreement && k != 2 {
        return Err(ComposeError::AgreementNeedsTwoCopies(k));
    }

    let mut decls = Vec::with_capacity(p.decls.len() * k as usize);
    for i in 1..=k {
        for d in &p.decls {
            decls.push(Decl {
                name: copy_name(&d.name, i),
                kind: d.kind,
                width: d.width,
                pos: d.pos,
            });
        }
    }

    // Collect every copy's top-level statements and fold them right-nested,
    // the canonical shape the parser produces — so the product pretty-prints
    // and re-parses to exactly this tree.
    fn split_seq(s: Stmt, out: &mut Vec<Stmt>) {
        match s.kind {
            StmtKind::Seq(a, b) => {
                split_seq(*a, out);
                split_seq(*b, out);
            }
            _ => out.push(s),
        }
    }
    let mut stmts = Vec::new();
    for i in 1..=k {
        split_seq(rename_stmt(&p.body, i), &mut stmts);
    }
    let mut body = stmts.pop().expect("bodies are non-empty");
    while let Some(s) = stmts.pop() {
        body = Stmt::new(StmtKind::Seq(Box::new(s), Box::new(body)));
    }

    let mut post: Option<Arc<Formula>> = None;
    for i in 1..=k {
        for j in i + 1..=k {
            let equal = outputs_equal(p, i, j);
            let term = match polarity {
                Polarity::Distinctness => Formula::not(equal),
                Polarity::Collision | Polarity::Agreement => equal,
            };
            post = Some(match post {
                None => term,
                Some(acc) => match polarity {
                    Polarity::Distinctness | Polarity::Agreement => Formula::and(acc, term),
                    Polarity::Collision => Formula::or(acc, term),
                },
            });
        }
    }
    let post = desugar(&post.expect("k ≥ 2 yields at least one pair"));

    Ok(ComposedProgram {
        base: p.name.clone(),
        k,
        program: Program {
            name: format!("{}_x{}", p.name, k),
            decls,
            body,
        },
        post,
        polarity,
    })
}

/// `base^exp` by square-and-multiply (the `num` `pow` takes `u32`).
fn big_pow(base: &BigUint, mut exp: u64) -> BigUint {
    let mut result = BigUint::one();
    let mut acc = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            result *= &acc;
        }
        exp >>= 1;
        if exp > 0 {
            acc = &acc * &acc;
        }
    }
    result
}

/// Copies needed to witness `ME > q`: `⌊2^q⌋ + 1`, the smallest class
/// count whose log2 exceeds q. `⌊2^(p/r)⌋` is found exactly as the largest
/// integer `t` with `t^r ≤ 2^p`. Saturates at `u64::MAX` for thresholds
/// beyond any buildable product (callers short-circuit long before).
pub fn k_for_me(q: &BigRational) -> u64 {
    assert!(!q.is_negative(), "thresholds must be non-negative");
    let p = q.numer();
    let r = q.denom();
    if p >= &(r * BigInt::from(63)) {
        return u64::MAX;
    }
    // p < 63·r from here on; both fit u64 for any sane threshold.
    let p = p.to_u64().expect("threshold numerator is impractically large");
    let r = r.to_u64().expect("threshold denominator is impractically large");
    let two_p = BigUint::one() << p;
    // ⌊2^(p/r)⌋ lies in [2^⌊p/r⌋, 2^(⌊p/r⌋+1)]; binary-search the max t
    // with t^r ≤ 2^p.
    let mut lo = 1u64 << (p / r); // t^r ≤ 2^p holds here
    let mut hi = (1u64 << (p / r + 1)) + 1; // strict upper bound
    while lo + 1 < hi {
        let mid = lo + (hi - lo) / 2;
        if big_pow(&BigUint::from(mid), r) <= two_p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + 1
}

/// Cap on the witness search for `GE > q`: `⌊(⌊q⌋+1)²/(⌊q⌋+1−q)⌋ + 1`,
/// evaluated in exact rational arithmetic.
pub fn k_for_ge(q: &BigRational) -> u64 {
    assert!(!q.is_negative(), "thresholds must be non-negative");
    let a = q.floor().to_integer() + BigInt::one();
    let denom = BigRational::from(a.clone()) - q;
    debug_assert!(denom.is_positive() && denom <= BigRational::one());
    let val = BigRational::from(&a * &a) / denom;
    (val.floor().to_integer() + BigInt::one())
        .to_u64()
        .unwrap_or(u64::MAX)
}
