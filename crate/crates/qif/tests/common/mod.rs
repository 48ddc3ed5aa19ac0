//! Shared helpers for the integration suites: a deliberately naive second
//! interpreter, definitional measure oracles, and seeded random program
//! generators. Everything here is independent of the library's enumeration
//! and measure code paths so agreement between the two is evidence, not
//! tautology.

#![allow(dead_code)] // each integration target uses a different subset

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use qif::lang::{eval, Decl, Formula, Pos, Program, Stmt, StmtKind, VarKind};

/// Workspace-level corpus directory, resolved independently of the test
/// working directory.
pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .join("corpus")
}

/// Lists the corpus programs in deterministic order.
pub fn corpus_programs() -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(corpus_dir())
        .expect("corpus directory")
        .map(|e| e.expect("dir entry").path())
        .filter(|p| p.extension().is_some_and(|e| e == "bp"))
        .collect();
    files.sort();
    assert!(!files.is_empty(), "corpus directory has no programs");
    files
}

// ---------------------------------------------------------------------------
// Naive reference interpreter
// ---------------------------------------------------------------------------

/// Final variable store after a naive run, or `None` when `fuel` ran out
/// (the program loops too long or forever on this input).
pub type NaiveStore = HashMap<(String, u32), bool>;

/// Runs `p` on the secret input whose bit `k` (enumeration order: k-th
/// high bit in declaration order) is `input & (1 << k)`, using a plain
/// store-walking interpreter with no cycle detection.
pub fn naive_run(p: &Program, input: u64, fuel: u64) -> Option<NaiveStore> {
    let mut store: NaiveStore = HashMap::new();
    let mut k = 0u32;
    for d in &p.decls {
        for bit in 0..d.width {
            let value = if d.kind == VarKind::High {
                let v = input & (1u64 << k) != 0;
                k += 1;
                v
            } else {
                false
            };
            store.insert((d.name.clone(), bit), value);
        }
    }
    let mut fuel = fuel;
    if exec_naive(&p.body, &mut store, &mut fuel) {
        Some(store)
    } else {
        None
    }
}

fn eval_in(f: &Formula, store: &NaiveStore) -> bool {
    eval(f, &mut |name, bit| {
        *store
            .get(&(name.to_string(), bit))
            .unwrap_or_else(|| panic!("undeclared {name}[{bit}]"))
    })
}

fn exec_naive(s: &Stmt, store: &mut NaiveStore, fuel: &mut u64) -> bool {
    if *fuel == 0 {
        return false;
    }
    *fuel -= 1;
    match &s.kind {
        StmtKind::Skip | StmtKind::Observe => true,
        StmtKind::Assign { var, bit, value } => {
            let v = eval_in(value, store);
            store.insert((var.clone(), *bit), v);
            true
        }
        StmtKind::Seq(a, b) => exec_naive(a, store, fuel) && exec_naive(b, store, fuel),
        StmtKind::If {
            cond,
            then_branch,
            else_branch,
        } => {
            if eval_in(cond, store) {
                exec_naive(then_branch, store, fuel)
            } else {
                exec_naive(else_branch, store, fuel)
            }
        }
        StmtKind::While { cond, body } => {
            while eval_in(cond, store) {
                if !exec_naive(body, store, fuel) {
                    return false;
                }
                if *fuel == 0 {
                    return false;
                }
                *fuel -= 1;
            }
            true
        }
    }
}

/// The final out tuple of a naive run, bits in declaration order.
pub fn naive_out(p: &Program, input: u64, fuel: u64) -> Option<Vec<bool>> {
    let store = naive_run(p, input, fuel)?;
    let mut out = Vec::new();
    for d in p.decls.iter().filter(|d| d.kind == VarKind::Out) {
        for bit in 0..d.width {
            out.push(store[&(d.name.clone(), bit)]);
        }
    }
    Some(out)
}

/// Distinct final outputs of a loop-free program over all inputs, counted
/// with the naive interpreter.
pub fn naive_distinct_outputs(p: &Program) -> u64 {
    assert!(p.loop_free(), "oracle is for loop-free programs");
    let n = 1u64 << p.high_bits();
    let mut seen = std::collections::HashSet::new();
    for input in 0..n {
        seen.insert(naive_out(p, input, u64::MAX).expect("loop-free run"));
    }
    seen.len() as u64
}

/// Output partition class sizes of a loop-free program, descending, from
/// the naive interpreter.
pub fn naive_class_sizes(p: &Program) -> Vec<u64> {
    assert!(p.loop_free(), "oracle is for loop-free programs");
    let n = 1u64 << p.high_bits();
    let mut counts: HashMap<Vec<bool>, u64> = HashMap::new();
    for input in 0..n {
        *counts
            .entry(naive_out(p, input, u64::MAX).expect("loop-free run"))
            .or_insert(0) += 1;
    }
    let mut sizes: Vec<u64> = counts.into_values().collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

// ---------------------------------------------------------------------------
// Definitional measure oracles
// ---------------------------------------------------------------------------

/// Shannon leakage from class sizes, straight from the definition.
pub fn se_of_sizes(sizes: &[u64]) -> f64 {
    let n: u64 = sizes.iter().sum();
    let nf = n as f64;
    (nf.log2() * nf - sizes.iter().map(|&s| s as f64 * (s as f64).log2()).sum::<f64>()) / nf
}

/// Guessing-entropy leakage from class sizes as an exact rational:
/// expected guesses for the secret alone minus expected guesses given the
/// output, computed by literal rank sums.
pub fn ge_of_sizes(sizes: &[u64]) -> BigRational {
    let n: u64 = sizes.iter().sum();
    let big = |x: u64| BigInt::from(x);
    // Expected rank of the secret under a uniform prior is (N+1)/2.
    let prior = BigRational::new(big(n + 1), big(2));
    // Given the output, the attacker guesses within a class of size s:
    // expected rank (s+1)/2, weighted by the class probability s/N.
    let mut posterior = BigRational::new(big(0), big(1));
    for &s in sizes {
        posterior += BigRational::new(big(s) * big(s + 1), big(2) * big(n));
    }
    prior - posterior
}

// ---------------------------------------------------------------------------
// Random program generation
// ---------------------------------------------------------------------------

/// Shape knobs for [`random_program`].
pub struct GenConfig {
    /// Total high bits land in 1..=max_high_bits.
    pub max_high_bits: u32,
    /// Statement-tree depth bound.
    pub max_depth: u32,
    /// Allow while loops; generated loops always terminate (the guard bit
    /// is cleared in the body and never re-armed).
    pub loops: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_high_bits: 6,
            max_depth: 3,
            loops: false,
        }
    }
}

fn random_expr(rng: &mut ChaCha8Rng, readable: &[(String, u32)], depth: u32) -> Arc<Formula> {
    if depth == 0 || rng.gen_ratio(1, 4) {
        return match rng.gen_range(0..6) {
            0 => Formula::t(),
            1 => Formula::f(),
            _ => {
                let (name, bit) = readable.choose(rng).expect("readable bits").clone();
                Formula::var(name, bit)
            }
        };
    }
    match rng.gen_range(0..5) {
        0 => Formula::not(random_expr(rng, readable, depth - 1)),
        1 => Formula::and(
            random_expr(rng, readable, depth - 1),
            random_expr(rng, readable, depth - 1),
        ),
        2 => Formula::or(
            random_expr(rng, readable, depth - 1),
            random_expr(rng, readable, depth - 1),
        ),
        3 => Formula::xor(
            random_expr(rng, readable, depth - 1),
            random_expr(rng, readable, depth - 1),
        ),
        _ => Formula::eq(
            random_expr(rng, readable, depth - 1),
            random_expr(rng, readable, depth - 1),
        ),
    }
}

fn random_stmt(
    rng: &mut ChaCha8Rng,
    readable: &[(String, u32)],
    writable: &[(String, u32)],
    depth: u32,
    loops: bool,
) -> Stmt {
    let assign = |rng: &mut ChaCha8Rng| {
        let (var, bit) = writable.choose(rng).expect("writable bits").clone();
        Stmt::new(StmtKind::Assign {
            var,
            bit,
            value: random_expr(rng, readable, 2),
        })
    };
    if depth == 0 {
        return assign(rng);
    }
    match rng.gen_range(0..10) {
        0 => Stmt::new(StmtKind::Skip),
        1 => Stmt::new(StmtKind::Observe),
        2..=4 => assign(rng),
        5..=6 => Stmt::new(StmtKind::Seq(
            Box::new(random_stmt(rng, readable, writable, depth - 1, loops)),
            Box::new(random_stmt(rng, readable, writable, depth - 1, loops)),
        )),
        7..=8 => Stmt::new(StmtKind::If {
            cond: random_expr(rng, readable, 2),
            then_branch: Box::new(random_stmt(rng, readable, writable, depth - 1, loops)),
            else_branch: Box::new(random_stmt(rng, readable, writable, depth - 1, loops)),
        }),
        _ => {
            if loops {
                // A loop whose guard bit is cleared first thing in the body
                // and never written again (the nested generator gets a
                // writable set without it), so each arming runs at most one
                // iteration: While handling is exercised, enumeration
                // terminates.
                let (var, bit) = writable.choose(rng).expect("writable bits").clone();
                let rest: Vec<(String, u32)> = writable
                    .iter()
                    .filter(|w| **w != (var.clone(), bit))
                    .cloned()
                    .collect();
                let inner = if rest.is_empty() {
                    Stmt::new(StmtKind::Skip)
                } else {
                    random_stmt(rng, readable, &rest, depth - 1, false)
                };
                let body = Stmt::new(StmtKind::Seq(
                    Box::new(Stmt::new(StmtKind::Assign {
                        var: var.clone(),
                        bit,
                        value: Formula::f(),
                    })),
                    Box::new(inner),
                ));
                Stmt::new(StmtKind::While {
                    cond: Formula::var(var, bit),
                    body: Box::new(body),
                })
            } else {
                assign(rng)
            }
        }
    }
}

/// Generates a valid random program: 1-2 high variables within the high-bit
/// budget, 1-2 out variables, sometimes a local, and a depth-bounded body.
pub fn random_program(rng: &mut ChaCha8Rng, name: &str, cfg: &GenConfig) -> Program {
    let mut decls = Vec::new();
    let high_total = rng.gen_range(1..=cfg.max_high_bits);
    let split = rng.gen_ratio(1, 3) && high_total >= 2;
    if split {
        let first = rng.gen_range(1..high_total);
        decls.push(decl("h", VarKind::High, first));
        decls.push(decl("g", VarKind::High, high_total - first));
    } else {
        decls.push(decl("h", VarKind::High, high_total));
    }
    let out_width = rng.gen_range(1..=3);
    decls.push(decl("o", VarKind::Out, out_width));
    if rng.gen_ratio(1, 2) {
        decls.push(decl("p", VarKind::Out, 1));
    }
    if rng.gen_ratio(1, 2) {
        decls.push(decl("t", VarKind::Local, rng.gen_range(1..=2)));
    }
    let readable: Vec<(String, u32)> = decls
        .iter()
        .flat_map(|d| (0..d.width).map(move |b| (d.name.clone(), b)))
        .collect();
    let writable: Vec<(String, u32)> = decls
        .iter()
        .filter(|d| d.kind != VarKind::High)
        .flat_map(|d| (0..d.width).map(move |b| (d.name.clone(), b)))
        .collect();
    let depth = rng.gen_range(1..=cfg.max_depth);
    let body = random_stmt(rng, &readable, &writable, depth, cfg.loops);
    let program = Program {
        name: name.to_string(),
        decls,
        body,
    };
    assert!(qif::lang::validate(&program).is_ok(), "generator bug");
    assert!(cfg.loops || program.loop_free(), "generator bug");
    program
}

fn decl(name: &str, kind: VarKind, width: u32) -> Decl {
    Decl {
        name: name.to_string(),
        kind,
        width,
        pos: Pos::default(),
    }
}

/// A random postcondition over the program's declared bits.
pub fn random_post(rng: &mut ChaCha8Rng, p: &Program) -> Arc<Formula> {
    let readable: Vec<(String, u32)> = p
        .decls
        .iter()
        .flat_map(|d| (0..d.width).map(move |b| (d.name.clone(), b)))
        .collect();
    random_expr(rng, &readable, 3)
}

/// Evaluates a formula against a naive final store.
pub fn eval_in_store(f: &Formula, store: &NaiveStore) -> bool {
    eval_in(f, store)
}

/// Evaluates a formula against high-input bits only (enumeration order).
pub fn eval_on_input(p: &Program, f: &Formula, input: u64) -> bool {
    let mut index = HashMap::new();
    let mut k = 0u32;
    for d in p.decls.iter().filter(|d| d.kind == VarKind::High) {
        for bit in 0..d.width {
            index.insert((d.name.clone(), bit), k);
            k += 1;
        }
    }
    eval(f, &mut |name, bit| {
        let k = index[&(name.to_string(), bit)];
        input & (1u64 << k) != 0
    })
}
