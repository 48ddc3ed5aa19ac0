//! Quantitative information-flow analysis for deterministic boolean programs.
//!
//! The library measures how much of a secret input an attacker learns by
//! watching a program's outputs, assuming the secret is uniformly
//! distributed. Three standard measures are supported — Shannon entropy,
//! min-entropy, and guessing entropy — along with channel capacity, and
//! each comes with two decision routes:
//!
//! * an **exact oracle** that enumerates all secret inputs, partitions them
//!   by observation, and evaluates the measure in exact arithmetic; and
//! * a **hyperproperty route** that reduces "does the leak exceed `q`?" to
//!   satisfiability questions about a self-composed program, via weakest
//!   preconditions and a small SAT solver.
//!
//! Module map:
//!
//! * [`lang`] — surface syntax, AST, desugaring, validation
//! * [`exec`] — exact interpreter with divergence detection, enumeration
//! * [`measure`] — output partitions and entropy-based measures
//! * [`selfcomp`] — k-fold self-composition and bound-to-k conversions
//! * [`solver`] — weakest preconditions, CNF conversion, DPLL, DIMACS
//! * [`decide`] — decision procedures producing auditable verdicts
//! * [`cli`] — the `qif` command-line tool

pub mod bits;
pub mod cli;
pub mod exec;
pub mod lang;
pub mod decide;
pub mod measure;
pub mod selfcomp;
pub mod solver;

pub use bits::Bits;
