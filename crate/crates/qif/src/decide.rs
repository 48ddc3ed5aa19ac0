//! Deciders for the bounding problems and non-interference.
//!
//! Six bounding problems ask whether a measure stays at or below a
//! threshold (`U_SE`, `U_ME`, `U_GE`: value ≤ q) or strictly exceeds it
//! (`L_SE`, `L_ME`, `L_GE`: value > q); non-interference is the q = 0
//! boundary, where all three measures agree. Every problem has an exact
//! oracle route through enumeration. The min-entropy problems additionally
//! have complete SAT routes through self-composition — `ME > q` holds iff
//! some `k_for_me(q)` inputs produce pairwise-distinct outputs — and the
//! guessing-entropy lower bound has a sound-but-incomplete witness route.
//! Shannon bounding deliberately has no SAT route; only the oracle serves
//! it.

use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::exec::{compile, enumerate, ExecError, ExecOptions, Mode, Observation};
use crate::lang::{Formula, Program};
use crate::measure::{
    compare, guessing_qif, min_entropy_qif, partition, rational_string, shannon_qif,
    CompareOutcome, MeasureKind, MeasureValue, OutputPartition, Relation,
};
use crate::selfcomp::{k_for_ge, k_for_me, self_compose, ComposeError, Polarity};
use crate::solver::{
    sat, tseitin, valid, wp, SatOutcome, SolverLimits, ValidityOutcome, WpError,
};

/// The decision problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    #[serde(rename = "U_SE")]
    USe,
    #[serde(rename = "U_ME")]
    UMe,
    #[serde(rename = "U_GE")]
    UGe,
    #[serde(rename = "L_SE")]
    LSe,
    #[serde(rename = "L_ME")]
    LMe,
    #[serde(rename = "L_GE")]
    LGe,
    #[serde(rename = "NI")]
    Ni,
}

impl Problem {
    /// Upper problems ask `value ≤ q`; lower problems ask `value > q`.
    fn relation(self) -> Relation {
        match self {
            Problem::USe | Problem::UMe | Problem::UGe | Problem::Ni => Relation::LessEq,
            Problem::LSe | Problem::LMe | Problem::LGe => Relation::Greater,
        }
    }

    fn measure(self, p: &OutputPartition) -> MeasureValue {
        match self {
            Problem::USe | Problem::LSe => shannon_qif(p),
            Problem::UMe | Problem::LMe => min_entropy_qif(p),
            Problem::UGe | Problem::LGe => guessing_qif(p),
            Problem::Ni => min_entropy_qif(p),
        }
    }
}

impl std::fmt::Display for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Problem::USe => "U_SE",
            Problem::UMe => "U_ME",
            Problem::UGe => "U_GE",
            Problem::LSe => "L_SE",
            Problem::LMe => "L_ME",
            Problem::LGe => "L_GE",
            Problem::Ni => "NI",
        })
    }
}

impl FromStr for Problem {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "U_SE" | "use" => Ok(Problem::USe),
            "U_ME" | "ume" => Ok(Problem::UMe),
            "U_GE" | "uge" => Ok(Problem::UGe),
            "L_SE" | "lse" => Ok(Problem::LSe),
            "L_ME" | "lme" => Ok(Problem::LMe),
            "L_GE" | "lge" => Ok(Problem::LGe),
            "NI" | "ni" => Ok(Problem::Ni),
            other => Err(format!("unknown problem {other:?}")),
        }
    }
}

/// Decision result for one problem instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Holds,
    Fails,
    /// The floating-point comparison landed inside the tolerance band.
    UnknownWithinTolerance,
    /// A resource limit stopped the method (solver cap, product too large,
    /// or the witness bound exhausted its power).
    UnknownResource,
}

/// Which engine produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Oracle,
    KobsSat,
    KsafetySat,
    WitnessBound,
}

/// One witness run: a high input and the output it produces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub input: String,
    pub output: String,
}

/// The exact measure value backing an oracle verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub kind: MeasureKind,
    pub exact: String,
    pub value: f64,
}

/// A decided problem instance, serializable as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub problem: Problem,
    /// Threshold as `p/r` (0/1 for non-interference).
    pub q: String,
    pub outcome: Outcome,
    pub method: Method,
    /// Copy count of the self-composition, where one was built.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<u64>,
    /// Witness runs, when the verdict is backed by concrete inputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub evidence: Option<Vec<Witness>>,
    /// Exact measure value, when the oracle computed one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_value: Option<ExactValue>,
}

/// Options shared by all deciders.
#[derive(Debug, Clone)]
pub struct DecideOptions {
    pub exec: ExecOptions,
    pub limits: SolverLimits,
    pub mode: Mode,
}

impl Default for DecideOptions {
    fn default() -> Self {
        DecideOptions {
            exec: ExecOptions::default(),
            limits: SolverLimits::default(),
            mode: Mode::Final,
        }
    }
}

/// Why a decider could not run at all (distinct from an unknown outcome).
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecideError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Wp(#[from] WpError),
    #[error(transparent)]
    Compose(#[from] ComposeError),
}

/// Self-compositions beyond this many copies are refused as a resource
/// matter; the SAT instances would be far beyond desk scale anyway.
const MAX_COPIES: u64 = 10_000;

fn outcome_of(c: CompareOutcome) -> Outcome {
    match c {
        CompareOutcome::True => Outcome::Holds,
        CompareOutcome::False => Outcome::Fails,
        CompareOutcome::WithinTolerance => Outcome::UnknownWithinTolerance,
    }
}

/// Decides any problem exactly by enumerating the observation table.
pub fn decide_exact(
    problem: Problem,
    p: &Program,
    q: &BigRational,
    opts: &DecideOptions,
) -> Result<Verdict, DecideError> {
    if problem == Problem::Ni {
        return noninterferent(p, NiMethod::Oracle, opts);
    }
    let table = enumerate(p, opts.mode, &opts.exec)?;
    let part = partition(&table);
    let value = problem.measure(&part);
    let outcome = outcome_of(compare(&value, q, problem.relation()));
    Ok(Verdict {
        problem,
        q: rational_string(q),
        outcome,
        method: Method::Oracle,
        k: None,
        evidence: None,
        exact_value: Some(ExactValue {
            kind: value.kind,
            exact: value.exact.to_string(),
            value: value.value,
        }),
    })
}

/// All four measures of a program at once (the oracle route shares one
/// enumeration); used by the CLI `measure` command.
pub fn measure_program(
    p: &Program,
    opts: &DecideOptions,
) -> Result<crate::measure::MeasureReport, DecideError> {
    let table = enumerate(p, opts.mode, &opts.exec)?;
    let part = partition(&table);
    Ok(crate::measure::report(&p.name, opts.mode, &part))
}

/// How to decide non-interference.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NiMethod {
    /// Enumerate and check all observations are equal.
    Oracle,
    /// Two-fold self-composition: the agreement postcondition is valid iff
    /// the program is non-interfering. Loop-free programs only.
    Selfcomp,
}

/// Decides non-interference: every pair of inputs produces the same
/// observation.
pub fn noninterferent(
    p: &Program,
    method: NiMethod,
    opts: &DecideOptions,
) -> Result<Verdict, DecideError> {
    let q = "0/1".to_string();
    match method {
        NiMethod::Oracle => {
            let table = enumerate(p, opts.mode, &opts.exec)?;
            let part = partition(&table);
            if part.sizes.len() == 1 {
                Ok(Verdict {
                    problem: Problem::Ni,
                    q,
                    outcome: Outcome::Holds,
                    method: Method::Oracle,
                    k: None,
                    evidence: None,
                    exact_value: None,
                })
            } else {
                // Two inputs from different classes witness the violation.
                let evidence = part.class_reps[..2]
                    .iter()
                    .map(|&i| Witness {
                        input: table.layout.render_high(&Bits::from_index(
                            i,
                            table.layout.high_bit_count(),
                        )),
                        output: table.rows[i as usize].brief(),
                    })
                    .collect();
                Ok(Verdict {
                    problem: Problem::Ni,
                    q,
                    outcome: Outcome::Fails,
                    method: Method::Oracle,
                    k: None,
                    evidence: Some(evidence),
                    exact_value: None,
                })
            }
        }
        NiMethod::Selfcomp => {
            let c = self_compose(p, 2, Polarity::Agreement)?;
            let w = wp(&c.program, &c.post)?;
            match valid(&w, &opts.limits) {
                ValidityOutcome::Valid => Ok(Verdict {
                    problem: Problem::Ni,
                    q,
                    outcome: Outcome::Holds,
                    method: Method::KsafetySat,
                    k: Some(2),
                    evidence: None,
                    exact_value: None,
                }),
                ValidityOutcome::Invalid(model) => {
                    let witnesses = replay_witnesses(p, 2, &model, opts);
                    assert_distinct_outputs(&witnesses, false);
                    Ok(Verdict {
                        problem: Problem::Ni,
                        q,
                        outcome: Outcome::Fails,
                        method: Method::KsafetySat,
                        k: Some(2),
                        evidence: Some(witnesses),
                        exact_value: None,
                    })
                }
                ValidityOutcome::Unknown => Ok(Verdict {
                    problem: Problem::Ni,
                    q,
                    outcome: Outcome::UnknownResource,
                    method: Method::KsafetySat,
                    k: Some(2),
                    evidence: None,
                    exact_value: None,
                }),
            }
        }
    }
}

/// Decodes the model's `v_i` bits into per-copy inputs and re-executes the
/// base program on each, returning rendered (input, output) pairs. Bits the
/// solver simplified away default to false.
fn replay_witnesses(
    p: &Program,
    k: u64,
    model: &std::collections::BTreeMap<(String, u32), bool>,
    opts: &DecideOptions,
) -> Vec<Witness> {
    let compiled = compile(p);
    let layout = compiled.layout();
    let high_decls: Vec<(&str, u32)> = p
        .decls
        .iter()
        .filter(|d| d.kind == crate::lang::VarKind::High)
        .map(|d| (d.name.as_str(), d.width))
        .collect();
    (1..=k)
        .map(|i| {
            let mut input = Bits::zeros(layout.high_bit_count());
            let mut pos = 0;
            for (name, width) in &high_decls {
                for bit in 0..*width {
                    let key = (format!("{name}_{i}"), bit);
                    if let Some(&v) = model.get(&key) {
                        input.set(pos, v);
                    }
                    pos += 1;
                }
            }
            let obs = compiled
                .run(&input, Mode::Final, &opts.exec)
                .expect("witness replay on a loop-free program");
            let output = match obs {
                Observation::Terminated {
                    final_out: Some(out),
                    ..
                } => layout.render_out(&out),
                other => panic!("witness replay did not terminate: {other:?}"),
            };
            Witness {
                input: layout.render_high(&input),
                output,
            }
        })
        .collect()
}

/// Checks the replayed outputs match the claimed polarity: pairwise
/// distinct, or (for collision evidence) at least one equal pair.
fn assert_distinct_outputs(witnesses: &[Witness], _distinct: bool) {
    for i in 0..witnesses.len() {
        for j in i + 1..witnesses.len() {
            assert_ne!(
                witnesses[i].output, witnesses[j].output,
                "witnesses {i} and {j} collide on replay"
            );
        }
    }
}

fn max_classes(p: &Program) -> u64 {
    let out_bits = p.out_bits();
    if out_bits >= 63 {
        u64::MAX
    } else {
        1u64 << out_bits
    }
}

/// Decides `ME > q` by satisfiability of the k-fold distinctness product:
/// holds iff some `k_for_me(q)` inputs produce pairwise-distinct outputs.
/// Complete for loop-free programs.
pub fn me_lower_kobs(
    p: &Program,
    q: &BigRational,
    opts: &DecideOptions,
) -> Result<Verdict, DecideError> {
    let k = k_for_me(q);
    let base = Verdict {
        problem: Problem::LMe,
        q: rational_string(q),
        outcome: Outcome::UnknownResource,
        method: Method::KobsSat,
        k: Some(k),
        evidence: None,
        exact_value: None,
    };
    // Pigeonhole: more copies than possible outputs means distinctness is
    // unsatisfiable without looking at the program.
    if k > max_classes(p) {
        return Ok(Verdict {
            outcome: Outcome::Fails,
            ..base
        });
    }
    if k > MAX_COPIES {
        return Ok(base);
    }
    let c = self_compose(p, k, Polarity::Collision)?;
    let w = wp(&c.program, &c.post)?;
    let cnf = tseitin(&Formula::not(w));
    match sat(&cnf, &opts.limits) {
        SatOutcome::Sat(model) => {
            let witnesses = replay_witnesses(p, k, &cnf.project(&model), opts);
            assert_distinct_outputs(&witnesses, true);
            Ok(Verdict {
                outcome: Outcome::Holds,
                evidence: Some(witnesses),
                ..base
            })
        }
        SatOutcome::Unsat => Ok(Verdict {
            outcome: Outcome::Fails,
            ..base
        }),
        SatOutcome::Unknown => Ok(base),
    }
}

/// Decides `ME ≤ q` by validity of the k-fold collision product: holds iff
/// every `k_for_me(q)` runs contain a colliding pair. Complete for
/// loop-free programs.
pub fn me_upper_ksafety(
    p: &Program,
    q: &BigRational,
    opts: &DecideOptions,
) -> Result<Verdict, DecideError> {
    let k = k_for_me(q);
    let base = Verdict {
        problem: Problem::UMe,
        q: rational_string(q),
        outcome: Outcome::UnknownResource,
        method: Method::KsafetySat,
        k: Some(k),
        evidence: None,
        exact_value: None,
    };
    // Pigeonhole: the class count can never reach k, so ME ≤ log2(k−1) ≤ q.
    if k > max_classes(p) {
        return Ok(Verdict {
            outcome: Outcome::Holds,
            ..base
        });
    }
    if k > MAX_COPIES {
        return Ok(base);
    }
    let c = self_compose(p, k, Polarity::Collision)?;
    let w = wp(&c.program, &c.post)?;
    match valid(&w, &opts.limits) {
        ValidityOutcome::Valid => Ok(Verdict {
            outcome: Outcome::Holds,
            ..base
        }),
        ValidityOutcome::Invalid(model) => {
            let witnesses = replay_witnesses(p, k, &model, opts);
            assert_distinct_outputs(&witnesses, true);
            Ok(Verdict {
                outcome: Outcome::Fails,
                evidence: Some(witnesses),
                ..base
            })
        }
        ValidityOutcome::Unknown => Ok(base),
    }
}

/// Minimum guessing-entropy leakage over all partitions of `n` inputs into
/// `m` classes: one large class plus singletons maximizes `Σ n_j²`.
pub fn ge_lower_bound(n: u64, m: u64) -> BigRational {
    let n = num_bigint::BigInt::from(n);
    let m = num_bigint::BigInt::from(m);
    BigRational::new((&m - 1) * (2 * &n - &m), 2 * n)
}

/// Sound, incomplete decider for `GE > q`: exhibiting `m` distinct outputs
/// proves `GE ≥ ge_lower_bound(N, m)`, so the search walks m upward until
/// the bound clears q, then tries to witness that many distinct outputs —
/// by SAT on the distinctness product for loop-free programs, by the
/// enumeration oracle otherwise. Returns holds or unknown, never fails.
pub fn ge_lower_witness(
    p: &Program,
    q: &BigRational,
    opts: &DecideOptions,
) -> Result<Verdict, DecideError> {
    let n_high = p.high_bits();
    let n: u64 = if n_high >= 63 {
        u64::MAX
    } else {
        1u64 << n_high
    };
    let cap = k_for_ge(q).min(n);
    let base = Verdict {
        problem: Problem::LGe,
        q: rational_string(q),
        outcome: Outcome::UnknownResource,
        method: Method::WitnessBound,
        k: None,
        evidence: None,
        exact_value: None,
    };
    let m = match (2..=cap).find(|&m| &ge_lower_bound(n, m) > q) {
        Some(m) => m,
        // No class count within the bound's reach clears q.
        None => return Ok(base),
    };
    if m > MAX_COPIES {
        return Ok(base);
    }
    let base = Verdict {
        k: Some(m),
        ..base
    };

    if p.loop_free() {
        let c = self_compose(p, m, Polarity::Distinctness)?;
        let w = wp(&c.program, &c.post)?;
        let cnf = tseitin(&w);
        match sat(&cnf, &opts.limits) {
            SatOutcome::Sat(model) => {
                let witnesses = replay_witnesses(p, m, &cnf.project(&model), opts);
                assert_distinct_outputs(&witnesses, true);
                Ok(Verdict {
                    outcome: Outcome::Holds,
                    evidence: Some(witnesses),
                    ..base
                })
            }
            // Fewer than m distinct outputs exist; the bound method cannot
            // certify anything (larger m would need even more).
            SatOutcome::Unsat => Ok(base),
            SatOutcome::Unknown => Ok(base),
        }
    } else {
        let table = enumerate(p, opts.mode, &opts.exec)?;
        let part = partition(&table);
        if (part.sizes.len() as u64) < m {
            return Ok(base);
        }
        let evidence = part.class_reps[..m as usize]
            .iter()
            .map(|&i| Witness {
                input: table
                    .layout
                    .render_high(&Bits::from_index(i, table.layout.high_bit_count())),
                output: table.rows[i as usize].brief(),
            })
            .collect();
        Ok(Verdict {
            outcome: Outcome::Holds,
            evidence: Some(evidence),
            ..base
        })
    }
}
