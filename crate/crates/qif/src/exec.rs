//! Exact execution of boolean programs.
//!
//! Programs are compiled to a flat instruction list and run by a small-step
//! interpreter over a packed bit store. Because the state space is finite
//! (program counter × store), divergence is decided *exactly*: the moment a
//! configuration repeats, the run is reported as diverged together with the
//! eventually-periodic emission sequence it settles into. A step budget
//! guards against loops whose state space is too large to exhaust; running
//! out of budget is reported as its own error, never as divergence.
//!
//! Two observation modes are supported. In `final` mode (the default) the
//! attacker sees the out-variable tuple at termination and nothing else; in
//! `trace` mode the attacker sees the sequence of tuples emitted by
//! `observe` statements.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::Bits;
use crate::lang::{desugar, Formula, Program, Stmt, StmtKind, VarKind};

/// What the attacker observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Only the out-variable tuple at termination is visible.
    Final,
    /// Only tuples emitted by `observe` statements are visible.
    Trace,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Final => "final",
            Mode::Trace => "trace",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "final" => Ok(Mode::Final),
            "trace" => Ok(Mode::Trace),
            other => Err(format!("unknown mode {other:?}; expected final or trace")),
        }
    }
}

/// Result of running a program on one secret input.
///
/// `Diverged` carries the eventually-periodic emission behaviour in
/// canonical form: the `lasso` is primitive (not a repetition of a shorter
/// block) and the `prefix` is as short as possible. In final mode a
/// diverged run carries no emissions at all.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Observation {
    Terminated {
        /// Tuples emitted by `observe` (trace mode only).
        emissions: Vec<Bits>,
        /// Out tuple at termination (final mode only).
        final_out: Option<Bits>,
    },
    Diverged {
        prefix: Vec<Bits>,
        lasso: Vec<Bits>,
    },
}

impl Observation {
    /// Compact human-readable rendering, e.g. `final 01` or
    /// `diverged [1] ([0 1])^w`.
    pub fn brief(&self) -> String {
        fn seq(v: &[Bits]) -> String {
            let inner: Vec<String> = v.iter().map(Bits::bitstring).collect();
            format!("[{}]", inner.join(" "))
        }
        match self {
            Observation::Terminated {
                emissions,
                final_out: Some(f),
            } if emissions.is_empty() => format!("final {f}"),
            Observation::Terminated {
                emissions,
                final_out,
            } => match final_out {
                Some(f) => format!("emitted {} final {f}", seq(emissions)),
                None => format!("emitted {}", seq(emissions)),
            },
            Observation::Diverged { prefix, lasso } => {
                format!("diverged {} ({})^w", seq(prefix), seq(lasso))
            }
        }
    }

    /// Serializes the observation as `{kind, emissions, lasso, final}`.
    pub fn to_json(&self) -> serde_json::Value {
        fn strings(v: &[Bits]) -> serde_json::Value {
            serde_json::Value::Array(
                v.iter()
                    .map(|b| serde_json::Value::String(b.bitstring()))
                    .collect(),
            )
        }
        match self {
            Observation::Terminated {
                emissions,
                final_out,
            } => serde_json::json!({
                "kind": "terminated",
                "emissions": strings(emissions),
                "final": final_out.as_ref().map(|b| b.bitstring()),
            }),
            Observation::Diverged { prefix, lasso } => serde_json::json!({
                "kind": "diverged",
                "emissions": strings(prefix),
                "lasso": strings(lasso),
            }),
        }
    }
}

/// Knobs for execution and enumeration.
#[derive(Debug, Clone)]
pub struct ExecOptions {
    /// Maximum interpreter steps per run; `None` selects
    /// `2^(total_bits + 8)` (capped at `2^62`).
    pub step_budget: Option<u64>,
    /// Maximum total high bits accepted by [`enumerate`].
    pub high_bit_cap: u32,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions {
            step_budget: None,
            high_bit_cap: crate::lang::DEFAULT_HIGH_BIT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("program declares {bits} high bits, above the enumeration cap of {cap}")]
    HighBitCapExceeded { bits: u32, cap: u32 },
    #[error("input has {got} bits but the program declares {expected} high bits")]
    InputWidthMismatch { expected: usize, got: usize },
    #[error(
        "step budget of {budget} exhausted before termination or a repeated state; \
         raise the budget to analyze this program"
    )]
    StepBudgetExceeded { budget: u64 },
}

/// Bit-level memory layout of a program's declarations.
///
/// Global bit offsets assign each declared variable a contiguous span in
/// declaration order. High bits double as the *enumeration order*: bit `k`
/// of an input index corresponds to the `k`-th high bit (declaration
/// order, bit 0 first). Rendered bitstrings are per-variable
/// most-significant-bit-first, concatenated in declaration order, matching
/// the conventional way a single variable's value is written.
#[derive(Debug, Clone)]
pub struct Layout {
    offsets: HashMap<String, (usize, u32, VarKind)>,
    total_bits: usize,
    high: Vec<usize>,
    out: Vec<usize>,
    high_widths: Vec<u32>,
    out_widths: Vec<u32>,
}

impl Layout {
    pub fn new(p: &Program) -> Layout {
        let mut offsets = HashMap::new();
        let mut high = Vec::new();
        let mut out = Vec::new();
        let mut high_widths = Vec::new();
        let mut out_widths = Vec::new();
        let mut base = 0usize;
        for d in &p.decls {
            offsets.insert(d.name.clone(), (base, d.width, d.kind));
            match d.kind {
                VarKind::High => {
                    high.extend((0..d.width as usize).map(|b| base + b));
                    high_widths.push(d.width);
                }
                VarKind::Out => {
                    out.extend((0..d.width as usize).map(|b| base + b));
                    out_widths.push(d.width);
                }
                VarKind::Local => {}
            }
            base += d.width as usize;
        }
        Layout {
            offsets,
            total_bits: base,
            high,
            out,
            high_widths,
            out_widths,
        }
    }

    pub fn total_bits(&self) -> usize {
        self.total_bits
    }

    pub fn high_bit_count(&self) -> usize {
        self.high.len()
    }

    pub fn out_bit_count(&self) -> usize {
        self.out.len()
    }

    fn offset(&self, name: &str, bit: u32) -> usize {
        let (base, width, _) = self
            .offsets
            .get(name)
            .unwrap_or_else(|| panic!("undeclared variable {name:?}; validate the program first"));
        assert!(bit < *width, "bit {bit} out of range for {name:?}");
        base + bit as usize
    }

    /// Extracts the out tuple from a store.
    pub fn out_value(&self, store: &Bits) -> Bits {
        let mut v = Bits::zeros(self.out.len());
        for (i, &off) in self.out.iter().enumerate() {
            v.set(i, store.get(off));
        }
        v
    }

    fn install_high(&self, store: &mut Bits, h: &Bits) {
        for (i, &off) in self.high.iter().enumerate() {
            store.set(off, h.get(i));
        }
    }

    fn render(widths: &[u32], v: &Bits) -> String {
        let mut s = String::with_capacity(v.len());
        let mut base = 0usize;
        for &w in widths {
            for b in (0..w as usize).rev() {
                s.push(if v.get(base + b) { '1' } else { '0' });
            }
            base += w as usize;
        }
        s
    }

    fn parse(widths: &[u32], s: &str) -> Result<Bits, String> {
        let total: usize = widths.iter().map(|&w| w as usize).sum();
        let chars: Vec<char> = s.chars().collect();
        if chars.len() != total {
            return Err(format!("expected {total} bits, got {}", chars.len()));
        }
        let mut v = Bits::zeros(total);
        let mut base = 0usize;
        let mut at = 0usize;
        for &w in widths {
            for b in (0..w as usize).rev() {
                match chars[at] {
                    '0' => {}
                    '1' => v.set(base + b, true),
                    c => return Err(format!("invalid bit character {c:?}")),
                }
                at += 1;
            }
            base += w as usize;
        }
        Ok(v)
    }

    /// Renders a high-input assignment as a bitstring key.
    pub fn render_high(&self, h: &Bits) -> String {
        Self::render(&self.high_widths, h)
    }

    /// Parses a high-input bitstring, inverse of [`Layout::render_high`].
    pub fn parse_high(&self, s: &str) -> Result<Bits, String> {
        Self::parse(&self.high_widths, s)
    }

    /// Renders an out tuple as a bitstring.
    pub fn render_out(&self, o: &Bits) -> String {
        Self::render(&self.out_widths, o)
    }
}

/// Core formula compiled to store offsets.
#[derive(Debug, Clone)]
enum CompiledFormula {
    True,
    Bit(usize),
    Not(Box<CompiledFormula>),
    And(Box<CompiledFormula>, Box<CompiledFormula>),
}

impl CompiledFormula {
    fn eval(&self, store: &Bits) -> bool {
        match self {
            CompiledFormula::True => true,
            CompiledFormula::Bit(off) => store.get(*off),
            CompiledFormula::Not(a) => !a.eval(store),
            CompiledFormula::And(a, b) => a.eval(store) && b.eval(store),
        }
    }
}

#[derive(Debug, Clone)]
enum Instr {
    /// `store[offset] := formula`
    Set(usize, CompiledFormula),
    /// Jump to the target when the condition is false.
    BranchIfFalse(CompiledFormula, usize),
    Jump(usize),
    Observe,
}

/// A program lowered to instructions, ready to run on many inputs.
#[derive(Debug, Clone)]
pub struct Compiled {
    instrs: Vec<Instr>,
    layout: Layout,
    has_loop: bool,
}

/// Lowers a validated program. Panics on undeclared variables; run
/// [`crate::lang::validate`] first.
pub fn compile(p: &Program) -> Compiled {
    let layout = Layout::new(p);

    fn cf(f: &std::sync::Arc<Formula>, layout: &Layout) -> CompiledFormula {
        fn go(f: &Formula, layout: &Layout) -> CompiledFormula {
            match f {
                Formula::True => CompiledFormula::True,
                Formula::Var { name, bit } => CompiledFormula::Bit(layout.offset(name, *bit)),
                Formula::Not(a) => CompiledFormula::Not(Box::new(go(a, layout))),
                Formula::And(a, b) => CompiledFormula::And(
                    Box::new(go(a, layout)),
                    Box::new(go(b, layout)),
                ),
                _ => unreachable!("desugar left a sugared constructor"),
            }
        }
        go(&desugar(f), layout)
    }

    fn emit(s: &Stmt, instrs: &mut Vec<Instr>, layout: &Layout) {
        match &s.kind {
            StmtKind::Skip => {}
            StmtKind::Observe => instrs.push(Instr::Observe),
            StmtKind::Assign { var, bit, value } => {
                instrs.push(Instr::Set(layout.offset(var, *bit), cf(value, layout)));
            }
            StmtKind::Seq(a, b) => {
                emit(a, instrs, layout);
                emit(b, instrs, layout);
            }
            StmtKind::If {
                cond,
                then_branch,
                else_branch,
            } => {
                let branch_at = instrs.len();
                instrs.push(Instr::BranchIfFalse(cf(cond, layout), usize::MAX));
                emit(then_branch, instrs, layout);
                let jump_at = instrs.len();
                instrs.push(Instr::Jump(usize::MAX));
                let else_start = instrs.len();
                if let Instr::BranchIfFalse(_, t) = &mut instrs[branch_at] {
                    *t = else_start;
                }
                emit(else_branch, instrs, layout);
                let end = instrs.len();
                if let Instr::Jump(t) = &mut instrs[jump_at] {
                    *t = end;
                }
            }
            StmtKind::While { cond, body } => {
                let head = instrs.len();
                instrs.push(Instr::BranchIfFalse(cf(cond, layout), usize::MAX));
                emit(body, instrs, layout);
                instrs.push(Instr::Jump(head));
                let exit = instrs.len();
                if let Instr::BranchIfFalse(_, t) = &mut instrs[head] {
                    *t = exit;
                }
            }
        }
    }

    let mut instrs = Vec::new();
    emit(&p.body, &mut instrs, &layout);
    Compiled {
        instrs,
        has_loop: !p.loop_free(),
        layout,
    }
}

impl Compiled {
    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    /// Runs the compiled program on one secret input.
    pub fn run(&self, h: &Bits, mode: Mode, opts: &ExecOptions) -> Result<Observation, ExecError> {
        if h.len() != self.layout.high.len() {
            return Err(ExecError::InputWidthMismatch {
                expected: self.layout.high.len(),
                got: h.len(),
            });
        }
        let budget = opts.step_budget.unwrap_or_else(|| {
            1u64 << (self.layout.total_bits as u64 + 8).min(62)
        });

        let mut store = Bits::zeros(self.layout.total_bits);
        self.layout.install_high(&mut store, h);

        let mut emissions: Vec<Bits> = Vec::new();
        let mut seen: HashMap<(usize, Vec<u64>), usize> = HashMap::new();
        let mut pc = 0usize;
        let mut steps = 0u64;

        loop {
            if pc == self.instrs.len() {
                return Ok(Observation::Terminated {
                    emissions,
                    final_out: match mode {
                        Mode::Final => Some(self.layout.out_value(&store)),
                        Mode::Trace => None,
                    },
                });
            }
            if self.has_loop {
                let key = (pc, store.words().to_vec());
                if let Some(&first) = seen.get(&key) {
                    let lasso = emissions.split_off(first);
                    let (prefix, lasso) = canonicalize_lasso(emissions, lasso);
                    return Ok(Observation::Diverged { prefix, lasso });
                }
                seen.insert(key, emissions.len());
            }
            steps += 1;
            if steps > budget {
                return Err(ExecError::StepBudgetExceeded { budget });
            }
            match &self.instrs[pc] {
                Instr::Set(off, f) => {
                    let v = f.eval(&store);
                    store.set(*off, v);
                    pc += 1;
                }
                Instr::BranchIfFalse(f, target) => {
                    pc = if f.eval(&store) { pc + 1 } else { *target };
                }
                Instr::Jump(target) => pc = *target,
                Instr::Observe => {
                    if mode == Mode::Trace {
                        emissions.push(self.layout.out_value(&store));
                    }
                    pc += 1;
                }
            }
        }
    }
}

/// Reduces a detected cycle to canonical form: the lasso becomes its
/// primitive period, then the prefix is rolled into the lasso as far as
/// possible so the prefix is minimal. Two diverged observations denote the
/// same infinite emission sequence iff their canonical forms are equal.
fn canonicalize_lasso(mut prefix: Vec<Bits>, lasso: Vec<Bits>) -> (Vec<Bits>, Vec<Bits>) {
    if lasso.is_empty() {
        return (prefix, lasso);
    }
    let n = lasso.len();
    let mut period = n;
    for d in 1..=n / 2 {
        if n.is_multiple_of(d) && (0..n).all(|i| lasso[i] == lasso[i % d]) {
            period = d;
            break;
        }
    }
    let mut lasso: Vec<Bits> = lasso[..period].to_vec();
    while let Some(last) = prefix.last() {
        if lasso.last() == Some(last) {
            prefix.pop();
            lasso.rotate_right(1);
        } else {
            break;
        }
    }
    (prefix, lasso)
}

/// Runs a program on one secret input. See [`Compiled::run`].
pub fn run(
    p: &Program,
    h: &Bits,
    mode: Mode,
    opts: &ExecOptions,
) -> Result<Observation, ExecError> {
    compile(p).run(h, mode, opts)
}

/// The observation of every secret input, indexed by input number.
#[derive(Debug, Clone)]
pub struct ObservationTable {
    pub program: String,
    pub mode: Mode,
    pub layout: Layout,
    /// `rows[i]` is the observation for input index `i`.
    pub rows: Vec<Observation>,
}

impl ObservationTable {
    pub fn n_inputs(&self) -> u64 {
        self.rows.len() as u64
    }

    /// The bitstring key of input index `i`.
    pub fn key(&self, i: u64) -> String {
        self.layout
            .render_high(&Bits::from_index(i, self.layout.high_bit_count()))
    }

    /// Serializes the whole table keyed by input bitstrings.
    pub fn to_json(&self) -> serde_json::Value {
        let mut entries = serde_json::Map::new();
        for (i, obs) in self.rows.iter().enumerate() {
            entries.insert(self.key(i as u64), obs.to_json());
        }
        serde_json::json!({
            "program": self.program,
            "mode": self.mode,
            "entries": entries,
        })
    }
}

/// Runs a program on every secret input.
///
/// Fails if the program declares more high bits than the configured cap or
/// if any single run exhausts the step budget. The result is deterministic:
/// inputs are evaluated independently, so evaluation order cannot matter.
pub fn enumerate(p: &Program, mode: Mode, opts: &ExecOptions) -> Result<ObservationTable, ExecError> {
    let compiled = compile(p);
    let nh = compiled.layout.high_bit_count();
    if nh as u32 > opts.high_bit_cap {
        return Err(ExecError::HighBitCapExceeded {
            bits: nh as u32,
            cap: opts.high_bit_cap,
        });
    }
    let count: u64 = 1u64 << nh;
    let mut rows = Vec::with_capacity(count as usize);
    for i in 0..count {
        rows.push(compiled.run(&Bits::from_index(i, nh), mode, opts)?);
    }
    Ok(ObservationTable {
        program: p.name.clone(),
        mode,
        layout: compiled.layout,
        rows,
    })
}

/// The termination-insensitive trace rule: two observations are equivalent
/// when their emission streams agree at every index where *both* are still
/// emitting; once a stream ends, the remaining positions match anything.
///
/// Note this relation is deliberately not transitive: `[0]` is equivalent
/// to both `[0,0]` and `[0,1]`, which differ. Partitioning therefore groups
/// by exact observation equality and only *flags* when this looser relation
/// would have merged classes.
pub fn trace_equiv(a: &Observation, b: &Observation) -> bool {
    fn at(o: &Observation, i: usize) -> Option<&Bits> {
        match o {
            Observation::Terminated { emissions, .. } => emissions.get(i),
            Observation::Diverged { prefix, lasso } => {
                if i < prefix.len() {
                    Some(&prefix[i])
                } else if lasso.is_empty() {
                    None
                } else {
                    Some(&lasso[(i - prefix.len()) % lasso.len()])
                }
            }
        }
    }
    // `Some(n)` when the stream stops emitting after `n` tuples.
    fn finite_len(o: &Observation) -> Option<usize> {
        match o {
            Observation::Terminated { emissions, .. } => Some(emissions.len()),
            Observation::Diverged { prefix, lasso } => {
                lasso.is_empty().then_some(prefix.len())
            }
        }
    }
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    let bound = match (finite_len(a), finite_len(b)) {
        (Some(x), Some(y)) => x.max(y),
        (Some(x), None) => x,
        (None, Some(y)) => y,
        (None, None) => {
            let (pa, la) = match a {
                Observation::Diverged { prefix, lasso } => (prefix.len(), lasso.len()),
                _ => unreachable!(),
            };
            let (pb, lb) = match b {
                Observation::Diverged { prefix, lasso } => (prefix.len(), lasso.len()),
                _ => unreachable!(),
            };
            pa.max(pb) + la / gcd(la, lb) * lb
        }
    };
    (0..bound).all(|i| match (at(a, i), at(b, i)) {
        (Some(x), Some(y)) => x == y,
        _ => true,
    })
}

/// Mode-aware observational equivalence. In final mode two terminated runs
/// are equivalent iff their finals agree, and a diverged run (which shows
/// the attacker nothing) is equivalent to anything; in trace mode this is
/// [`trace_equiv`].
pub fn equiv(mode: Mode, a: &Observation, b: &Observation) -> bool {
    match mode {
        Mode::Trace => trace_equiv(a, b),
        Mode::Final => match (a, b) {
            (
                Observation::Terminated { final_out: fa, .. },
                Observation::Terminated { final_out: fb, .. },
            ) => fa == fb,
            _ => true,
        },
    }
}

#[cfg(test)]
mod tests;
