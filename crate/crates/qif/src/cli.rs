//! Command-line front end: parse, run, measure, decide, ni, compose, wp,
//! and corpus regression runs.
//!
//! Exit codes are part of the contract so the binary can drive scripts:
//! 0 means success (or a verdict that holds), 1 means a verdict fails or a
//! corpus expectation is violated, 2 means a usage or input error (with a
//! one-line diagnostic on stderr), and 3 means the analysis gave up
//! (tolerance or resource limit) without a verdict either way.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Deserialize;
use serde_json::json;

use crate::decide::{
    decide_exact, ge_lower_witness, me_lower_kobs, me_upper_ksafety, measure_program,
    noninterferent, DecideError, DecideOptions, NiMethod, Outcome, Problem, Verdict,
};
use crate::exec::{compile, ExecError, Layout, Mode};
use crate::lang::{self, Formula, Program};
use crate::measure::{parse_rational, rational_string, MeasureKind, MeasureReport};
use crate::selfcomp::{self, Polarity};
use crate::solver::{dag_size, export_dimacs, tseitin, wp};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_UNKNOWN: i32 = 3;

/// Thresholds for min-entropy problems run through the exact comparison
/// kernel, whose cost grows with the threshold's denominator.
const MAX_ME_DENOM: u64 = 1_000_000;

/// Formulas are only pretty-printed when their expanded tree stays below
/// this many nodes; weakest preconditions are DAGs and can print much
/// larger than they are.
const MAX_PRINT_NODES: usize = 20_000;

#[derive(Parser)]
#[command(
    name = "qif",
    version,
    about = "Quantitative information flow for boolean programs",
    max_term_width = 100
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format for results on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Maximum total high bits accepted for enumeration.
    #[arg(long, global = true, value_name = "BITS")]
    cap: Option<u32>,

    /// Interpreter step budget per run.
    #[arg(long, global = true, value_name = "STEPS")]
    budget: Option<u64>,

    /// SAT solver decision limit.
    #[arg(long, global = true, value_name = "N")]
    decisions: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Human,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Final,
    Trace,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Final => Mode::Final,
            ModeArg::Trace => Mode::Trace,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProblemArg {
    Use,
    Ume,
    Uge,
    Lse,
    Lme,
    Lge,
}

impl From<ProblemArg> for Problem {
    fn from(p: ProblemArg) -> Problem {
        match p {
            ProblemArg::Use => Problem::USe,
            ProblemArg::Ume => Problem::UMe,
            ProblemArg::Uge => Problem::UGe,
            ProblemArg::Lse => Problem::LSe,
            ProblemArg::Lme => Problem::LMe,
            ProblemArg::Lge => Problem::LGe,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DecideMethodArg {
    /// Enumerate all inputs and compare the exact measure.
    Oracle,
    /// Self-composition and SAT on the weakest precondition.
    Sat,
}

#[derive(Clone, Copy, ValueEnum)]
enum NiMethodArg {
    Oracle,
    Selfcomp,
}

#[derive(Clone, Copy, ValueEnum)]
enum PolarityArg {
    Distinctness,
    Collision,
    Agreement,
}

impl From<PolarityArg> for Polarity {
    fn from(p: PolarityArg) -> Polarity {
        match p {
            PolarityArg::Distinctness => Polarity::Distinctness,
            PolarityArg::Collision => Polarity::Collision,
            PolarityArg::Agreement => Polarity::Agreement,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a program, printing its canonical form.
    Parse { file: PathBuf },

    /// Run a program on one secret input.
    Run {
        file: PathBuf,
        /// Secret input as a bitstring, one block per high variable,
        /// most significant bit first (e.g. 10 or 0110).
        #[arg(long)]
        input: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Final)]
        mode: ModeArg,
    },

    /// Compute all four measures by exhaustive enumeration.
    Measure {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Final)]
        mode: ModeArg,
    },

    /// Decide one bounding problem against a threshold.
    Decide {
        #[arg(value_enum)]
        problem: ProblemArg,
        file: PathBuf,
        /// Threshold as exact rational text: p/r, an integer, or a finite
        /// decimal such as 0.75.
        #[arg(long)]
        q: String,
        #[arg(long, value_enum, default_value_t = DecideMethodArg::Oracle)]
        method: DecideMethodArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Final)]
        mode: ModeArg,
    },

    /// Decide non-interference.
    Ni {
        file: PathBuf,
        #[arg(long, value_enum, default_value_t = NiMethodArg::Oracle)]
        method: NiMethodArg,
        #[arg(long, value_enum, default_value_t = ModeArg::Final)]
        mode: ModeArg,
    },

    /// Build the k-fold self-composition with a postcondition.
    Compose {
        file: PathBuf,
        /// Number of copies (at least 2).
        #[arg(long)]
        k: u64,
        /// Postcondition over the copies' outputs.
        #[arg(long, value_enum)]
        post: PolarityArg,
    },

    /// Compute the weakest precondition of a postcondition.
    Wp {
        file: PathBuf,
        /// Postcondition formula over the program's variables; defaults to
        /// the file's trailing assert(...) annotation.
        #[arg(long)]
        post: Option<String>,
        /// Negate before CNF conversion (satisfiable iff the
        /// postcondition is not valid).
        #[arg(long)]
        negate: bool,
        /// Write the Tseitin CNF of the (possibly negated) precondition
        /// to this path in DIMACS format.
        #[arg(long, value_name = "FILE")]
        dimacs: Option<PathBuf>,
    },

    /// Corpus operations.
    Corpus {
        #[command(subcommand)]
        action: CorpusCommand,
    },
}

#[derive(Subcommand)]
enum CorpusCommand {
    /// Check every corpus program against its manifest entry.
    Run {
        /// Directory holding programs and manifest.json.
        #[arg(long, default_value = "corpus")]
        dir: PathBuf,
    },
}

/// A diagnostic plus the exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

fn fail(code: i32, message: impl Into<String>) -> Failure {
    Failure {
        code,
        message: message.into(),
    }
}

impl From<DecideError> for Failure {
    fn from(e: DecideError) -> Failure {
        let code = match &e {
            DecideError::Exec(ExecError::StepBudgetExceeded { .. }) => EXIT_UNKNOWN,
            _ => EXIT_USAGE,
        };
        fail(code, e.to_string())
    }
}

/// Entry point used by `main`; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("qif: {}", f.message);
            f.code
        }
    }
}

fn options(cli: &Cli, mode: Mode) -> DecideOptions {
    let mut opts = DecideOptions {
        mode,
        ..DecideOptions::default()
    };
    if let Some(cap) = cli.cap {
        opts.exec.high_bit_cap = cap;
    }
    if let Some(budget) = cli.budget {
        opts.exec.step_budget = Some(budget);
    }
    if let Some(decisions) = cli.decisions {
        opts.limits.max_decisions = decisions;
    }
    opts
}

fn dispatch(cli: &Cli) -> Result<i32, Failure> {
    match &cli.command {
        Command::Parse { file } => cmd_parse(cli, file),
        Command::Run { file, input, mode } => cmd_run(cli, file, input, (*mode).into()),
        Command::Measure { file, mode } => cmd_measure(cli, file, (*mode).into()),
        Command::Decide {
            problem,
            file,
            q,
            method,
            mode,
        } => cmd_decide(cli, (*problem).into(), file, q, *method, (*mode).into()),
        Command::Ni { file, method, mode } => cmd_ni(cli, file, *method, (*mode).into()),
        Command::Compose { file, k, post } => cmd_compose(cli, file, *k, (*post).into()),
        Command::Wp {
            file,
            post,
            negate,
            dimacs,
        } => cmd_wp(cli, file, post.as_deref(), *negate, dimacs.as_deref()),
        Command::Corpus {
            action: CorpusCommand::Run { dir },
        } => cmd_corpus_run(cli, dir),
    }
}

/// Reads, parses, and validates a program file. Accepts an optional
/// trailing assert annotation, which most commands ignore.
fn load_program(cli: &Cli, path: &Path) -> Result<(Program, Option<Arc<Formula>>), Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| fail(EXIT_USAGE, format!("cannot read {}: {e}", path.display())))?;
    let (program, post) = lang::parse_annotated(&text)
        .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", path.display())))?;
    let cap = cli.cap.unwrap_or(lang::DEFAULT_HIGH_BIT_CAP);
    let report = lang::validate_with_cap(&program, cap);
    if !report.is_ok() {
        let all = report
            .violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(fail(EXIT_USAGE, format!("{}: {all}", path.display())));
    }
    Ok((program, post))
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

fn cmd_parse(cli: &Cli, file: &Path) -> Result<i32, Failure> {
    let text = fs::read_to_string(file)
        .map_err(|e| fail(EXIT_USAGE, format!("cannot read {}: {e}", file.display())))?;
    let (program, post) = lang::parse_annotated(&text)
        .map_err(|e| fail(EXIT_USAGE, format!("{}: {e}", file.display())))?;
    let cap = cli.cap.unwrap_or(lang::DEFAULT_HIGH_BIT_CAP);
    let report = lang::validate_with_cap(&program, cap);
    let violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    let mut canonical = program.to_source();
    if let Some(f) = &post {
        canonical.push_str(&format!("assert({f});\n"));
    }
    match cli.format {
        Format::Json => print_json(&json!({
            "program": program.name,
            "high_bits": program.high_bits(),
            "out_bits": program.out_bits(),
            "loop_free": program.loop_free(),
            "canonical": canonical,
            "post": post.map(|f| f.to_string()),
            "violations": violations,
        })),
        Format::Human => {
            if violations.is_empty() {
                print!("{canonical}");
            } else {
                for v in &violations {
                    println!("violation: {v}");
                }
            }
        }
    }
    Ok(if violations.is_empty() {
        EXIT_OK
    } else {
        EXIT_FAILS
    })
}

fn cmd_run(cli: &Cli, file: &Path, input: &str, mode: Mode) -> Result<i32, Failure> {
    let (program, _) = load_program(cli, file)?;
    let layout = Layout::new(&program);
    let bits = layout
        .parse_high(input)
        .map_err(|e| fail(EXIT_USAGE, format!("bad --input: {e}")))?;
    let opts = options(cli, mode);
    let obs = compile(&program)
        .run(&bits, mode, &opts.exec)
        .map_err(|e| Failure::from(DecideError::from(e)))?;
    match cli.format {
        Format::Json => print_json(&json!({
            "program": program.name,
            "mode": mode.to_string(),
            "input": layout.render_high(&bits),
            "observation": obs.to_json(),
        })),
        Format::Human => println!("{} => {}", layout.render_high(&bits), obs.brief()),
    }
    Ok(EXIT_OK)
}

fn print_measure_human(r: &MeasureReport) {
    let sizes = r
        .class_sizes
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    println!(
        "program {}, mode {}: N={}, classes [{sizes}]",
        r.program, r.mode, r.n_inputs
    );
    println!("SE = {}  ({})", r.se, r.exact_forms.se);
    println!("ME = {}  ({})", r.me, r.exact_forms.me);
    println!("GE = {}  ({})", r.ge, r.exact_forms.ge);
    println!("CC = {}  ({})", r.cc, r.exact_forms.cc);
    for w in &r.warnings {
        println!("warning: {w}");
    }
}

fn cmd_measure(cli: &Cli, file: &Path, mode: Mode) -> Result<i32, Failure> {
    let (program, _) = load_program(cli, file)?;
    let opts = options(cli, mode);
    let report = measure_program(&program, &opts)?;
    match cli.format {
        Format::Json => print_json(&serde_json::to_value(&report).expect("json")),
        Format::Human => print_measure_human(&report),
    }
    Ok(EXIT_OK)
}

fn kind_name(k: MeasureKind) -> &'static str {
    match k {
        MeasureKind::Se => "SE",
        MeasureKind::Me => "ME",
        MeasureKind::Ge => "GE",
        MeasureKind::Cc => "CC",
    }
}

fn print_verdict_human(v: &Verdict) {
    let outcome = match v.outcome {
        Outcome::Holds => "holds",
        Outcome::Fails => "fails",
        Outcome::UnknownWithinTolerance => "unknown (within tolerance)",
        Outcome::UnknownResource => "unknown (resource limit)",
    };
    let method = serde_json::to_value(v.method).expect("json");
    let method = method.as_str().expect("method name");
    let mut line = format!("{} q={}: {outcome}  (method {method}", v.problem, v.q);
    if let Some(k) = v.k {
        line.push_str(&format!(", k={k}"));
    }
    line.push(')');
    println!("{line}");
    if let Some(ev) = &v.evidence {
        for w in ev {
            println!("  witness: input {} -> {}", w.input, w.output);
        }
    }
    if let Some(x) = &v.exact_value {
        println!("  exact {} = {} ({})", kind_name(x.kind), x.value, x.exact);
    }
}

fn print_verdict(format: Format, v: &Verdict) -> i32 {
    match format {
        Format::Json => print_json(&serde_json::to_value(v).expect("json")),
        Format::Human => print_verdict_human(v),
    }
    match v.outcome {
        Outcome::Holds => EXIT_OK,
        Outcome::Fails => EXIT_FAILS,
        Outcome::UnknownWithinTolerance | Outcome::UnknownResource => EXIT_UNKNOWN,
    }
}

fn parse_threshold(text: &str) -> Result<BigRational, Failure> {
    parse_rational(text).map_err(|e| fail(EXIT_USAGE, format!("bad --q: {e}")))
}

fn cmd_decide(
    cli: &Cli,
    problem: Problem,
    file: &Path,
    q_text: &str,
    method: DecideMethodArg,
    mode: Mode,
) -> Result<i32, Failure> {
    let q = parse_threshold(q_text)?;
    if matches!(problem, Problem::UMe | Problem::LMe) && *q.denom() > BigInt::from(MAX_ME_DENOM) {
        return Err(fail(
            EXIT_USAGE,
            format!(
                "threshold denominator {} is too large for the exact min-entropy \
                 comparison (max {MAX_ME_DENOM})",
                q.denom()
            ),
        ));
    }
    let (program, _) = load_program(cli, file)?;
    let opts = options(cli, mode);
    let verdict = match method {
        DecideMethodArg::Oracle => decide_exact(problem, &program, &q, &opts)?,
        DecideMethodArg::Sat => {
            if mode == Mode::Trace {
                return Err(fail(
                    EXIT_USAGE,
                    "SAT deciders analyze the final observation; use --method oracle \
                     for trace mode",
                ));
            }
            match problem {
                Problem::LMe => me_lower_kobs(&program, &q, &opts)?,
                Problem::UMe => me_upper_ksafety(&program, &q, &opts)?,
                Problem::LGe => ge_lower_witness(&program, &q, &opts)?,
                Problem::USe | Problem::LSe => {
                    return Err(fail(
                        EXIT_USAGE,
                        "Shannon entropy thresholds have no SAT decider; use --method oracle",
                    ));
                }
                Problem::UGe => {
                    return Err(fail(
                        EXIT_USAGE,
                        "guessing-entropy upper bounds have no SAT decider; use --method oracle",
                    ));
                }
                Problem::Ni => unreachable!("ni has its own subcommand"),
            }
        }
    };
    Ok(print_verdict(cli.format, &verdict))
}

fn cmd_ni(cli: &Cli, file: &Path, method: NiMethodArg, mode: Mode) -> Result<i32, Failure> {
    let (program, _) = load_program(cli, file)?;
    let opts = options(cli, mode);
    let method = match method {
        NiMethodArg::Oracle => NiMethod::Oracle,
        NiMethodArg::Selfcomp => {
            if mode == Mode::Trace {
                return Err(fail(
                    EXIT_USAGE,
                    "the self-composition check analyzes the final observation; use \
                     --method oracle for trace mode",
                ));
            }
            NiMethod::Selfcomp
        }
    };
    let verdict = noninterferent(&program, method, &opts)?;
    Ok(print_verdict(cli.format, &verdict))
}

fn cmd_compose(cli: &Cli, file: &Path, k: u64, polarity: Polarity) -> Result<i32, Failure> {
    let (program, _) = load_program(cli, file)?;
    let composed =
        selfcomp::self_compose(&program, k, polarity).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    match cli.format {
        Format::Json => print_json(&json!({
            "base": composed.base,
            "k": composed.k,
            "polarity": composed.polarity.to_string(),
            "name": composed.program.name,
            "source": composed.to_source(),
        })),
        Format::Human => print!("{}", composed.to_source()),
    }
    Ok(EXIT_OK)
}

/// Counts expanded tree nodes, giving up at `cap`; shared subterms print
/// once per reference, so this bounds the printed size.
fn capped_tree_size(f: &Arc<Formula>, cap: usize) -> Option<usize> {
    let mut stack = vec![f.clone()];
    let mut count = 0usize;
    while let Some(node) = stack.pop() {
        count += 1;
        if count > cap {
            return None;
        }
        match node.as_ref() {
            Formula::True | Formula::False | Formula::Var { .. } => {}
            Formula::Not(a) => stack.push(a.clone()),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Xor(a, b) | Formula::Eq(a, b) => {
                stack.push(a.clone());
                stack.push(b.clone());
            }
        }
    }
    Some(count)
}

fn cmd_wp(
    cli: &Cli,
    file: &Path,
    post_text: Option<&str>,
    negate: bool,
    dimacs: Option<&Path>,
) -> Result<i32, Failure> {
    let (program, embedded) = load_program(cli, file)?;
    let post = match post_text {
        Some(text) => lang::parse_formula_with(&program, text)
            .map_err(|e| fail(EXIT_USAGE, format!("bad --post: {e}")))?,
        None => embedded.ok_or_else(|| {
            fail(
                EXIT_USAGE,
                "no postcondition: pass --post or annotate the file with a trailing assert(...)",
            )
        })?,
    };
    let pre = wp(&program, &post).map_err(|e| fail(EXIT_USAGE, e.to_string()))?;
    let formula = if negate { Formula::not(pre) } else { pre };
    let nodes = dag_size(&formula);
    let printed = capped_tree_size(&formula, MAX_PRINT_NODES).map(|_| formula.to_string());
    let cnf = tseitin(&formula);
    if let Some(out) = dimacs {
        fs::write(out, export_dimacs(&cnf))
            .map_err(|e| fail(EXIT_USAGE, format!("cannot write {}: {e}", out.display())))?;
    }
    match cli.format {
        Format::Json => print_json(&json!({
            "program": program.name,
            "post": post.to_string(),
            "negated": negate,
            "wp": printed,
            "dag_size": nodes,
            "cnf_vars": cnf.num_vars,
            "cnf_clauses": cnf.clauses.len(),
            "dimacs": dimacs.map(|p| p.display().to_string()),
        })),
        Format::Human => {
            println!("program {}, post {post}", program.name);
            match &printed {
                Some(text) => println!("wp = {text}"),
                None => println!("wp = (elided: {nodes} dag nodes)"),
            }
            if negate {
                println!("negated before CNF conversion");
            }
            println!("cnf: {} vars, {} clauses", cnf.num_vars, cnf.clauses.len());
            if let Some(out) = dimacs {
                println!("wrote {}", out.display());
            }
        }
    }
    Ok(EXIT_OK)
}

fn default_mode() -> Mode {
    Mode::Final
}

/// One program's expected measures in `corpus/manifest.json`.
#[derive(Debug, Deserialize)]
struct ManifestEntry {
    #[serde(default = "default_mode")]
    mode: Mode,
    #[serde(rename = "N")]
    n: u64,
    class_sizes: Vec<u64>,
    /// Shannon leakage in bits, checked to 1e-9.
    #[serde(rename = "SE")]
    se: f64,
    /// Number of observation classes; fixes ME and CC exactly.
    me_classes: u64,
    /// Guessing-entropy leakage as exact rational text.
    #[serde(rename = "GE")]
    ge: String,
    /// Whether the program is non-interfering in this mode.
    ni: bool,
    /// Substrings that must appear among the report's warnings.
    #[serde(default)]
    warnings_contain: Vec<String>,
}

fn diff(bad: &mut Vec<String>, file: &str, measure: &str, expected: &str, got: &str) {
    if expected != got {
        bad.push(format!("{file}: {measure}: expected {expected}, got {got}"));
    }
}

fn check_entry(file: &str, entry: &ManifestEntry, report: &MeasureReport) -> Vec<String> {
    let mut bad = Vec::new();
    diff(
        &mut bad,
        file,
        "N",
        &entry.n.to_string(),
        &report.n_inputs.to_string(),
    );
    diff(
        &mut bad,
        file,
        "class_sizes",
        &format!("{:?}", entry.class_sizes),
        &format!("{:?}", report.class_sizes),
    );
    if (report.se - entry.se).abs() > 1e-9 {
        bad.push(format!(
            "{file}: SE: expected {} within 1e-9, got {}",
            entry.se, report.se
        ));
    }
    let me_expected = format!("log2({})", entry.me_classes);
    diff(&mut bad, file, "ME", &me_expected, &report.exact_forms.me);
    diff(&mut bad, file, "CC", &me_expected, &report.exact_forms.cc);
    match parse_rational(&entry.ge) {
        Ok(ge) => diff(
            &mut bad,
            file,
            "GE",
            &rational_string(&ge),
            &report.exact_forms.ge,
        ),
        Err(e) => bad.push(format!(
            "{file}: GE: unreadable expectation {:?}: {e}",
            entry.ge
        )),
    }
    let ni_got = report.class_sizes.len() == 1;
    if ni_got != entry.ni {
        bad.push(format!("{file}: NI: expected {}, got {ni_got}", entry.ni));
    }
    for want in &entry.warnings_contain {
        if !report.warnings.iter().any(|w| w.contains(want)) {
            bad.push(format!(
                "{file}: warnings: expected one containing {want:?}, got {:?}",
                report.warnings
            ));
        }
    }
    bad
}

fn cmd_corpus_run(cli: &Cli, dir: &Path) -> Result<i32, Failure> {
    let manifest_path = dir.join("manifest.json");
    let text = fs::read_to_string(&manifest_path).map_err(|e| {
        fail(
            EXIT_USAGE,
            format!("cannot read {}: {e}", manifest_path.display()),
        )
    })?;
    let manifest: BTreeMap<String, ManifestEntry> = serde_json::from_str(&text).map_err(|e| {
        fail(
            EXIT_USAGE,
            format!("{}: malformed manifest: {e}", manifest_path.display()),
        )
    })?;
    if manifest.is_empty() {
        return Err(fail(
            EXIT_USAGE,
            format!("{}: manifest lists no programs", manifest_path.display()),
        ));
    }
    let mut results = Vec::new();
    let mut ok_count = 0usize;
    for (file, entry) in &manifest {
        let path = dir.join(file);
        let (program, _) = load_program(cli, &path)?;
        let opts = options(cli, entry.mode);
        let report = measure_program(&program, &opts)?;
        let mismatches = check_entry(file, entry, &report);
        if mismatches.is_empty() {
            ok_count += 1;
        }
        results.push((file.clone(), mismatches));
    }
    let all_ok = ok_count == results.len();
    match cli.format {
        Format::Json => {
            let programs: Vec<_> = results
                .iter()
                .map(|(file, mismatches)| {
                    json!({
                        "file": file,
                        "ok": mismatches.is_empty(),
                        "mismatches": mismatches,
                    })
                })
                .collect();
            print_json(&json!({
                "dir": dir.display().to_string(),
                "total": results.len(),
                "ok": ok_count,
                "programs": programs,
            }));
        }
        Format::Human => {
            for (file, mismatches) in &results {
                if mismatches.is_empty() {
                    println!("ok       {file}");
                } else {
                    println!("MISMATCH {file}");
                    for line in mismatches {
                        println!("  {line}");
                    }
                }
            }
            println!("corpus: {ok_count}/{} ok", results.len());
        }
    }
    Ok(if all_ok { EXIT_OK } else { EXIT_FAILS })
}
