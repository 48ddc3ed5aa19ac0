//! Tseitin translation to CNF and DIMACS import/export.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::lang::{desugar, Formula};

/// A CNF instance. Variables are 1-based; a literal is `±variable`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cnf {
    pub num_vars: i32,
    pub clauses: Vec<Vec<i32>>,
    /// Program bit → CNF variable, for projecting models back.
    pub named: BTreeMap<(String, u32), i32>,
}

impl Cnf {
    /// Restricts a total CNF model (index `var − 1`) to the named bits.
    pub fn project(&self, model: &[bool]) -> BTreeMap<(String, u32), bool> {
        self.named
            .iter()
            .map(|(k, &v)| (k.clone(), model[(v - 1) as usize]))
            .collect()
    }
}

/// Structure-sharing Tseitin encoding: each distinct conjunction node gets
/// one auxiliary variable (shared subterms are encoded once), negations
/// become negated literals with no variables of their own, and the named
/// program bits take the lowest variable indices in sorted order. The
/// result is equisatisfiable with the formula, and its models projected to
/// the named bits are exactly the formula's models.
pub fn tseitin(f: &Arc<Formula>) -> Cnf {
    // Sugared connectives are rebuilt as trees, which would break DAG
    // sharing — so only desugar when actually needed.
    let core;
    let f = if f.is_core() {
        f
    } else {
        core = desugar(f);
        &core
    };

    let mut named = BTreeMap::new();
    let mut next = 1i32;
    for (name, bit) in f.vars() {
        named.insert((name, bit), next);
        next += 1;
    }

    struct State {
        next: i32,
        clauses: Vec<Vec<i32>>,
        memo: HashMap<usize, i32>,
        true_var: Option<i32>,
    }
    let mut st = State {
        next,
        clauses: Vec::new(),
        memo: HashMap::new(),
        true_var: None,
    };

    fn walk(f: &Arc<Formula>, named: &BTreeMap<(String, u32), i32>, st: &mut State) -> i32 {
        let key = Arc::as_ptr(f) as usize;
        if let Some(&lit) = st.memo.get(&key) {
            return lit;
        }
        let lit = match &**f {
            Formula::True => {
                // One lazily created variable pinned true serves every
                // constant in the formula.
                *st.true_var.get_or_insert_with(|| {
                    let v = st.next;
                    st.next += 1;
                    st.clauses.push(vec![v]);
                    v
                })
            }
            Formula::Var { name, bit } => named[&(name.clone(), *bit)],
            Formula::Not(a) => -walk(a, named, st),
            Formula::And(a, b) => {
                let la = walk(a, named, st);
                let lb = walk(b, named, st);
                let v = st.next;
                st.next += 1;
                st.clauses.push(vec![-v, la]);
                st.clauses.push(vec![-v, lb]);
                st.clauses.push(vec![v, -la, -lb]);
                v
            }
            Formula::False | Formula::Or(..) | Formula::Xor(..) | Formula::Eq(..) => {
                unreachable!("formula was desugared to the core language")
            }
        };
        st.memo.insert(key, lit);
        lit
    }

    let root = walk(f, &named, &mut st);
    // The constant-true unit is already asserted; don't emit it twice.
    if st.true_var != Some(root) {
        st.clauses.push(vec![root]);
    }
    Cnf {
        num_vars: st.next - 1,
        clauses: st.clauses,
        named,
    }
}

/// Renders a CNF in DIMACS format: one comment line per named bit mapping
/// it to its variable index, the `p cnf` header, then one clause per line
/// terminated by 0. The output is deterministic for a given CNF.
pub fn export_dimacs(c: &Cnf) -> String {
    let mut s = String::new();
    let mut by_index: Vec<(&(String, u32), &i32)> = c.named.iter().collect();
    by_index.sort_by_key(|(_, &v)| v);
    for ((name, bit), v) in by_index {
        writeln!(s, "c v {v} {name}[{bit}]").unwrap();
    }
    writeln!(s, "p cnf {} {}", c.num_vars, c.clauses.len()).unwrap();
    for clause in &c.clauses {
        for lit in clause {
            write!(s, "{lit} ").unwrap();
        }
        s.push_str("0\n");
    }
    s
}

/// Parses a model line as printed by DIMACS solvers: space-separated
/// literals, optionally prefixed with `v` and/or terminated by `0`. Every
/// variable of the instance must be assigned exactly once.
pub fn parse_model_line(line: &str, num_vars: i32) -> Result<Vec<bool>, String> {
    let mut model = vec![None; num_vars as usize];
    for tok in line.split_whitespace() {
        if tok == "v" {
            continue;
        }
        let lit: i32 = tok
            .parse()
            .map_err(|_| format!("bad literal {tok:?} in model line"))?;
        if lit == 0 {
            break;
        }
        let var = lit.unsigned_abs() as usize;
        if var > num_vars as usize {
            return Err(format!("literal {lit} out of range (instance has {num_vars} vars)"));
        }
        match model[var - 1] {
            Some(prev) if prev != (lit > 0) => {
                return Err(format!("variable {var} assigned both ways"));
            }
            _ => model[var - 1] = Some(lit > 0),
        }
    }
    model
        .into_iter()
        .enumerate()
        .map(|(i, v)| v.ok_or(format!("variable {} unassigned in model line", i + 1)))
        .collect()
}
