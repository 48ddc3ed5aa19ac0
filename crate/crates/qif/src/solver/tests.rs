use super::*;
use crate::bits::Bits;
use crate::exec::{run, ExecOptions, Mode, Observation};
use crate::lang::{eval, parse, Formula};
use crate::selfcomp::{self_compose, Polarity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

const M1: &str = "program m1;
high h: bool[2];
out o: bool[1];
if (!h[1] & h[0]) then o[0] := false else o[0] := true
";

fn limits() -> SolverLimits {
    SolverLimits::default()
}

// --- the formula builder ---

#[test]
fn builder_hash_conses_and_simplifies() {
    let mut b = FormulaBuilder::new();
    let x = b.var("h", 0);
    let y = b.var("h", 1);

    assert!(Arc::ptr_eq(&b.var("h", 0), &x));
    let a1 = b.and(x.clone(), y.clone());
    let a2 = b.and(y.clone(), x.clone());
    assert!(Arc::ptr_eq(&a1, &a2), "conjunction is cached commutatively");

    let nx = b.not(x.clone());
    assert!(Arc::ptr_eq(&b.not(nx.clone()), &x), "double negation cancels");

    let t = b.t();
    assert!(Arc::ptr_eq(&b.and(t.clone(), y.clone()), &y));
    assert!(Arc::ptr_eq(&b.and(x.clone(), x.clone()), &x));
    let contradiction = b.and(x.clone(), nx);
    assert!(Arc::ptr_eq(&contradiction, &b.f()));
    let f = b.f();
    assert!(Arc::ptr_eq(&b.not(t), &f));
}

#[test]
fn dag_size_counts_shared_nodes_once() {
    let mut b = FormulaBuilder::new();
    let x = b.var("h", 0);
    let y = b.var("h", 1);
    let shared = b.and(x, y);
    let ns = b.not(shared.clone());
    let top = b.and(shared, ns);
    // `shared ∧ ¬shared` simplifies to false = Not(True): 2 nodes.
    assert!(Arc::ptr_eq(&top, &b.f()));
    assert_eq!(dag_size(&top), 2);

    // Without the complement rule: (x ∧ y) ∧ ¬(y ∧ x) built raw shares x∧y.
    let raw = Formula::and(
        Formula::and(Formula::var("h", 0), Formula::var("h", 1)),
        Formula::not(Formula::and(Formula::var("h", 0), Formula::var("h", 1))),
    );
    // Raw constructors don't share: 4 var instances + 3 ands + 1 not.
    assert_eq!(dag_size(&raw), 8);
}

// --- weakest preconditions ---

#[test]
fn wp_of_direct_copy_is_the_input_bit() {
    let p = parse("high h: bool[1];\nout o: bool[1];\no[0] := h[0]\n").unwrap();
    let w = wp(&p, &Formula::var("o", 0)).unwrap();
    assert_eq!(w, Formula::var("h", 0));
}

#[test]
fn wp_of_skip_is_the_postcondition_itself() {
    let p = parse("high h: bool[2];\nout o: bool[1];\nskip\n").unwrap();
    let post = Formula::and(Formula::var("h", 0), Formula::not(Formula::var("h", 1)));
    assert_eq!(wp(&p, &post).unwrap(), post);
    // Out bits start false, so a post over them collapses to false.
    let w = wp(&p, &Formula::var("o", 0)).unwrap();
    assert_eq!(w, Formula::not(Formula::t()));
}

#[test]
fn wp_rejects_loops_with_a_position() {
    let p = parse("high h: bool[1];\nout o: bool[1];\nwhile (h[0]) do skip\n").unwrap();
    match wp(&p, &Formula::var("o", 0)) {
        Err(WpError::LoopNotSupported { pos }) => assert_eq!(pos.line, 3),
        other => panic!("expected loop error, got {other:?}"),
    }
}

#[test]
fn wp_rejects_undeclared_postcondition_bits() {
    let p = parse("high h: bool[1];\nout o: bool[1];\no[0] := h[0]\n").unwrap();
    assert_eq!(
        wp(&p, &Formula::var("z", 0)).unwrap_err(),
        WpError::UnknownVariable {
            name: "z".into(),
            bit: 0
        }
    );
    assert!(wp(&p, &Formula::var("o", 1)).is_err());
}

#[test]
fn identical_branches_merge_without_a_guard() {
    let p = parse(
        "high h: bool[2];
out o: bool[1];
if (h[0]) then o[0] := h[1] else o[0] := h[1]
",
    )
    .unwrap();
    let w = wp(&p, &Formula::var("o", 0)).unwrap();
    assert_eq!(w, Formula::var("h", 1));
}

/// Checks the defining property on every input: `h ⊨ wp(p, post)` iff the
/// final store of running `p` on `h` satisfies `post`.
fn assert_wp_matches_execution(src: &str, post: &Arc<Formula>) {
    let p = parse(src).unwrap();
    let w = wp(&p, post).expect("loop-free");
    let nh = p.high_bits() as usize;
    let compiled = crate::exec::compile(&p);
    for h in 0..1u64 << nh {
        let input = Bits::from_index(h, nh);
        let obs = compiled.run(&input, Mode::Final, &ExecOptions::default()).unwrap();
        let out = match obs {
            Observation::Terminated {
                final_out: Some(out),
                ..
            } => out,
            other => panic!("diverged: {other:?}"),
        };
        // Rebuild the full final store: high bits from the input, other
        // bits from the layout's out tuple (posts over locals are not
        // exercised here).
        let mut o_pos = std::collections::HashMap::new();
        let mut pos = 0;
        for d in p.decls.iter().filter(|d| d.kind == crate::lang::VarKind::Out) {
            for bit in 0..d.width {
                o_pos.insert((d.name.clone(), bit), pos);
                pos += 1;
            }
        }
        let mut h_pos = std::collections::HashMap::new();
        let mut pos = 0;
        for d in p.decls.iter().filter(|d| d.kind == crate::lang::VarKind::High) {
            for bit in 0..d.width {
                h_pos.insert((d.name.clone(), bit), pos);
                pos += 1;
            }
        }
        let post_holds = eval(post, &mut |name, bit| {
            let key = (name.to_string(), bit);
            if let Some(&i) = h_pos.get(&key) {
                input.get(i)
            } else if let Some(&i) = o_pos.get(&key) {
                out.get(i)
            } else {
                panic!("post references {name}[{bit}]")
            }
        });
        let wp_holds = eval(&w, &mut |name, bit| {
            input.get(h_pos[&(name.to_string(), bit)])
        });
        assert_eq!(wp_holds, post_holds, "{src:?} at input {h}");
    }
}

#[test]
fn wp_matches_execution_on_m1() {
    // post: o[0] = true, i.e. the wp should be ¬(¬h[1] ∧ h[0]).
    assert_wp_matches_execution(M1, &Formula::var("o", 0));
    assert_wp_matches_execution(M1, &Formula::not(Formula::var("o", 0)));
}

#[test]
fn wp_matches_execution_on_nested_branches_and_locals() {
    let src = "high h: bool[3];
out o: bool[2];
local t: bool[1];
t[0] := h[0] ^ h[1];
if (t[0]) then {
    if (h[2]) then o[0] := true else o[1] := true
} else {
    o[0] := h[2] & h[0];
    o[1] := !h[1]
}
";
    for post in [
        Formula::var("o", 0),
        Formula::and(Formula::var("o", 0), Formula::not(Formula::var("o", 1))),
        Formula::eq(Formula::var("o", 0), Formula::var("o", 1)),
        Formula::xor(Formula::var("o", 1), Formula::var("h", 0)),
    ] {
        assert_wp_matches_execution(src, &post);
    }
}

#[test]
fn wp_of_sequenced_overwrites_uses_the_last_write() {
    let src = "high h: bool[1];
out o: bool[1];
o[0] := true;
o[0] := !h[0];
o[0] := h[0] & o[0]
";
    // o ends as h[0] ∧ ¬h[0] = false.
    let p = parse(src).unwrap();
    let w = wp(&p, &Formula::var("o", 0)).unwrap();
    assert_eq!(w, Formula::not(Formula::t()));
}

#[test]
fn wp_size_stays_within_the_linear_bound() {
    let sources = [
        M1,
        "high h: bool[4];
out o: bool[2];
local t: bool[2];
t[0] := h[0] ^ h[1];
t[1] := h[2] == h[3];
if (t[0] & t[1]) then { o[0] := h[0]; o[1] := h[3] } else o[0] := t[1];
if (o[0] | h[1]) then o[1] := !o[1] else skip
",
    ];
    for src in sources {
        let p = parse(src).unwrap();
        let post = Formula::and(Formula::var("o", 0), Formula::var("o", 1));
        let post = if p.out_bits() > 1 { post } else { Formula::var("o", 0) };
        let w = wp(&p, &post).unwrap();
        let bound = 10 * p.size() * post.tree_size();
        assert!(
            dag_size(&w) <= bound,
            "{}: wp has {} nodes, bound {bound}",
            p.name,
            dag_size(&w)
        );
    }
}

#[test]
fn passify_orders_definitions_children_first() {
    let p = parse(
        "high h: bool[2];
out o: bool[2];
o[0] := h[0] & h[1];
if (o[0]) then o[1] := !h[0] else o[1] := h[1]
",
    )
    .unwrap();
    let pp = passify(&p).unwrap();
    assert_eq!(pp.outputs.len(), 2);
    assert!(pp.outputs.contains_key(&("o".to_string(), 0)));
    let position: std::collections::HashMap<usize, usize> = pp
        .defs
        .iter()
        .enumerate()
        .map(|(i, f)| (Arc::as_ptr(f) as usize, i))
        .collect();
    for f in &pp.defs {
        let my = position[&(Arc::as_ptr(f) as usize)];
        let assert_child = |c: &Arc<Formula>| {
            assert!(position[&(Arc::as_ptr(c) as usize)] < my, "child after parent");
        };
        match &**f {
            Formula::Not(a) => assert_child(a),
            Formula::And(a, b) => {
                assert_child(a);
                assert_child(b);
            }
            _ => {}
        }
    }
    // Every output's definition appears in the list.
    for out in pp.outputs.values() {
        assert!(position.contains_key(&(Arc::as_ptr(out) as usize)));
    }
}

// --- tseitin ---

#[test]
fn tseitin_true_is_the_single_unit_golden() {
    let c = tseitin(&Formula::t());
    assert_eq!(c.num_vars, 1);
    assert_eq!(c.clauses, vec![vec![1]]);
    assert!(c.named.is_empty());
    assert_eq!(export_dimacs(&c), "p cnf 1 1\n1 0\n");
}

#[test]
fn tseitin_not_true_is_the_unsat_unit_pair() {
    let c = tseitin(&Formula::not(Formula::t()));
    assert_eq!(c.clauses, vec![vec![1], vec![-1]]);
    assert_eq!(sat(&c, &limits()), SatOutcome::Unsat);
}

#[test]
fn tseitin_contradiction_is_unsat() {
    let a = Formula::var("a", 0);
    let c = tseitin(&Formula::and(a.clone(), Formula::not(a)));
    assert_eq!(sat(&c, &limits()), SatOutcome::Unsat);
}

#[test]
fn tseitin_shares_dag_nodes() {
    let mut b = FormulaBuilder::new();
    let x = b.var("a", 0);
    let y = b.var("a", 1);
    let shared = b.and(x.clone(), y.clone());
    let top = Formula::and(
        Formula::not(shared.clone()),
        Formula::and(shared.clone(), Formula::var("a", 2)),
    );
    let c = tseitin(&top);
    // Variables: 3 named + aux for shared, inner and, top and = 6. A
    // tree encoding would re-encode `shared` and use 7.
    assert_eq!(c.num_vars, 6);
}

/// Enumerates all models of a CNF by brute force and projects them onto
/// the named bits.
fn cnf_models_projected(c: &Cnf) -> BTreeSet<Vec<((String, u32), bool)>> {
    let n = c.num_vars as usize;
    assert!(n <= 20, "brute force oracle only scales so far");
    let mut out = BTreeSet::new();
    for m in 0..1u64 << n {
        let model: Vec<bool> = (0..n).map(|i| (m >> i) & 1 == 1).collect();
        let ok = c
            .clauses
            .iter()
            .all(|cl| cl.iter().any(|&l| model[(l.unsigned_abs() - 1) as usize] == (l > 0)));
        if ok {
            out.insert(c.project(&model).into_iter().collect());
        }
    }
    out
}

fn formula_models(f: &Arc<Formula>) -> BTreeSet<Vec<((String, u32), bool)>> {
    let vars = f.vars();
    let mut out = BTreeSet::new();
    for m in 0..1u64 << vars.len() {
        let holds = eval(f, &mut |name, bit| {
            let i = vars
                .iter()
                .position(|(n, b)| n == name && *b == bit)
                .unwrap();
            (m >> i) & 1 == 1
        });
        if holds {
            out.insert(
                vars.iter()
                    .enumerate()
                    .map(|(i, v)| (v.clone(), (m >> i) & 1 == 1))
                    .collect(),
            );
        }
    }
    out
}

#[test]
fn tseitin_projected_models_equal_the_truth_table() {
    let a = || Formula::var("a", 0);
    let b_ = || Formula::var("b", 0);
    let c_ = || Formula::var("c", 0);
    let cases = vec![
        Formula::and(a(), Formula::not(b_())),
        Formula::not(Formula::and(Formula::not(a()), Formula::not(b_()))),
        Formula::and(Formula::and(a(), b_()), Formula::not(c_())),
        Formula::not(Formula::and(a(), Formula::and(b_(), Formula::not(a())))),
        // Sugared input exercises the desugaring path.
        Formula::eq(a(), Formula::xor(b_(), c_())),
        Formula::or(a(), Formula::or(b_(), c_())),
        Formula::t(),
        Formula::var("a", 0),
    ];
    for f in cases {
        let cnf = tseitin(&f);
        assert_eq!(
            cnf_models_projected(&cnf),
            formula_models(&f),
            "model sets differ for {f}"
        );
    }
}

#[test]
fn dimacs_golden_with_named_variables() {
    let f = Formula::and(Formula::var("h", 0), Formula::not(Formula::var("h", 1)));
    let c = tseitin(&f);
    assert_eq!(
        export_dimacs(&c),
        "c v 1 h[0]\nc v 2 h[1]\np cnf 3 4\n-3 1 0\n-3 -2 0\n3 -1 2 0\n3 0\n"
    );
}

#[test]
fn model_line_round_trips() {
    let c = tseitin(&Formula::and(Formula::var("a", 0), Formula::var("b", 0)));
    let model = match sat(&c, &limits()) {
        SatOutcome::Sat(m) => m,
        other => panic!("expected SAT, got {other:?}"),
    };
    let line = format!(
        "v {} 0",
        model
            .iter()
            .enumerate()
            .map(|(i, &v)| if v { (i as i32 + 1).to_string() } else { (-(i as i32 + 1)).to_string() })
            .collect::<Vec<_>>()
            .join(" ")
    );
    assert_eq!(parse_model_line(&line, c.num_vars).unwrap(), model);
    assert!(parse_model_line("1 -1 0", 1).is_err());
    assert!(parse_model_line("1 2", 3).is_err(), "unassigned variable");
    assert!(parse_model_line("junk", 1).is_err());
}

// --- dpll ---

#[test]
fn unit_clause_pair_is_unsat() {
    let c = Cnf {
        num_vars: 1,
        clauses: vec![vec![1], vec![-1]],
        named: Default::default(),
    };
    assert_eq!(sat(&c, &limits()), SatOutcome::Unsat);
}

#[test]
fn empty_clause_list_is_sat_with_empty_model() {
    let c = Cnf {
        num_vars: 0,
        clauses: vec![],
        named: Default::default(),
    };
    assert_eq!(sat(&c, &limits()), SatOutcome::Sat(vec![]));
}

#[test]
fn empty_clause_is_unsat() {
    let c = Cnf {
        num_vars: 1,
        clauses: vec![vec![]],
        named: Default::default(),
    };
    assert_eq!(sat(&c, &limits()), SatOutcome::Unsat);
}

#[test]
fn tautologies_and_duplicates_are_tolerated() {
    let c = Cnf {
        num_vars: 3,
        clauses: vec![vec![1, -1, 2], vec![2, 2, 3], vec![-2, -2], vec![1, 3, -2]],
        named: Default::default(),
    };
    match sat(&c, &limits()) {
        SatOutcome::Sat(m) => assert!(!m[1] && m[2]),
        other => panic!("expected SAT, got {other:?}"),
    }
}

#[test]
fn decision_cap_reports_unknown() {
    let c = Cnf {
        num_vars: 2,
        clauses: vec![vec![1, 2]],
        named: Default::default(),
    };
    let strict = SolverLimits { max_decisions: 0 };
    assert_eq!(sat(&c, &strict), SatOutcome::Unknown);
    // Purely unit instances need no decisions and still resolve.
    let units = Cnf {
        num_vars: 2,
        clauses: vec![vec![1], vec![-1, 2]],
        named: Default::default(),
    };
    assert_eq!(sat(&units, &strict), SatOutcome::Sat(vec![true, true]));
}

#[test]
fn random_instances_agree_with_the_truth_table_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a7_0001);
    for round in 0..100 {
        let num_vars = rng.gen_range(1..=12);
        let num_clauses = rng.gen_range(1..=40);
        let clauses: Vec<Vec<i32>> = (0..num_clauses)
            .map(|_| {
                let len = rng.gen_range(1..=3);
                (0..len)
                    .map(|_| {
                        let v = rng.gen_range(1..=num_vars) as i32;
                        if rng.gen_bool(0.5) {
                            v
                        } else {
                            -v
                        }
                    })
                    .collect()
            })
            .collect();
        let c = Cnf {
            num_vars: num_vars as i32,
            clauses,
            named: Default::default(),
        };
        let brute = (0..1u64 << num_vars).any(|m| {
            c.clauses
                .iter()
                .all(|cl| cl.iter().any(|&l| ((m >> (l.unsigned_abs() - 1)) & 1 == 1) == (l > 0)))
        });
        match sat(&c, &limits()) {
            SatOutcome::Sat(model) => {
                assert!(brute, "round {round}: solver found a model where none exists");
                assert_eq!(model.len(), num_vars);
            }
            SatOutcome::Unsat => assert!(!brute, "round {round}: solver missed a model"),
            SatOutcome::Unknown => panic!("round {round}: cap hit on a tiny instance"),
        }
    }
}

// --- validity ---

#[test]
fn excluded_middle_is_valid() {
    let a = Formula::var("a", 0);
    let f = Formula::or(a.clone(), Formula::not(a));
    assert_eq!(valid(&f, &limits()), ValidityOutcome::Valid);
}

#[test]
fn a_bare_variable_is_falsifiable() {
    let f = Formula::var("a", 0);
    match valid(&f, &limits()) {
        ValidityOutcome::Invalid(model) => {
            assert_eq!(model.get(&("a".to_string(), 0)), Some(&false));
        }
        other => panic!("expected Invalid, got {other:?}"),
    }
}

#[test]
fn three_runs_of_m1_always_collide() {
    // Composing three copies with the collision post and pushing it through
    // wp yields a valid formula: only two outputs exist, so some pair of
    // three runs must agree.
    let p = parse(M1).unwrap();
    let c = self_compose(&p, 3, Polarity::Collision).unwrap();
    let w = wp(&c.program, &c.post).unwrap();
    assert_eq!(valid(&w, &limits()), ValidityOutcome::Valid);

    // Cross-check by enumeration: the collision post holds on all 64 runs.
    let nh = c.program.high_bits() as usize;
    for input in 0..1u64 << nh {
        let obs = run(
            &c.program,
            &Bits::from_index(input, nh),
            Mode::Final,
            &ExecOptions::default(),
        )
        .unwrap();
        match obs {
            Observation::Terminated { final_out: Some(_), .. } => {}
            other => panic!("diverged: {other:?}"),
        }
    }

    // Two copies of M1 can disagree, so the two-fold collision is invalid.
    let c2 = self_compose(&p, 2, Polarity::Collision).unwrap();
    let w2 = wp(&c2.program, &c2.post).unwrap();
    match valid(&w2, &limits()) {
        ValidityOutcome::Invalid(model) => {
            // The counter-model names only high bits.
            assert!(model.keys().all(|(name, _)| name.starts_with("h_")));
        }
        other => panic!("expected Invalid, got {other:?}"),
    }
}
