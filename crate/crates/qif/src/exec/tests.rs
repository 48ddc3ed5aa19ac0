use super::*;
use crate::lang::parse;

const M1: &str =
    "high h:bool[2]; out o:bool[1]; if (!h[1] & h[0]) then o[0]:=false else o[0]:=true";
const M2: &str = "high h:bool[2]; out o:bool[2]; o[0] := h[0]; o[1] := h[1]";

fn final_of(obs: &Observation) -> String {
    match obs {
        Observation::Terminated {
            final_out: Some(f), ..
        } => f.bitstring(),
        other => panic!("expected terminated run, got {other:?}"),
    }
}

#[test]
fn guarded_check_maps_only_the_guess_to_zero() {
    let p = parse(M1).unwrap();
    let c = compile(&p);
    let opts = ExecOptions::default();
    // h = 01 (h[1]=0, h[0]=1) matches the guard.
    let h = c.layout().parse_high("01").unwrap();
    assert_eq!(h.to_index(), 1);
    let obs = c.run(&h, Mode::Final, &opts).unwrap();
    assert_eq!(final_of(&obs), "0");
    for s in ["00", "10", "11"] {
        let h = c.layout().parse_high(s).unwrap();
        let obs = c.run(&h, Mode::Final, &opts).unwrap();
        assert_eq!(final_of(&obs), "1", "input {s}");
    }
}

#[test]
fn copy_program_reveals_every_input() {
    let p = parse(M2).unwrap();
    let t = enumerate(&p, Mode::Final, &ExecOptions::default()).unwrap();
    assert_eq!(t.n_inputs(), 4);
    let finals: Vec<String> = t.rows.iter().map(final_of).collect();
    // Out tuple equals the input, so the rendered final matches the key.
    for (i, f) in finals.iter().enumerate() {
        assert_eq!(*f, t.key(i as u64));
    }
}

#[test]
fn uninitialized_out_and_local_bits_start_false() {
    let p = parse("high h:bool[1]; out o:bool[2]; local t:bool[1]; o[1] := h[0] | t[0]").unwrap();
    let c = compile(&p);
    let obs = c
        .run(&Bits::from_index(1, 1), Mode::Final, &ExecOptions::default())
        .unwrap();
    // o[1] = 1, o[0] untouched = 0; MSB-first rendering gives "10".
    assert_eq!(final_of(&obs), "10");
}

#[test]
fn silent_divergence_has_empty_prefix_and_lasso() {
    let p = parse("high h:bool[1]; out o:bool[1]; while (true) do skip").unwrap();
    for mode in [Mode::Final, Mode::Trace] {
        let obs = run(&p, &Bits::from_index(0, 1), mode, &ExecOptions::default()).unwrap();
        assert_eq!(
            obs,
            Observation::Diverged {
                prefix: vec![],
                lasso: vec![]
            },
            "mode {mode}"
        );
    }
}

#[test]
fn blinker_produces_canonical_lasso() {
    let p = parse("high h:bool[1]; out o:bool[1]; while (true) do { o[0] := !o[0]; observe }")
        .unwrap();
    let obs = run(&p, &Bits::from_index(0, 1), Mode::Trace, &ExecOptions::default()).unwrap();
    let one = Bits::from_index(1, 1);
    let zero = Bits::from_index(0, 1);
    assert_eq!(
        obs,
        Observation::Diverged {
            prefix: vec![],
            lasso: vec![one, zero]
        }
    );
}

#[test]
fn diverged_runs_in_final_mode_collapse_to_one_value() {
    // Loop body emits, but final mode suppresses emissions entirely.
    let p = parse("high h:bool[1]; out o:bool[1]; while (true) do { o[0] := !o[0]; observe }")
        .unwrap();
    let obs = run(&p, &Bits::from_index(1, 1), Mode::Final, &ExecOptions::default()).unwrap();
    assert_eq!(
        obs,
        Observation::Diverged {
            prefix: vec![],
            lasso: vec![]
        }
    );
}

#[test]
fn observe_is_inert_in_final_mode() {
    let p = parse("high h:bool[1]; out o:bool[1]; observe; o[0] := h[0]; observe").unwrap();
    let obs = run(&p, &Bits::from_index(1, 1), Mode::Final, &ExecOptions::default()).unwrap();
    assert_eq!(
        obs,
        Observation::Terminated {
            emissions: vec![],
            final_out: Some(Bits::from_index(1, 1))
        }
    );
    // In trace mode the same program emits twice and reports no final.
    let obs = run(&p, &Bits::from_index(1, 1), Mode::Trace, &ExecOptions::default()).unwrap();
    assert_eq!(
        obs,
        Observation::Terminated {
            emissions: vec![Bits::from_index(0, 1), Bits::from_index(1, 1)],
            final_out: None
        }
    );
}

#[test]
fn lasso_canonicalization_reduces_period_and_prefix() {
    let b = |v: u64| Bits::from_index(v, 1);
    // Period [0,0] is a repetition of [0].
    let (p, l) = canonicalize_lasso(vec![], vec![b(0), b(0)]);
    assert_eq!((p, l), (vec![], vec![b(0)]));
    // Prefix [a] with lasso [b,a] denotes a,b,a,b,... = ([a,b])^w.
    let (p, l) = canonicalize_lasso(vec![b(1)], vec![b(0), b(1)]);
    assert_eq!((p, l), (vec![], vec![b(1), b(0)]));
    // A genuinely transient prefix survives.
    let (p, l) = canonicalize_lasso(vec![b(1), b(1)], vec![b(0)]);
    assert_eq!((p, l), (vec![b(1), b(1)], vec![b(0)]));
}

#[test]
fn counter_loop_terminates_with_exact_detection() {
    // Counts a 2-bit local down to zero, then stops: terminating loop.
    let p = parse(
        "high h:bool[2]; out o:bool[1]; local c:bool[2];\n\
         c[0] := h[0]; c[1] := h[1];\n\
         while (c[0] | c[1]) do {\n\
             if (c[0]) then { c[0] := false } else { c[0] := true; c[1] := false };\n\
             o[0] := !o[0]\n\
         }",
    )
    .unwrap();
    let t = enumerate(&p, Mode::Final, &ExecOptions::default()).unwrap();
    // Parity of the countdown length: h=0→0 flips, 1→1, 2→2, 3→3.
    let finals: Vec<String> = t.rows.iter().map(final_of).collect();
    assert_eq!(finals, vec!["0", "1", "0", "1"]);
}

#[test]
fn step_budget_exhaustion_is_distinct_from_divergence() {
    let p = parse("high h:bool[1]; out o:bool[1]; while (true) do skip").unwrap();
    let opts = ExecOptions {
        step_budget: Some(1),
        ..ExecOptions::default()
    };
    let err = run(&p, &Bits::from_index(0, 1), Mode::Final, &opts).unwrap_err();
    assert_eq!(err, ExecError::StepBudgetExceeded { budget: 1 });
}

#[test]
fn input_width_is_checked() {
    let p = parse(M1).unwrap();
    let err = run(&p, &Bits::from_index(0, 3), Mode::Final, &ExecOptions::default()).unwrap_err();
    assert!(matches!(err, ExecError::InputWidthMismatch { expected: 2, got: 3 }));
}

#[test]
fn enumerate_refuses_programs_above_the_cap() {
    let p = parse("high h:bool[4]; out o:bool[1]; o[0] := h[0]").unwrap();
    let opts = ExecOptions {
        high_bit_cap: 3,
        ..ExecOptions::default()
    };
    let err = enumerate(&p, Mode::Final, &opts).unwrap_err();
    assert_eq!(err, ExecError::HighBitCapExceeded { bits: 4, cap: 3 });
}

#[test]
fn runs_are_deterministic() {
    let p = parse(
        "high h:bool[3]; out o:bool[2]; local t:bool[1];\n\
         t[0] := h[0] ^ h[2];\n\
         while (t[0]) do { t[0] := false; o[0] := h[1]; observe };\n\
         o[1] := h[0] == h[1]",
    )
    .unwrap();
    let a = enumerate(&p, Mode::Trace, &ExecOptions::default()).unwrap();
    let b = enumerate(&p, Mode::Trace, &ExecOptions::default()).unwrap();
    assert_eq!(a.rows, b.rows);
}

mod equivalence {
    use super::*;

    fn term(emissions: &[u64]) -> Observation {
        Observation::Terminated {
            emissions: emissions.iter().map(|&v| Bits::from_index(v, 1)).collect(),
            final_out: None,
        }
    }

    fn div(prefix: &[u64], lasso: &[u64]) -> Observation {
        Observation::Diverged {
            prefix: prefix.iter().map(|&v| Bits::from_index(v, 1)).collect(),
            lasso: lasso.iter().map(|&v| Bits::from_index(v, 1)).collect(),
        }
    }

    #[test]
    fn shorter_terminated_trace_matches_longer_extension() {
        assert!(trace_equiv(&term(&[0]), &term(&[0, 1])));
        assert!(!trace_equiv(&term(&[0]), &term(&[1])));
        assert!(!trace_equiv(&term(&[0, 0]), &term(&[0, 1])));
    }

    #[test]
    fn lasso_unrolls_against_finite_trace() {
        assert!(trace_equiv(&div(&[], &[0]), &term(&[0, 0])));
        assert!(!trace_equiv(&div(&[], &[0]), &term(&[0, 1])));
    }

    #[test]
    fn two_lassos_compare_over_lcm_window() {
        assert!(trace_equiv(&div(&[], &[0, 1]), &div(&[0], &[1, 0])));
        assert!(!trace_equiv(&div(&[], &[0, 1]), &div(&[], &[0, 0, 1])));
        assert!(trace_equiv(&div(&[1], &[0]), &div(&[1, 0], &[0])));
    }

    #[test]
    fn silent_divergence_matches_anything() {
        assert!(trace_equiv(&div(&[], &[]), &term(&[1, 0, 1])));
        assert!(trace_equiv(&div(&[1], &[]), &term(&[1, 0, 1])));
        assert!(!trace_equiv(&div(&[0], &[]), &term(&[1])));
    }

    #[test]
    fn relation_is_reflexive_and_symmetric_but_not_transitive() {
        let cases = [term(&[0]), term(&[0, 0]), term(&[0, 1]), div(&[0], &[1])];
        for a in &cases {
            assert!(trace_equiv(a, a));
            for b in &cases {
                assert_eq!(trace_equiv(a, b), trace_equiv(b, a));
            }
        }
        // The classic counterexample to transitivity.
        assert!(trace_equiv(&term(&[0, 0]), &term(&[0])));
        assert!(trace_equiv(&term(&[0]), &term(&[0, 1])));
        assert!(!trace_equiv(&term(&[0, 0]), &term(&[0, 1])));
    }

    #[test]
    fn final_mode_equivalence_compares_finals_and_forgives_divergence() {
        let t0 = Observation::Terminated {
            emissions: vec![],
            final_out: Some(Bits::from_index(0, 1)),
        };
        let t1 = Observation::Terminated {
            emissions: vec![],
            final_out: Some(Bits::from_index(1, 1)),
        };
        let d = Observation::Diverged {
            prefix: vec![],
            lasso: vec![],
        };
        assert!(equiv(Mode::Final, &t0, &t0));
        assert!(!equiv(Mode::Final, &t0, &t1));
        assert!(equiv(Mode::Final, &t0, &d));
        assert!(equiv(Mode::Final, &d, &t1));
    }
}

#[test]
fn table_json_uses_bitstring_keys() {
    let p = parse(M1).unwrap();
    let t = enumerate(&p, Mode::Final, &ExecOptions::default()).unwrap();
    let v = t.to_json();
    assert_eq!(v["mode"], "final");
    assert_eq!(v["entries"]["01"]["kind"], "terminated");
    assert_eq!(v["entries"]["01"]["final"], "0");
    assert_eq!(v["entries"]["11"]["final"], "1");
}

#[test]
fn multi_variable_keys_concatenate_declaration_order() {
    let p = parse("high h:bool[2]; high g:bool[1]; out o:bool[1]; o[0] := g[0]").unwrap();
    let c = compile(&p);
    // "011" reads h=01, g=1: h[1]=0, h[0]=1, g[0]=1.
    let bits = c.layout().parse_high("011").unwrap();
    assert!(bits.get(0), "h[0]");
    assert!(!bits.get(1), "h[1]");
    assert!(bits.get(2), "g[0]");
    assert_eq!(c.layout().render_high(&bits), "011");
}
