//! Property tests against independent oracles.

mod common;

use std::collections::BTreeSet;

use common::*;
use kelps::engine::RandomStrategy;
use kelps::model::{complex_true, eval_condition, holds, Binding, EvalCtx};
use kelps::random::tiny_instance;
use kelps::syntax::{Formula, Value};
use kelps::temporal::{admits_sequencing, all_solutions, satisfiable, solve};
use kelps::verify::{check_frame_axioms, check_reactive, VerifyConfig};
use proptest::prelude::*;
use proptest::strategy::ValueTree;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn solver_agrees_with_enumeration((cs, partial, h) in constraint_case()) {
        let vars = constraint_vars(&cs);
        let brute = brute_solutions(&cs, &vars, &partial, h);
        let all = all_solutions(&cs, &partial, h);
        prop_assert_eq!(&all, &brute);
        prop_assert_eq!(satisfiable(&cs, &partial, h), !brute.is_empty());
        prop_assert_eq!(solve(&cs, &partial, h), brute.first().cloned());
    }

    #[test]
    fn sequencing_agrees_with_enumeration((e, l, strict, h) in sequencing_case()) {
        let cs = sequencing_constraints(&e, &l, strict);
        let brute = brute_solutions(&cs, &sequencing_vars(&e, &l), &Default::default(), h);
        prop_assert_eq!(admits_sequencing(&e, &l, strict, &Default::default(), h), brute.first().cloned());
    }
}

fn corpus_case() -> impl Strategy<Value = usize> {
    0..trace_corpus().len()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn truth_depends_only_on_the_prefix(k in corpus_case(), seed in any::<u64>()) {
        let corpus = trace_corpus();
        let (_, fw, tr) = &corpus[k];
        let ctx = EvalCtx::new(fw, tr.horizon());
        let mut runner = proptest::test_runner::TestRunner::new_with_rng(
            Default::default(),
            proptest::test_runner::TestRng::from_seed(proptest::test_runner::RngAlgorithm::ChaCha, &seed_bytes(seed)),
        );
        let strat = ground_complex(leaves_by_time(fw, tr));
        for _ in 0..20 {
            let cx = strat.new_tree(&mut runner).unwrap().current();
            let full = complex_true(&ctx, &cx, tr, &Binding::new()).unwrap();
            let pre = complex_true(&ctx, &cx, &tr.prefix(latest_stamp(&cx)), &Binding::new()).unwrap();
            prop_assert_eq!(full, pre);
        }
        let strat = single_time_conjunction(leaves_by_time(fw, tr));
        for _ in 0..20 {
            let (t, conds) = strat.new_tree(&mut runner).unwrap().current();
            let cx = kelps::syntax::Complex { conditions: conds.clone(), constraints: Vec::new() };
            let joint = Formula::And(conds.into_iter().map(|c| c.formula).collect());
            prop_assert_eq!(
                complex_true(&ctx, &cx, tr, &Binding::new()).unwrap(),
                holds(&ctx, &joint, &tr.frame(t), &Binding::new()).unwrap()
            );
        }
    }

    #[test]
    fn condition_instances_match_naive_grounding(seed in 0u64..500, strat_seed in any::<u64>()) {
        let inst = tiny_instance(seed);
        let fw = &inst.framework;
        let res = run_with(fw, &inst.ext, inst.horizon, true, &mut RandomStrategy::new(strat_seed));
        let tr = &res.trace;
        let ctx = EvalCtx::new(fw, fw.solver_bound(tr.horizon()));
        for r in &fw.rules {
            for c in r.antecedent.conditions.iter().chain(r.consequents.iter().flat_map(|d| &d.conditions)) {
                for t in 0..=tr.horizon() {
                    let frame = tr.frame(t);
                    let got: BTreeSet<Binding> = eval_condition(&ctx, c, &frame, &Binding::new()).unwrap().into_iter().collect();
                    // Naive: every well-sorted assignment to the free variables, kept when the stamp is t and the formula holds.
                    let mut cands = vec![Binding::new()];
                    for (v, s) in &c.vars {
                        let dom = ctx.domain(v, s).unwrap();
                        cands = cands.into_iter().flat_map(|b| dom.iter().map(move |x| {
                            let mut nb = b.clone();
                            nb.insert(v.clone(), x.clone());
                            nb
                        })).collect();
                    }
                    let want: BTreeSet<Binding> = cands.into_iter().filter(|b| {
                        let s = c.stamp.as_ref().unwrap();
                        let at = match &s.var {
                            Some(v) => match b[v] { Value::Time(x) => x as i64 + s.offset, Value::Sym(_) => -1 },
                            None => s.offset,
                        };
                        at == t as i64 && holds(&ctx, &c.formula, &frame, b).unwrap()
                    }).collect();
                    prop_assert_eq!(got, want, "condition {} at {}", c, t);
                }
            }
        }
    }

    #[test]
    fn engine_traces_are_reactive_and_obey_the_frame_axioms(seed in 0u64..1000, strat_seed in any::<u64>(), prune in any::<bool>()) {
        let inst = tiny_instance(seed);
        let fw = &inst.framework;
        let res = run_with(fw, &inst.ext, inst.horizon, prune, &mut RandomStrategy::new(strat_seed));
        let rep = check_reactive(fw, &res.trace, &VerifyConfig::default()).unwrap();
        prop_assert!(rep.reactive_interpretation, "{}\n{:?}", inst.source, rep.unsupported);
        prop_assert!(check_frame_axioms(fw, &res.trace, match_mode()).is_empty());
    }
}

fn seed_bytes(seed: u64) -> [u8; 32] {
    let mut out = [0u8; 32];
    for (k, chunk) in out.chunks_mut(8).enumerate() {
        chunk.copy_from_slice(&seed.wrapping_add(k as u64).to_le_bytes());
    }
    out
}
