//! Support witnesses re-checked from their parts, without the search that
//! found them.

mod common;

use common::*;
use kelps::engine::RandomStrategy;
use kelps::model::{complex_true, time_part, Binding, EvalCtx, Trace};
use kelps::random::tiny_instance;
use kelps::syntax::{name, Complex, Framework, SortRef, Value};
use kelps::temporal::{admits_sequencing, eval_ground_constraints, TimeBinding};
use kelps::verify::{check_reactive, SupportWitness, VerifyConfig};

fn sigma(fw: &Framework, w: &SupportWitness) -> Binding {
    let sorts = &fw.rules[w.rule].var_sorts;
    w.sigma
        .iter()
        .map(|(k, v)| {
            let val = match sorts.get(k.as_str()) {
                Some(SortRef::Time) => Value::Time(v.parse().expect("time value")),
                _ => Value::Sym(name(v)),
            };
            (name(k), val)
        })
        .collect()
}

/// Re-derives conditions (a) and (b) of the witness.
fn recheck(fw: &Framework, tr: &Trace, t: u32, w: &SupportWitness) -> Result<(), String> {
    let rule = &fw.rules[w.rule];
    let d = &rule.consequents[w.disjunct];
    let s = sigma(fw, w);
    let ctx = EvalCtx::new(fw, tr.horizon());
    let pick = |ks: &[usize]| ks.iter().map(|&k| d.conditions[k].clone()).collect::<Vec<_>>();

    let act = &d.conditions[w.condition];
    let mut full = s.clone();
    for (k, v) in &w.sequencing {
        full.entry(name(k)).or_insert(Value::Time(*v));
    }
    if act.stamp.as_ref().map(|st| st.apply_binding(&full)) != Some(kelps::syntax::TimeExpr::constant(t as i64)) {
        return Err("action is not stamped at its time".into());
    }
    let front = Complex {
        conditions: rule.antecedent.conditions.iter().cloned().chain(pick(&w.earlier)).collect(),
        constraints: rule.antecedent.constraints.clone(),
    };
    let mut with_act = front.clone();
    with_act.conditions.push(act.clone());
    if !complex_true(&ctx, &with_act, tr, &full).map_err(|e| e.to_string())? {
        return Err("antecedent, earlier and act are not true".into());
    }
    let later = Complex { conditions: std::iter::once(act.clone()).chain(pick(&w.rest)).collect(), constraints: d.constraints.clone() };
    let partial = time_part(&s);
    if admits_sequencing(&front, &later, true, &partial, fw.solver_bound(tr.horizon())).is_none() {
        return Err("no sequencing of the split".into());
    }
    let seq: TimeBinding = w.sequencing.iter().map(|(k, v)| (name(k), *v)).collect();
    let mut cs = front.constraints.clone();
    cs.extend(later.constraints.iter().cloned());
    if !eval_ground_constraints(&cs, &seq).map_err(|e| e.to_string())? {
        return Err("sequencing binding breaks the constraints".into());
    }
    Ok(())
}

fn check_all(fw: &Framework, tr: &Trace) -> usize {
    let rep = check_reactive(fw, tr, &VerifyConfig::default()).unwrap();
    let mut n = 0;
    for s in &rep.supports {
        if let Some(w) = &s.witness {
            recheck(fw, tr, s.t, w).unwrap_or_else(|e| panic!("{}@{}: {e}\n{w:?}\n{}", s.action, s.t, tr.to_jsonl()));
            n += 1;
        }
    }
    n
}

#[test]
fn fixture_witnesses_recheck() {
    let mut n = 0;
    for (_, fw, tr) in trace_corpus() {
        n += check_all(&fw, &tr);
    }
    assert!(n >= 5, "only {n} witnesses");
}

#[test]
fn random_run_witnesses_recheck() {
    let mut n = 0;
    for seed in 0..200 {
        let inst = tiny_instance(seed);
        for k in 0..3 {
            let res = run_with(&inst.framework, &inst.ext, inst.horizon, true, &mut RandomStrategy::new(seed * 7 + k));
            n += check_all(&inst.framework, &res.trace);
        }
    }
    assert!(n > 100, "only {n} witnesses");
}
