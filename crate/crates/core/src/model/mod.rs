//! Timestamped interpretations and truth of conditions, complexes and rules.

mod eval;
mod trace;

use std::collections::BTreeSet;

use serde::Serialize;

pub use eval::{eval_condition, ground_atom, holds, Binding, EvalCtx, EvalError, Frame};
pub(crate) use eval::time_value;
pub use trace::{Timeline, Trace, TraceError};

use crate::syntax::{Complex, FolCondition, ReactiveRule, Value};
use crate::temporal::{self, Constraint, TimeBinding};

/// Time-valued part of a binding.
pub fn time_part(b: &Binding) -> TimeBinding {
    b.iter()
        .filter_map(|(k, v)| match v {
            Value::Time(t) => Some((k.clone(), *t)),
            Value::Sym(_) => None,
        })
        .collect()
}

/// Truth of a ground complex in the trace. Each condition is checked in the
/// frame of its own timestamp, so only the prefix up to the latest timestamp
/// is consulted.
pub fn complex_true(ctx: &EvalCtx<'_>, cx: &Complex, trace: &Trace, b: &Binding) -> Result<bool, EvalError> {
    for c in &cx.conditions {
        let Some(s) = &c.stamp else { continue };
        let t = time_value(s, b)?;
        if t < 0 {
            return Ok(false);
        }
        if t > trace.horizon() as i64 {
            return Err(EvalError::BeyondHorizon(t, trace.horizon()));
        }
        if !holds(ctx, &c.formula, &trace.frame(t as u32), b)? {
            return Ok(false);
        }
    }
    let tb = time_part(b);
    temporal::eval_ground_constraints(&cx.constraints, &tb).map_err(|temporal::TemporalError::Unbound(v)| EvalError::Unbound(v))
}

/// Bindings (extending `partial`) of a single condition in any frame of the trace.
fn condition_instances(
    ctx: &EvalCtx<'_>,
    c: &FolCondition,
    trace: &Trace,
    partial: &Binding,
) -> Result<Vec<Binding>, EvalError> {
    let n = trace.horizon();
    let ground_t = c.stamp.as_ref().and_then(|s| time_value(s, partial).ok());
    match ground_t {
        Some(t) if t < 0 || t > n as i64 => Ok(Vec::new()),
        Some(t) => eval_condition(ctx, c, &trace.frame(t as u32), partial),
        None => {
            let mut out = Vec::new();
            for t in 0..=n {
                out.extend(eval_condition(ctx, c, &trace.frame(t), partial)?);
            }
            Ok(out)
        }
    }
}

/// Every grounding (extending `partial`) of the complex's variables that
/// makes it true in the trace, with times within the horizon.
pub fn complex_instances(ctx: &EvalCtx<'_>, cx: &Complex, trace: &Trace, partial: &Binding) -> Result<Vec<Binding>, EvalError> {
    let mut cur = vec![partial.clone()];
    for c in &cx.conditions {
        let mut next = Vec::new();
        for b in &cur {
            next.extend(condition_instances(ctx, c, trace, b)?);
        }
        cur = next;
        if cur.is_empty() {
            return Ok(cur);
        }
    }
    let mut out = BTreeSet::new();
    for b in cur {
        for sol in temporal::all_solutions(&cx.constraints, &time_part(&b), trace.horizon()) {
            let mut nb = b.clone();
            nb.extend(sol.into_iter().map(|(k, v)| (k, Value::Time(v))));
            out.insert(nb);
        }
    }
    Ok(out.into_iter().collect())
}

/// True when the disjunct can still be made true: some of its conditions
/// hold within the horizon and the remainder can be placed strictly after it.
fn pending(ctx: &EvalCtx<'_>, d: &Complex, trace: &Trace, b: &Binding, k: usize, future: &mut Vec<Constraint>) -> Result<bool, EvalError> {
    let n = trace.horizon();
    if k == d.conditions.len() {
        if future.is_empty() {
            return Ok(false);
        }
        let mut cs = d.constraints.clone();
        cs.extend(future.iter().cloned());
        return Ok(temporal::satisfiable(&cs, &time_part(b), ctx.fw.solver_bound(n)));
    }
    let c = &d.conditions[k];
    for nb in condition_instances(ctx, c, trace, b)? {
        if pending(ctx, d, trace, &nb, k + 1, future)? {
            return Ok(true);
        }
    }
    if let Some(s) = &c.stamp {
        let later = match time_value(s, b) {
            Ok(t) => t > n as i64,
            Err(_) => true,
        };
        if later {
            future.push(Constraint::Le(crate::syntax::TimeExpr::constant(n as i64 + 1), s.apply_binding(b)));
            let r = pending(ctx, d, trace, b, k + 1, future)?;
            future.pop();
            if r {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", content = "binding", rename_all = "lowercase")]
pub enum RuleVerdict {
    True,
    /// An antecedent instance with no consequent instance, not even a future one.
    False(Vec<(String, String)>),
    /// Antecedent instances whose consequents may still be completed after the horizon.
    Pending(Vec<(String, String)>),
}

fn show(b: &Binding) -> Vec<(String, String)> {
    b.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Classical truth of a rule in a finite trace, with a pending verdict for
/// consequents whose deadlines extend past the horizon.
pub fn rule_true(ctx: &EvalCtx<'_>, r: &ReactiveRule, trace: &Trace) -> Result<RuleVerdict, EvalError> {
    let mut first_pending = None;
    for sigma in complex_instances(ctx, &r.antecedent, trace, &Binding::new())? {
        let mut done = false;
        for d in &r.consequents {
            if !complex_instances(ctx, d, trace, &sigma)?.is_empty() {
                done = true;
                break;
            }
        }
        if done {
            continue;
        }
        let mut is_pending = false;
        for d in &r.consequents {
            if pending(ctx, d, trace, &sigma, 0, &mut Vec::new())? {
                is_pending = true;
                break;
            }
        }
        if !is_pending {
            return Ok(RuleVerdict::False(show(&sigma)));
        }
        first_pending.get_or_insert_with(|| show(&sigma));
    }
    Ok(match first_pending {
        Some(b) => RuleVerdict::Pending(b),
        None => RuleVerdict::True,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::MatchMode;
    use crate::syntax::{name, parse_framework, Framework, GroundAtom};

    const FIG1: &str = "events { see-wolf } actions { cry-wolf, drink } rules { see-wolf(T) -> cry-wolf(T + 1) }";

    fn tl(items: &[(u32, &str)]) -> Timeline {
        let mut out = Timeline::new();
        for (t, a) in items {
            out.entry(*t).or_default().insert(GroundAtom::prop(a));
        }
        out
    }

    fn fig1_trace(fw: &Framework, acts: &[(u32, &str)]) -> Trace {
        Trace::build(fw, &tl(&[(3, "see-wolf")]), &tl(acts), 5, MatchMode::Subset)
    }

    fn at(pairs: &[(&str, Value)]) -> Binding {
        pairs.iter().map(|(k, v)| (name(k), v.clone())).collect()
    }

    #[test]
    fn antecedent_binds_the_event_time() {
        let fw = parse_framework(FIG1).unwrap();
        let tr = fig1_trace(&fw, &[]);
        let ctx = EvalCtx::new(&fw, 5);
        let c = &fw.rules[0].antecedent.conditions[0];
        assert!(eval_condition(&ctx, c, &tr.frame(2), &Binding::new()).unwrap().is_empty());
        let got = eval_condition(&ctx, c, &tr.frame(3), &Binding::new()).unwrap();
        assert_eq!(got, vec![at(&[("T", Value::Time(3))])]);
    }

    #[test]
    fn consequent_offset_is_checked_against_the_frame() {
        let fw = parse_framework(FIG1).unwrap();
        let tr = fig1_trace(&fw, &[(4, "cry-wolf")]);
        let ctx = EvalCtx::new(&fw, 5);
        let d = &fw.rules[0].consequents[0];
        let b = at(&[("T", Value::Time(3))]);
        assert!(complex_true(&ctx, d, &tr, &b).unwrap());
        let early = at(&[("T", Value::Time(2))]);
        assert!(!complex_true(&ctx, d, &tr, &early).unwrap());
    }

    #[test]
    fn complex_beyond_horizon_is_an_error() {
        let fw = parse_framework(FIG1).unwrap();
        let tr = fig1_trace(&fw, &[]);
        let ctx = EvalCtx::new(&fw, 5);
        let d = &fw.rules[0].consequents[0];
        let b = at(&[("T", Value::Time(5))]);
        assert_eq!(complex_true(&ctx, d, &tr, &b), Err(EvalError::BeyondHorizon(6, 5)));
    }

    #[test]
    fn quantified_manager_query() {
        let fw = parse_framework(
            "sorts { person: {ann, ben}, dept: {toys}, item: {ball, kite} }
             fluents { manages(person, dept), instock(item) }
             aux { item-of(item, dept) }
             aux-facts { item-of(ball, toys), item-of(kite, toys) }
             events { audit }
             initial { manages(ann, toys), manages(ben, toys), instock(ball) }
             initiates { {audit} ~> instock(kite) }
             rules { audit(T) & manages(M, D, T) & (forall x:item . (item-of(x, D) => instock(x, T))) -> audit(T + 1) }",
        )
        .unwrap();
        let tr = Trace::build(&fw, &tl(&[(1, "audit")]), &Timeline::new(), 2, MatchMode::Subset);
        let ctx = EvalCtx::new(&fw, 2);
        let cx = &fw.rules[0].antecedent;
        // Before the audit the kite is missing; the audit restocks it by time 1.
        let managers: Vec<String> = complex_instances(&ctx, cx, &tr, &Binding::new())
            .unwrap()
            .iter()
            .map(|b| b[&name("M")].to_string())
            .collect();
        assert!(tr.states[1].contains(&GroundAtom::new("instock", &["kite"])));
        assert_eq!(managers, vec!["ann", "ben"]);
        let q = &cx.conditions[2];
        let b = at(&[("D", Value::Sym(name("toys"))), ("T", Value::Time(0))]);
        assert!(eval_condition(&ctx, q, &tr.frame(0), &b).unwrap().is_empty());
    }

    #[test]
    fn negation_needs_the_binding_from_a_positive_atom() {
        let fw = parse_framework(
            "sorts { s: {a, b} } fluents { f(s) } events { e(s) } initial { f(a) }
             rules { e(X, T) & ~f(X, T) -> e(X, T + 1) }",
        )
        .unwrap();
        let mut ext = Timeline::new();
        ext.insert(1, [GroundAtom::new("e", &["a"]), GroundAtom::new("e", &["b"])].into_iter().collect());
        let tr = Trace::build(&fw, &ext, &Timeline::new(), 2, MatchMode::Subset);
        let ctx = EvalCtx::new(&fw, 2);
        let got = complex_instances(&ctx, &fw.rules[0].antecedent, &tr, &Binding::new()).unwrap();
        assert_eq!(got, vec![at(&[("T", Value::Time(1)), ("X", Value::Sym(name("b")))])]);
    }

    #[test]
    fn rule_verdicts() {
        let fw = parse_framework(FIG1).unwrap();
        let ctx = EvalCtx::new(&fw, 5);
        let r = &fw.rules[0];
        assert_eq!(rule_true(&ctx, r, &fig1_trace(&fw, &[(4, "cry-wolf")])).unwrap(), RuleVerdict::True);
        assert_eq!(
            rule_true(&ctx, r, &fig1_trace(&fw, &[])).unwrap(),
            RuleVerdict::False(vec![("T".into(), "3".into())])
        );
        // Seen at the horizon: the cry is due after it.
        let late = Trace::build(&fw, &tl(&[(5, "see-wolf")]), &Timeline::new(), 5, MatchMode::Subset);
        assert_eq!(rule_true(&ctx, r, &late).unwrap(), RuleVerdict::Pending(vec![("T".into(), "5".into())]));
    }

    #[test]
    fn window_partly_past_the_horizon_is_pending() {
        let fw = parse_framework("events { o } actions { a } rules { o(T1) -> a(T2) & T1 < T2 <= T1 + 3 }").unwrap();
        let ctx = EvalCtx::new(&fw, 4);
        let tr = Trace::build(&fw, &tl(&[(3, "o")]), &Timeline::new(), 4, MatchMode::Subset);
        assert!(matches!(rule_true(&ctx, &fw.rules[0], &tr).unwrap(), RuleVerdict::Pending(_)));
        let tr = Trace::build(&fw, &tl(&[(1, "o")]), &Timeline::new(), 4, MatchMode::Subset);
        assert!(matches!(rule_true(&ctx, &fw.rules[0], &tr).unwrap(), RuleVerdict::False(_)));
    }

    #[test]
    fn prefix_truncates() {
        let fw = parse_framework(FIG1).unwrap();
        let tr = fig1_trace(&fw, &[(4, "cry-wolf")]);
        let p = tr.prefix(3);
        assert_eq!(p.horizon(), 3);
        assert!(p.acts_star().is_empty());
        assert_eq!(tr.acts_star().len(), 1);
    }
}
