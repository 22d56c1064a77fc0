//! Checkers for support, reactivity, rule truth and the frame axioms, and a
//! brute-force enumerator of reactive interpretations that shares nothing
//! with the engine beyond the framework and the model evaluator.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

pub use oracle::{check_theorems, enumerate_reactive_naive, enumerate_reactive_oracle, OracleConfig, OracleResult, TheoremReport};

use crate::engine::EngineState;
use crate::model::{complex_instances, complex_true, rule_true, time_part, Binding, EvalCtx, EvalError, RuleVerdict, Trace, TraceError};
use crate::state::{check_preconditions, initiated, terminated, MatchMode, PreViolation};
use crate::syntax::{bare_actions, Atom, Complex, FolCondition, Framework, GroundAtom, Term, TimeExpr, Value};
use crate::temporal::{self, Constraint};

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("trace does not fit the framework: {0}")]
    Trace(#[from] TraceError),
}

/// Which notion of support decides whether an action is reactive.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SupportDefinition {
    /// The action precedes or coincides with everything in `rest`, and its
    /// non-time arguments are fixed by the antecedent and `earlier`. These
    /// are exactly the actions the cycle can select.
    #[default]
    Operational,
    /// Only `antecedent & earlier < act & rest` is required.
    Literal,
}

impl FromStr for SupportDefinition {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "operational" => Ok(SupportDefinition::Operational),
            "literal" => Ok(SupportDefinition::Literal),
            _ => Err(format!("unknown support definition `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VerifyConfig {
    pub mode: MatchMode,
    pub support: SupportDefinition,
    /// Horizon used for time quantifiers and the solver; defaults to the trace's.
    pub horizon: Option<u32>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { mode: MatchMode::Subset, support: SupportDefinition::Operational, horizon: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SupportWitness {
    pub rule: usize,
    pub disjunct: usize,
    /// Condition of the disjunct holding the action.
    pub condition: usize,
    pub earlier: Vec<usize>,
    pub rest: Vec<usize>,
    pub sigma: BTreeMap<String, String>,
    /// Time binding witnessing the sequencing, over all the rule's time variables.
    pub sequencing: BTreeMap<String, u32>,
}

fn show(b: &Binding) -> BTreeMap<String, String> {
    b.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// Binds the atom's arguments and stamp so it denotes `g` at `t`.
fn unify(a: &Atom, g: &GroundAtom, t: u32) -> Option<Binding> {
    if a.pred != g.pred || a.args.len() != g.args.len() {
        return None;
    }
    let mut b = Binding::new();
    let bind = |v: &crate::syntax::Name, val: Value, b: &mut Binding| match b.get(v) {
        Some(old) => *old == val,
        None => {
            b.insert(v.clone(), val);
            true
        }
    };
    for (term, val) in a.args.iter().zip(&g.args) {
        let ok = match (term, val) {
            (Term::Const(c), Value::Sym(s)) => c == s,
            (Term::Var(v), _) => bind(v, val.clone(), &mut b),
            (Term::Time(TimeExpr { var: None, offset }), Value::Time(n)) => *offset == *n as i64,
            (Term::Time(TimeExpr { var: Some(v), offset }), Value::Time(n)) => {
                let base = *n as i64 - offset;
                base >= 0 && bind(v, Value::Time(base as u32), &mut b)
            }
            _ => false,
        };
        if !ok {
            return None;
        }
    }
    let s = a.stamp.as_ref()?;
    match &s.var {
        None => (s.offset == t as i64).then_some(b),
        Some(v) => {
            let base = t as i64 - s.offset;
            (base >= 0 && bind(v, Value::Time(base as u32), &mut b)).then_some(b)
        }
    }
}

fn stamps(cs: &[&FolCondition]) -> Vec<TimeExpr> {
    cs.iter().filter_map(|c| c.stamp.clone()).collect()
}

fn anchored(cs: &mut Vec<Constraint>, ss: &[TimeExpr]) {
    cs.extend(ss.iter().filter(|s| s.var.is_some()).map(|s| Constraint::Le(s.clone(), s.clone())));
}

/// Searches for a rule instance supporting `action` at time `t`: rules in
/// textual order, splits in enumeration order, groundings ascending.
pub fn find_support(
    fw: &Framework,
    trace: &Trace,
    t: u32,
    action: &GroundAtom,
    cfg: &VerifyConfig,
) -> Result<Option<SupportWitness>, EvalError> {
    if t == 0 {
        return Ok(None);
    }
    let h = cfg.horizon.unwrap_or(trace.horizon());
    let ctx = EvalCtx::new(fw, h);
    let bound = fw.solver_bound(h);
    // Antecedent and earlier conditions are stamped before t.
    let past = trace.prefix(t - 1);
    for rule in &fw.rules {
        for ba in bare_actions(fw, rule) {
            let Some(partial) = unify(&ba.atom, action, t) else { continue };
            let d = &rule.consequents[ba.disjunct];
            let act_stamp = ba.atom.stamp.clone().expect("actions are stamped");
            for split in &ba.splits {
                let earlier: Vec<&FolCondition> = split.earlier.iter().map(|&k| &d.conditions[k]).collect();
                let rest: Vec<&FolCondition> = split.rest.iter().map(|&k| &d.conditions[k]).collect();
                let mut known: BTreeSet<_> = rule.antecedent.vars();
                if cfg.support == SupportDefinition::Operational {
                    earlier.iter().for_each(|c| known.extend(c.free_vars()));
                    let mut act_vars = BTreeSet::new();
                    for a in &ba.atom.args {
                        crate::syntax::term_vars(a, &mut act_vars);
                    }
                    if !act_vars.is_subset(&known) {
                        continue;
                    }
                }
                let front = Complex {
                    conditions: rule.antecedent.conditions.iter().chain(earlier.iter().copied()).cloned().collect(),
                    constraints: Vec::new(),
                };
                let front_stamps = front.stamps();
                let mut later_stamps = stamps(&rest);
                later_stamps.push(act_stamp.clone());
                let mut cs: Vec<Constraint> = rule.antecedent.constraints.iter().chain(&d.constraints).cloned().collect();
                cs.extend(temporal::ordering_constraints(&front_stamps, &later_stamps, true));
                if cfg.support == SupportDefinition::Operational {
                    cs.extend(temporal::ordering_constraints(std::slice::from_ref(&act_stamp), &stamps(&rest), false));
                }
                anchored(&mut cs, &front_stamps);
                anchored(&mut cs, &later_stamps);
                for sigma in complex_instances(&ctx, &front, &past, &partial)? {
                    if let Some(w) = temporal::solve(&cs, &time_part(&sigma), bound) {
                        return Ok(Some(SupportWitness {
                            rule: rule.index,
                            disjunct: ba.disjunct,
                            condition: ba.condition,
                            earlier: split.earlier.clone(),
                            rest: split.rest.clone(),
                            sigma: show(&sigma),
                            sequencing: w.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActionSupport {
    pub t: u32,
    pub action: String,
    pub witness: Option<SupportWitness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TimedViolation {
    pub t: u32,
    #[serde(flatten)]
    pub violation: PreViolation,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RuleReport {
    pub rule: usize,
    pub text: String,
    #[serde(flatten)]
    pub verdict: RuleVerdict,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReactivityReport {
    /// Every action supported and the preconditions never violated.
    pub reactive_interpretation: bool,
    /// A reactive interpretation in which no rule is false.
    pub reactive_model: bool,
    pub supports: Vec<ActionSupport>,
    pub unsupported: Vec<String>,
    pub preconditions_hold: bool,
    pub pre_violations: Vec<TimedViolation>,
    /// No rule is false (pending rules are not counted as false).
    pub rules_hold: bool,
    pub rules: Vec<RuleReport>,
}

/// Precondition violations at every transition of the trace.
pub fn check_trace_preconditions(fw: &Framework, trace: &Trace) -> Result<Vec<TimedViolation>, EvalError> {
    let mut out = Vec::new();
    for t in 1..=trace.horizon() {
        for v in check_preconditions(fw, &trace.frame(t - 1), &trace.events[t as usize])? {
            out.push(TimedViolation { t, violation: v });
        }
    }
    Ok(out)
}

/// Rule truth for every rule of the framework.
pub fn check_rules(fw: &Framework, trace: &Trace, cfg: &VerifyConfig) -> Result<Vec<RuleReport>, EvalError> {
    let ctx = EvalCtx::new(fw, cfg.horizon.unwrap_or(trace.horizon()));
    fw.rules
        .iter()
        .map(|r| Ok(RuleReport { rule: r.index, text: r.to_string(), verdict: rule_true(&ctx, r, trace)? }))
        .collect()
}

/// Support for the actions at time `t` only.
pub fn supports_at(fw: &Framework, trace: &Trace, t: u32, cfg: &VerifyConfig) -> Result<Vec<ActionSupport>, EvalError> {
    trace.events[t as usize]
        .acts
        .iter()
        .map(|a| Ok(ActionSupport { t, action: a.to_string(), witness: find_support(fw, trace, t, a, cfg)? }))
        .collect()
}

/// Whether every action of the trace is supported and the preconditions
/// hold; whether the rules hold as well.
pub fn check_reactive(fw: &Framework, trace: &Trace, cfg: &VerifyConfig) -> Result<ReactivityReport, VerifyError> {
    trace.check_consistent(fw, cfg.mode)?;
    let mut supports = Vec::new();
    for t in 1..=trace.horizon() {
        supports.extend(supports_at(fw, trace, t, cfg)?);
    }
    let unsupported: Vec<String> =
        supports.iter().filter(|s| s.witness.is_none()).map(|s| format!("{}@{}", s.action, s.t)).collect();
    let pre_violations = check_trace_preconditions(fw, trace)?;
    let rules = check_rules(fw, trace, cfg)?;
    let preconditions_hold = pre_violations.is_empty();
    let rules_hold = rules.iter().all(|r| !matches!(r.verdict, RuleVerdict::False(_)));
    let reactive_interpretation = unsupported.is_empty() && preconditions_hold;
    Ok(ReactivityReport {
        reactive_interpretation,
        reactive_model: reactive_interpretation && rules_hold,
        supports,
        unsupported,
        preconditions_hold,
        pre_violations,
        rules_hold,
        rules,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameAxiom {
    /// An initiated fluent is present afterwards.
    Initiated,
    /// A present fluent that is not terminated stays present.
    Persists,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FrameViolation {
    pub t: u32,
    pub fluent: String,
    pub axiom: FrameAxiom,
}

impl fmt::Display for FrameViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} fails for {} at {}", self.axiom, self.fluent, self.t)
    }
}

/// Both frame axioms at every step, for every ground fluent.
pub fn check_frame_axioms(fw: &Framework, trace: &Trace, mode: MatchMode) -> Vec<FrameViolation> {
    let base = fw.fluent_base();
    let mut out = Vec::new();
    for t in 0..trace.horizon() {
        let (now, next) = (&trace.states[t as usize], &trace.states[t as usize + 1]);
        let ev = trace.events[t as usize + 1].all();
        let (ini, ter) = (initiated(&ev, &fw.causal, mode), terminated(&ev, &fw.causal, mode));
        for p in &base {
            if ini.contains(p) && !next.contains(p) {
                out.push(FrameViolation { t: t + 1, fluent: p.to_string(), axiom: FrameAxiom::Initiated });
            }
            if now.contains(p) && !ter.contains(p) && !next.contains(p) {
                out.push(FrameViolation { t: t + 1, fluent: p.to_string(), axiom: FrameAxiom::Persists });
            }
        }
    }
    out
}

/// Checks that every residual rule and goal clause of an engine state is a
/// remainder of its source rule whose evaluated part is true in the trace
/// and strictly precedes what is left.
pub fn check_lemma_shapes(fw: &Framework, es: &EngineState, trace: &Trace) -> Result<Vec<String>, EvalError> {
    let h = trace.horizon();
    let ctx = EvalCtx::new(fw, h);
    let bound = fw.solver_bound(h);
    let mut bad = Vec::new();
    let pick = |cx: &Complex, keep: &dyn Fn(usize) -> bool| -> Vec<FolCondition> {
        cx.conditions.iter().enumerate().filter(|(k, _)| keep(*k)).map(|(_, c)| c.clone()).collect()
    };
    let mut check = |what: String, done: Complex, left: Complex, b: &Binding| -> Result<(), EvalError> {
        let ground = Complex { conditions: done.conditions.clone(), constraints: Vec::new() };
        if !complex_true(&ctx, &ground, trace, b)? {
            bad.push(format!("{what}: evaluated part is not true"));
        }
        if temporal::admits_sequencing(&done, &left, true, &time_part(b), bound).is_none() {
            bad.push(format!("{what}: evaluated part does not precede the remainder"));
        }
        Ok(())
    };
    for r in &es.residuals {
        let a = &fw.rules[r.rule].antecedent;
        let done = Complex { conditions: pick(a, &|k| !r.conds.contains(&k)), constraints: Vec::new() };
        let left = Complex { conditions: pick(a, &|k| r.conds.contains(&k)), constraints: a.constraints.clone() };
        check(format!("residual of rule {}", r.rule), done, left, &r.binding)?;
    }
    for c in es.clauses.values() {
        let rule = &fw.rules[es.trees[&c.tree].rule];
        let d = &rule.consequents[c.disjunct];
        let mut done = rule.antecedent.clone();
        done.constraints.clear();
        done.conditions.extend(pick(d, &|k| !c.conds.contains(&k)));
        let mut cons = rule.antecedent.constraints.clone();
        cons.extend(d.constraints.iter().cloned());
        let left = Complex { conditions: pick(d, &|k| c.conds.contains(&k)), constraints: cons };
        check(format!("goal clause {} of rule {}", c.id, rule.index), done, left, &c.binding)?;
    }
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Timeline;
    use crate::syntax::parse_framework;

    fn fig1() -> Framework {
        parse_framework(include_str!("../../fixtures/fig1.kelps")).unwrap()
    }

    fn tl(items: &[(u32, &[&str])]) -> Timeline {
        items.iter().map(|(t, xs)| (*t, xs.iter().map(|x| GroundAtom::prop(x)).collect())).collect()
    }

    fn fig1_trace(acts: &[(u32, &[&str])]) -> Trace {
        Trace::build(&fig1(), &tl(&[(3, &["see-wolf"])]), &tl(acts), 5, MatchMode::Subset)
    }

    #[test]
    fn cry_wolf_is_supported_by_the_rule() {
        let fw = fig1();
        let tr = fig1_trace(&[(4, &["cry-wolf"])]);
        let w = find_support(&fw, &tr, 4, &GroundAtom::prop("cry-wolf"), &VerifyConfig::default()).unwrap().unwrap();
        assert_eq!(w.rule, 0);
        assert_eq!(w.sigma.get("T").map(String::as_str), Some("3"));
    }

    #[test]
    fn reactive_model_of_fig1() {
        let r = check_reactive(&fig1(), &fig1_trace(&[(4, &["cry-wolf"])]), &VerifyConfig::default()).unwrap();
        assert!(r.reactive_interpretation && r.reactive_model);
    }

    #[test]
    fn proactive_model_is_not_reactive() {
        let r = check_reactive(&fig1(), &fig1_trace(&[(1, &["cry-wolf"]), (2, &["cry-wolf"]), (4, &["cry-wolf"])]), &VerifyConfig::default())
            .unwrap();
        assert!(!r.reactive_interpretation);
        assert!(r.rules_hold);
        assert_eq!(r.unsupported, vec!["cry-wolf@1".to_string(), "cry-wolf@2".to_string()]);
    }

    #[test]
    fn irrelevant_drink_is_unsupported() {
        let r = check_reactive(&fig1(), &fig1_trace(&[(4, &["cry-wolf", "drink"])]), &VerifyConfig::default()).unwrap();
        assert_eq!(r.unsupported, vec!["drink@4".to_string()]);
    }

    #[test]
    fn missing_cry_falsifies_the_rule() {
        let r = check_reactive(&fig1(), &fig1_trace(&[]), &VerifyConfig::default()).unwrap();
        assert!(r.reactive_interpretation);
        assert!(!r.reactive_model);
        assert_eq!(r.rules[0].verdict, RuleVerdict::False(vec![("T".into(), "3".into())]));
    }

    #[test]
    fn late_action_needs_operational_order() {
        // f must come before a; with no f the cycle can never act, yet the
        // literal definition accepts a@1 by placing f in the unevaluated rest.
        let fw = parse_framework("actions { f, a } rules { true -> f(T2) & a(T3) & T2 < T3 }").unwrap();
        let tr = Trace::build(&fw, &Timeline::new(), &tl(&[(1, &["a"])]), 2, MatchMode::Subset);
        let lit = VerifyConfig { support: SupportDefinition::Literal, ..Default::default() };
        assert!(find_support(&fw, &tr, 1, &GroundAtom::prop("a"), &lit).unwrap().is_some());
        assert!(find_support(&fw, &tr, 1, &GroundAtom::prop("a"), &VerifyConfig::default()).unwrap().is_none());
    }

    #[test]
    fn frame_axioms_flag_vanishing_fluent() {
        let fw = parse_framework(include_str!("../../fixtures/fig2.kelps")).unwrap();
        let mut tr = Trace::build(&fw, &tl(&[(3, &["see-wolf"])]), &Timeline::new(), 5, MatchMode::Subset);
        assert!(check_frame_axioms(&fw, &tr, MatchMode::Subset).is_empty());
        tr.states[3].clear();
        let v = check_frame_axioms(&fw, &tr, MatchMode::Subset);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].t, v[0].axiom), (3, FrameAxiom::Persists));
    }

    #[test]
    fn frame_axioms_depend_on_match_mode() {
        let fw = parse_framework(include_str!("../../fixtures/fig2.kelps")).unwrap();
        let tr = Trace::build(&fw, &Timeline::new(), &tl(&[(1, &["go-inside", "cry-wolf"])]), 2, MatchMode::Subset);
        assert!(check_frame_axioms(&fw, &tr, MatchMode::Subset).is_empty());
        assert!(!check_frame_axioms(&fw, &tr, MatchMode::Exact).is_empty());
    }
}
