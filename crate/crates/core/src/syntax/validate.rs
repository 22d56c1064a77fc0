//! Load-time well-formedness checks for rules and preconditions.

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{Atom, Complex, FolCondition, Formula, Framework, Name, PredKind, ReactiveRule, SortRef, Term};
use crate::temporal::{self, Constraint, TimeBinding};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    TimestampOrdering,
    DanglingConstraintVar,
    NonAnchoredConstraint,
    RangeRestriction,
    ConditionTimestamps,
    QuantifiedTimestamp,
    PreconditionShape,
    /// Warning only: a quantifier ranges over time (a reference time).
    TimeQuantifier,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Rule index, or `None` for preconditions.
    pub rule: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.rule {
            Some(r) => write!(f, "rule {r}: {}", self.message),
            None => write!(f, "precondition: {}", self.message),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// A way of writing a consequent disjunct as `earlier & act & rest`.
/// Indices refer to the disjunct's conditions; `rest` also holds the act's
/// own condition when it carries more than the action atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub earlier: Vec<usize>,
    pub rest: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BareAction {
    pub disjunct: usize,
    /// Index of the condition containing the action as a top-level conjunct.
    pub condition: usize,
    pub atom: Atom,
    /// Admissible splits, in subset-enumeration order (smaller `earlier` first).
    pub splits: Vec<Split>,
}

/// Positive action atoms that are top-level conjuncts of the condition.
pub(crate) fn action_conjuncts<'a>(fw: &Framework, c: &'a FolCondition) -> Vec<&'a Atom> {
    c.formula
        .conjuncts()
        .into_iter()
        .filter_map(|f| match f {
            Formula::Atom(a) if fw.kind(&a.pred) == Some(PredKind::Action) => Some(a),
            _ => None,
        })
        .collect()
}

fn sub_complex(d: &Complex, idx: &[usize], with_constraints: bool) -> Complex {
    Complex {
        conditions: idx.iter().map(|&i| d.conditions[i].clone()).collect(),
        constraints: if with_constraints { d.constraints.clone() } else { Vec::new() },
    }
}

/// Bare action atoms of every consequent disjunct with their admissible
/// `earlier`/`rest` splits.
pub fn bare_actions(fw: &Framework, rule: &ReactiveRule) -> Vec<BareAction> {
    let bound = fw.solver_bound(0);
    let mut out = Vec::new();
    for (di, d) in rule.consequents.iter().enumerate() {
        for (ci, c) in d.conditions.iter().enumerate() {
            for atom in action_conjuncts(fw, c) {
                let others: Vec<usize> = (0..d.conditions.len()).filter(|&k| k != ci).collect();
                let mut splits = Vec::new();
                let n = others.len().min(16);
                for mask in 0u32..(1 << n) {
                    let earlier: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| others[b]).collect();
                    let mut rest: Vec<usize> = (0..n).filter(|b| mask & (1 << b) == 0).map(|b| others[b]).collect();
                    rest.push(ci);
                    rest.sort_unstable();
                    let mut before = rule.antecedent.clone();
                    before.conditions.extend(sub_complex(d, &earlier, false).conditions);
                    let after = sub_complex(d, &rest, true);
                    if temporal::admits_sequencing(&before, &after, true, &TimeBinding::new(), bound).is_some() {
                        splits.push(Split { earlier, rest });
                    }
                }
                splits.sort_by_key(|s| s.earlier.len());
                out.push(BareAction { disjunct: di, condition: ci, atom: atom.clone(), splits });
            }
        }
    }
    out
}

/// Time variables that occur in some condition of `cx`, closed under the
/// functional constraints.
fn anchored_time_vars(cx: &Complex) -> BTreeSet<Name> {
    let mut known = BTreeSet::new();
    for c in &cx.conditions {
        for a in c.formula.atoms() {
            if let Some(v) = a.stamp.as_ref().and_then(|s| s.var.clone()) {
                known.insert(v);
            }
            for t in &a.args {
                if let Term::Time(te) = t {
                    if let Some(v) = &te.var {
                        known.insert(v.clone());
                    }
                }
            }
        }
    }
    loop {
        let before = known.len();
        for k in &cx.constraints {
            match k {
                Constraint::Max(a, b, out) | Constraint::Min(a, b, out) => {
                    let ins = [a, b].iter().all(|e| e.var.as_ref().is_none_or(|v| known.contains(v)));
                    if ins {
                        if let Some(v) = &out.var {
                            known.insert(v.clone());
                        }
                    }
                }
                Constraint::Eq(a, b) => {
                    let ka = a.var.as_ref().is_none_or(|v| known.contains(v));
                    let kb = b.var.as_ref().is_none_or(|v| known.contains(v));
                    if ka {
                        if let Some(v) = &b.var {
                            known.insert(v.clone());
                        }
                    }
                    if kb {
                        if let Some(v) = &a.var {
                            known.insert(v.clone());
                        }
                    }
                }
                _ => {}
            }
        }
        if known.len() == before {
            return known;
        }
    }
}

fn join(a: &Complex, b: &Complex) -> Complex {
    let mut c = a.clone();
    c.conditions.extend(b.conditions.iter().cloned());
    c.constraints.extend(b.constraints.iter().cloned());
    c
}

fn check_condition(c: &FolCondition, rule: Option<usize>, report: &mut ValidationReport) {
    let stamps = c.stamps();
    if stamps.len() != 1 {
        report.violations.push(Violation {
            kind: ViolationKind::ConditionTimestamps,
            rule,
            message: format!("condition `{c}` has {} distinct timestamps, expected exactly one", stamps.len()),
        });
    }
    let quantified = c.formula.quantified_vars();
    for s in &stamps {
        if let Some(v) = &s.var {
            if quantified.iter().any(|(q, _)| q == v) {
                report.violations.push(Violation {
                    kind: ViolationKind::QuantifiedTimestamp,
                    rule,
                    message: format!("timestamp variable `{v}` is bound by a quantifier in `{c}`"),
                });
            }
        }
    }
    for (q, s) in quantified {
        if s == SortRef::Time {
            report.warnings.push(Violation {
                kind: ViolationKind::TimeQuantifier,
                rule,
                message: format!("quantifier over time variable `{q}` is bounded by the run horizon"),
            });
        }
    }
}

fn check_rule(fw: &Framework, r: &ReactiveRule, report: &mut ValidationReport) {
    let rule = Some(r.index);
    for c in r.antecedent.conditions.iter().chain(r.consequents.iter().flat_map(|d| &d.conditions)) {
        check_condition(c, rule, report);
    }
    let dangling = |cx: &Complex, ks: &[Constraint], report: &mut ValidationReport| {
        let anchored = anchored_time_vars(cx);
        for k in ks {
            for v in k.vars() {
                if !anchored.contains(&v) {
                    report.violations.push(Violation {
                        kind: ViolationKind::DanglingConstraintVar,
                        rule,
                        message: format!("variable `{v}` in constraint `{k}` is not a time parameter of any condition"),
                    });
                }
            }
        }
    };
    dangling(&r.antecedent, &r.antecedent.constraints, report);
    let bound = fw.solver_bound(0);
    for (di, d) in r.consequents.iter().enumerate() {
        let whole = join(&r.antecedent, d);
        dangling(&whole, &d.constraints, report);

        let cons_vars: BTreeSet<Name> = d.stamps().into_iter().filter_map(|s| s.var).collect();
        for k in &d.constraints {
            if k.vars().is_disjoint(&cons_vars) {
                report.violations.push(Violation {
                    kind: ViolationKind::NonAnchoredConstraint,
                    rule,
                    message: format!("consequent constraint `{k}` anchors no consequent timestamp (disjunct {di})"),
                });
            }
        }

        // Every consequent stamp must be >= every antecedent stamp under all
        // constraint-satisfying assignments: look for a counterexample.
        let mut anchors: Vec<Constraint> = whole.stamps().into_iter().map(|s| Constraint::Le(s.clone(), s)).collect();
        anchors.extend(whole.constraints.iter().cloned());
        'outer: for a in r.antecedent.stamps() {
            for c in d.stamps() {
                let mut cs = anchors.clone();
                cs.push(Constraint::Lt(c.clone(), a.clone()));
                if temporal::satisfiable(&cs, &TimeBinding::new(), bound) {
                    report.violations.push(Violation {
                        kind: ViolationKind::TimestampOrdering,
                        rule,
                        message: format!("consequent timestamp `{c}` may precede antecedent timestamp `{a}` (disjunct {di})"),
                    });
                    break 'outer;
                }
            }
        }
    }
    for ba in bare_actions(fw, r) {
        let mut needed = BTreeSet::new();
        for t in &ba.atom.args {
            if let Term::Var(v) = t {
                needed.insert(v.clone());
            }
        }
        if needed.is_empty() {
            continue;
        }
        let d = &r.consequents[ba.disjunct];
        let ok = ba.splits.iter().any(|s| {
            let mut before = r.antecedent.vars();
            for &i in &s.earlier {
                before.extend(d.conditions[i].free_vars());
            }
            needed.is_subset(&before)
        });
        if !ok {
            report.violations.push(Violation {
                kind: ViolationKind::RangeRestriction,
                rule,
                message: format!("bare action `{}` has variables not bound by any earlier condition", ba.atom),
            });
        }
    }
}

fn check_pre(fw: &Framework, p: &super::PreConstraint, report: &mut ValidationReport) {
    for c in &p.body {
        check_condition(c, None, report);
    }
    let mut bad = |msg: String| {
        report.violations.push(Violation { kind: ViolationKind::PreconditionShape, rule: None, message: msg });
    };
    let stamps: Vec<_> = p.body.iter().filter_map(|c| c.stamp.clone()).collect();
    let vars: BTreeSet<_> = stamps.iter().map(|s| s.var.clone()).collect();
    if vars.len() > 1 {
        bad(format!("`{p}` mixes timestamp variables"));
        return;
    }
    let Some((_, now)) = p.now_offset() else {
        bad(format!("`{p}` has no timestamped condition"));
        return;
    };
    if stamps.iter().any(|s| s.offset != now && s.offset != now - 1) {
        bad(format!("`{p}` refers to times other than T-1 and T"));
    }
    for c in p.events_part() {
        if c.formula.atoms().iter().any(|a| fw.kind(&a.pred) == Some(PredKind::Fluent)) {
            bad(format!("events part `{c}` of `{p}` mentions a fluent"));
        }
    }
}

/// Checks every rule and precondition of `fw`.
pub fn validate_framework(fw: &Framework) -> ValidationReport {
    let mut report = ValidationReport::default();
    for r in &fw.rules {
        check_rule(fw, r, &mut report);
    }
    for p in &fw.causal.pre {
        check_pre(fw, p, &mut report);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_framework;

    #[test]
    fn unanchored_consequent_constraint() {
        let fw = parse_framework("events { p/0 } actions { q/0 } rules { p(T1) -> q(T2) & T1 < 10 & T1 < T2 }").unwrap();
        let r = validate_framework(&fw);
        assert!(r.has(ViolationKind::NonAnchoredConstraint), "{r:?}");
        assert_eq!(r.violations.len(), 1);
    }

    #[test]
    fn consequent_before_antecedent() {
        let fw = parse_framework("events { p/0 } actions { q/0 } rules { p(T1) -> q(T2) & T2 < T1 }").unwrap();
        assert!(validate_framework(&fw).has(ViolationKind::TimestampOrdering));
        let ok = parse_framework("events { p/0 } actions { q/0 } rules { p(T) -> q(T+1) }").unwrap();
        assert!(validate_framework(&ok).is_ok());
    }

    #[test]
    fn unbounded_action_variable() {
        let fw = parse_framework("sorts { s: {a} } events { p/0 } actions { act(s) } rules { p(T1) -> act(X, T2) & T1 < T2 }").unwrap();
        assert!(validate_framework(&fw).has(ViolationKind::RangeRestriction));
    }

    #[test]
    fn dangling_constraint_variable() {
        let fw = parse_framework("events { p/0 } actions { q/0 } rules { p(T1) -> q(T2) & T1 < T2 & T2 < T9 }").unwrap();
        assert!(validate_framework(&fw).has(ViolationKind::DanglingConstraintVar));
    }

    #[test]
    fn two_timestamps_in_one_condition() {
        let fw = parse_framework("events { p/0 } actions { q/0 } rules { (p(T) & p(T+1)) -> q(T+2) }").unwrap();
        assert!(validate_framework(&fw).has(ViolationKind::ConditionTimestamps));
    }

    #[test]
    fn negated_action_is_not_bare() {
        let fw = parse_framework("events { p/0 } actions { q/0, z/0 } rules { p(T) -> ~q(T+1) & z(T+2) }").unwrap();
        let ba = bare_actions(&fw, &fw.rules[0]);
        assert_eq!(ba.len(), 1);
        assert_eq!(&*ba[0].atom.pred, "z");
    }

    #[test]
    fn split_candidates_respect_order() {
        let fw = parse_framework("events { p/0 } actions { a/0, b/0 } rules { p(T1) -> a(T2) & b(T3) & T1 < T2 & T2 < T3 }").unwrap();
        let ba = bare_actions(&fw, &fw.rules[0]);
        // b can come after a; a cannot come after b.
        let a = &ba[0];
        assert!(a.splits.iter().all(|s| s.earlier.is_empty()));
        let b = &ba[1];
        assert_eq!(b.splits.len(), 2);
    }
}
