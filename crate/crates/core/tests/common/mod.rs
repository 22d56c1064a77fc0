//! Shared helpers for the integration and acceptance suites: fixture
//! loading, strategy sets, and independent generators and oracles.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use kelps::engine::{parse_events, run, Deterministic, EngineConfig, Maximal, RandomStrategy, RunResult, Strategy as Policy};
use kelps::model::{Timeline, Trace};
use kelps::state::MatchMode;
use kelps::syntax::{name, parse_framework, validate_framework, Atom, Complex, FolCondition, Formula, Framework, GroundAtom, PredKind, SortRef, Term, TimeExpr, Value};
use kelps::temporal::{eval_ground_constraints, Constraint, TimeBinding};
use proptest::prelude::*;

pub fn fixture(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(file)
}

pub fn read(file: &str) -> String {
    std::fs::read_to_string(fixture(file)).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn load(file: &str) -> Framework {
    let fw = parse_framework(&read(file)).unwrap_or_else(|e| panic!("{file}: {e}"));
    assert!(validate_framework(&fw).is_ok(), "{file} does not validate");
    fw
}

pub fn events(file: &str, fw: &Framework) -> Timeline {
    parse_events(&read(file), fw).unwrap_or_else(|e| panic!("{file}: {e}"))
}

pub fn trace(file: &str, fw: &Framework) -> Trace {
    Trace::from_jsonl(&read(file), fw).unwrap_or_else(|e| panic!("{file}: {e}"))
}

/// Deterministic, first-disjunct, maximal and `randoms` seeded random strategies.
pub fn strategies(seed: u64, randoms: u64) -> Vec<(String, Box<dyn Policy>)> {
    let mut out: Vec<(String, Box<dyn Policy>)> = vec![
        ("det".into(), Box::new(Deterministic::default())),
        ("det:first-disjunct".into(), Box::new(Deterministic { first_disjunct: true })),
        ("exhaustive".into(), Box::new(Maximal)),
    ];
    for k in 0..randoms {
        let s = seed.wrapping_mul(1_000_003).wrapping_add(k);
        out.push((format!("rand:{s}"), Box::new(RandomStrategy::new(s))));
    }
    out
}

pub fn run_with(fw: &Framework, ext: &Timeline, horizon: u32, prune: bool, strategy: &mut dyn Policy) -> RunResult {
    let mut cfg = EngineConfig::new(horizon);
    cfg.prune = prune;
    run(fw, ext, cfg, strategy).expect("run")
}

pub fn fig1_timeline(items: &[(u32, &str)]) -> Timeline {
    let mut out = Timeline::new();
    for (t, a) in items {
        out.entry(*t).or_default().insert(GroundAtom::prop(a));
    }
    out
}

/// Frameworks with traces to evaluate complexes over: fixture runs and the
/// hand-written traces.
pub fn trace_corpus() -> Vec<(String, Framework, Trace)> {
    let mut out = Vec::new();
    let fig1 = load("fig1.kelps");
    for f in ["reactive.trace", "proactive.trace", "irrelevant.trace"] {
        out.push((f.to_string(), fig1.clone(), trace(f, &fig1)));
    }
    let fig2 = load("fig2.kelps");
    out.push(("preventative.trace".into(), fig2.clone(), trace("preventative.trace", &fig2)));
    let ext = events("fig2.events", &fig2);
    out.push(("fig2 run".into(), fig2.clone(), run_with(&fig2, &ext, 5, true, &mut Deterministic::default()).trace));
    let fig3 = load("fig3.kelps");
    let ext = events("order.events", &fig3);
    let t = run_with(&fig3, &ext, 6, true, &mut Deterministic { first_disjunct: true }).trace;
    out.push(("fig3 run".into(), fig3, t));
    let shop = load("fig3-shop.kelps");
    let ext = events("two-orders.events", &shop);
    let t = run_with(&shop, &ext, 6, true, &mut Maximal).trace;
    out.push(("fig3-shop run".into(), shop, t));
    out
}

// Temporal constraints.

pub const TIME_VARS: [&str; 4] = ["A", "B", "C", "D"];

fn time_expr(nvars: usize) -> impl Strategy<Value = TimeExpr> {
    prop_oneof![
        (0..nvars, -2i64..=2).prop_map(|(v, o)| TimeExpr { var: Some(name(TIME_VARS[v])), offset: o }),
        (0i64..=9).prop_map(TimeExpr::constant),
    ]
}

fn constraint(nvars: usize) -> impl Strategy<Value = Constraint> {
    let e = move || time_expr(nvars);
    prop_oneof![
        3 => (e(), e()).prop_map(|(a, b)| Constraint::Lt(a, b)),
        3 => (e(), e()).prop_map(|(a, b)| Constraint::Le(a, b)),
        2 => (e(), e()).prop_map(|(a, b)| Constraint::Eq(a, b)),
        1 => (e(), e(), e()).prop_map(|(a, b, c)| Constraint::Max(a, b, c)),
        1 => (e(), e(), e()).prop_map(|(a, b, c)| Constraint::Min(a, b, c)),
    ]
}

/// A constraint set over at most four time variables, a partial binding of
/// some of them, and a horizon of at most 8.
pub fn constraint_case() -> impl Strategy<Value = (Vec<Constraint>, TimeBinding, u32)> {
    (1usize..=4).prop_flat_map(|n| {
        (
            prop::collection::vec(constraint(n), 0..=5),
            prop::collection::btree_map((0..n).prop_map(|v| name(TIME_VARS[v])), 0u32..=8, 0..=1),
            0u32..=8,
        )
    })
}

/// Every completion of `partial` over `vars` within `0..=horizon` satisfying
/// `cs`, by enumerating all bindings in lexicographic order.
pub fn brute_solutions(cs: &[Constraint], vars: &BTreeSet<kelps::syntax::Name>, partial: &TimeBinding, horizon: u32) -> Vec<TimeBinding> {
    let free: Vec<_> = vars.iter().filter(|v| !partial.contains_key(*v)).cloned().collect();
    let mut out = Vec::new();
    let mut vals = vec![0u32; free.len()];
    loop {
        let mut b = partial.clone();
        b.extend(free.iter().cloned().zip(vals.iter().copied()));
        if eval_ground_constraints(cs, &b).expect("all bound") {
            out.push(b);
        }
        // Odometer with the last variable fastest: lexicographic in name order.
        let mut k = free.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            if vals[k] < horizon {
                vals[k] += 1;
                for v in &mut vals[k + 1..] {
                    *v = 0;
                }
                break;
            }
        }
    }
}

pub fn constraint_vars(cs: &[Constraint]) -> BTreeSet<kelps::syntax::Name> {
    cs.iter().flat_map(|c| c.vars()).collect()
}

/// Two complexes of stamps and constraints for a sequencing query.
pub fn sequencing_case() -> impl Strategy<Value = (Complex, Complex, bool, u32)> {
    let stamps = || prop::collection::vec(time_expr(4), 1..=2);
    let cons = || prop::collection::vec(constraint(4), 0..=2);
    (stamps(), cons(), stamps(), cons(), any::<bool>(), 0u32..=8).prop_map(|(se, ce, sl, cl, strict, h)| {
        let cx = |ss: Vec<TimeExpr>, cs: Vec<Constraint>| Complex {
            conditions: ss
                .into_iter()
                .map(|s| FolCondition {
                    vars: s.var.iter().map(|v| (v.clone(), SortRef::Time)).collect(),
                    formula: Formula::True,
                    stamp: Some(s),
                })
                .collect(),
            constraints: cs,
        };
        (cx(se, ce), cx(sl, cl), strict, h)
    })
}

/// The sequencing query as a plain constraint set: both complexes'
/// constraints plus every earlier stamp ordered before every later one.
pub fn sequencing_constraints(e: &Complex, l: &Complex, strict: bool) -> Vec<Constraint> {
    let mut cs: Vec<Constraint> = e.constraints.iter().chain(&l.constraints).cloned().collect();
    for a in e.stamps() {
        for b in l.stamps() {
            cs.push(if strict { Constraint::Lt(a.clone(), b) } else { Constraint::Le(a.clone(), b) });
        }
    }
    cs
}

pub fn sequencing_vars(e: &Complex, l: &Complex) -> BTreeSet<kelps::syntax::Name> {
    let mut vars = constraint_vars(&sequencing_constraints(e, l, true));
    vars.extend(e.stamps().into_iter().chain(l.stamps()).filter_map(|s| s.var));
    vars
}

// Ground complexes over a trace.

fn sort_values(fw: &Framework, s: &SortRef) -> Vec<Value> {
    match s {
        SortRef::Named(n) => fw.sorts[n].iter().map(|c| Value::Sym(c.clone())).collect(),
        SortRef::Any => fw.all_constants().into_iter().map(Value::Sym).collect(),
        SortRef::Time => Vec::new(),
    }
}

fn term(v: &Value) -> Term {
    match v {
        Value::Sym(c) => Term::Const(c.clone()),
        Value::Time(t) => Term::Time(TimeExpr::constant(*t as i64)),
    }
}

fn stamped(pred: &kelps::syntax::Name, args: Vec<Term>, kind: PredKind, t: u32) -> Atom {
    let stamp = (kind != PredKind::Aux).then(|| TimeExpr::constant(t as i64));
    Atom { pred: pred.clone(), args, stamp }
}

/// Leaf formulas at time `t`: every ground atom of the vocabulary (atoms
/// true in the frame weighted up), constants, and one-variable quantified atoms.
fn leaves(fw: &Framework, tr: &Trace, t: u32) -> Vec<Formula> {
    let mut out = vec![Formula::True, Formula::False];
    let frame = tr.frame(t);
    for d in fw.preds.values() {
        if d.args.contains(&SortRef::Time) {
            continue;
        }
        let mut combos: Vec<Vec<Value>> = vec![Vec::new()];
        for s in &d.args {
            let vals = sort_values(fw, s);
            combos = combos.into_iter().flat_map(|c| vals.iter().map(move |v| [c.clone(), vec![v.clone()]].concat())).collect();
        }
        for c in combos {
            let g = GroundAtom { pred: d.name.clone(), args: c.clone() };
            let a = Formula::Atom(stamped(&d.name, c.iter().map(term).collect(), d.kind, t));
            let weight = if frame.contains(Some(d.kind), &g) { 4 } else { 1 };
            out.extend(std::iter::repeat_n(a, weight));
        }
        if let Some(first) = d.args.first() {
            let x = name("x");
            let mut args = vec![Term::Var(x.clone())];
            let rest: Vec<Value> = d.args[1..].iter().map(|s| sort_values(fw, s)[0].clone()).collect();
            args.extend(rest.iter().map(term));
            let body = Box::new(Formula::Atom(stamped(&d.name, args, d.kind, t)));
            out.push(Formula::Exists(x.clone(), first.clone(), body.clone()));
            out.push(Formula::Forall(x, first.clone(), body));
        }
    }
    out
}

fn formula(leaves: Vec<Formula>) -> impl Strategy<Value = Formula> {
    prop::sample::select(leaves).prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(|f| Formula::Not(Box::new(f))),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::And),
            prop::collection::vec(inner.clone(), 2..=3).prop_map(Formula::Or),
            (inner.clone(), inner).prop_map(|(a, b)| Formula::Implies(Box::new(a), Box::new(b))),
        ]
    })
}

pub fn ground_condition(leaves_at: &BTreeMap<u32, Vec<Formula>>, t: u32) -> impl Strategy<Value = FolCondition> {
    formula(leaves_at[&t].clone()).prop_map(move |f| FolCondition {
        formula: f,
        stamp: Some(TimeExpr::constant(t as i64)),
        vars: BTreeMap::new(),
    })
}

pub fn leaves_by_time(fw: &Framework, tr: &Trace) -> BTreeMap<u32, Vec<Formula>> {
    (0..=tr.horizon()).map(|t| (t, leaves(fw, tr, t))).collect()
}

/// A ground complex of one to three conditions at arbitrary times of the
/// trace, plus up to two ground temporal constraints.
pub fn ground_complex(leaves_at: BTreeMap<u32, Vec<Formula>>) -> impl Strategy<Value = Complex> {
    let n = *leaves_at.keys().max().expect("nonempty");
    let ground = (0i64..=6, 0i64..=6, 0..3u8).prop_map(|(a, b, k)| {
        let (a, b) = (TimeExpr::constant(a), TimeExpr::constant(b));
        match k {
            0 => Constraint::Lt(a, b),
            1 => Constraint::Le(a, b),
            _ => Constraint::Eq(a, b),
        }
    });
    (prop::collection::vec(0..=n, 1..=3), prop::collection::vec(ground, 0..=2)).prop_flat_map(move |(ts, cons)| {
        let conds: Vec<_> = ts.iter().map(|&t| ground_condition(&leaves_at, t)).collect();
        conds.prop_map(move |conditions| Complex { conditions, constraints: cons.clone() })
    })
}

/// One to three ground conditions sharing the timestamp `t`.
pub fn single_time_conjunction(leaves_at: BTreeMap<u32, Vec<Formula>>) -> impl Strategy<Value = (u32, Vec<FolCondition>)> {
    let n = *leaves_at.keys().max().expect("nonempty");
    (0..=n, 1usize..=3).prop_flat_map(move |(t, k)| {
        let conds: Vec<_> = (0..k).map(|_| ground_condition(&leaves_at, t)).collect();
        (Just(t), conds)
    })
}

pub fn latest_stamp(cx: &Complex) -> u32 {
    cx.conditions.iter().filter_map(|c| c.stamp.as_ref()).map(|s| s.offset as u32).max().unwrap_or(0)
}

pub fn match_mode() -> MatchMode {
    MatchMode::Subset
}
