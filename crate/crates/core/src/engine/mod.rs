//! The operational cycle: residual rules R_i, goal forest G_i, and the four
//! steps that turn them plus external events into a trace.

mod events;
mod explore;
mod strategy;

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

pub use events::{parse_events, EventFileError};
pub use explore::{explore, ExploreConfig, ExploreResult};
pub use strategy::{
    maximal_passing, Deterministic, Maximal, Recorder, RandomStrategy, Script, ScriptError, Scripted, Selection, Step2View, Step3View,
    Step4View, Strategy, StrategySpec,
};

use crate::model::{eval_condition, time_part, Binding, EvalCtx, EvalError, Frame, Timeline, Trace};
use crate::state::{check_preconditions, succ, EventSet, MatchMode, PreViolation, State};
use crate::syntax::{action_conjuncts, Complex, FolCondition, Formula, Framework, GroundAtom, Name, TimeExpr, Value};
use crate::temporal::{self, Constraint, TimeBinding};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("strategy chose an invalid selection at cycle {cycle}: {msg}")]
    Selection { cycle: u32, msg: String },
}

/// A partially evaluated rule in R_i: the source rule's antecedent
/// conditions and constraints still to be recognised, under `binding`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Residual {
    pub rule: usize,
    pub binding: Binding,
    pub conds: Vec<usize>,
    pub cons: Vec<usize>,
}

/// A node of a goal tree: the remainder of one consequent disjunct.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GoalClause {
    pub id: usize,
    pub tree: usize,
    pub parent: Option<usize>,
    pub disjunct: usize,
    pub binding: Binding,
    pub conds: Vec<usize>,
    pub cons: Vec<usize>,
    pub created: u32,
}

impl GoalClause {
    /// The clause `true`: nothing left to make true.
    pub fn is_true(&self) -> bool {
        self.conds.is_empty() && self.cons.is_empty()
    }

    fn key(&self) -> (usize, usize, &Binding, &[usize], &[usize]) {
        (self.tree, self.disjunct, &self.binding, &self.conds, &self.cons)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GoalTree {
    pub id: usize,
    pub rule: usize,
    #[serde(serialize_with = "ser_binding")]
    pub binding: Binding,
    pub opened: u32,
    pub achieved: Option<u32>,
}

fn ser_binding<S: serde::Serializer>(b: &Binding, s: S) -> Result<S::Ok, S::Error> {
    s.collect_map(b.iter().map(|(k, v)| (k.to_string(), v.to_string())))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EngineConfig {
    pub horizon: u32,
    pub mode: MatchMode,
    /// Drop timed-out residual rules and goal clauses after each cycle.
    pub prune: bool,
    /// Retire goal trees once achieved.
    pub dedup_step2: bool,
}

impl EngineConfig {
    pub fn new(horizon: u32) -> Self {
        EngineConfig { horizon, mode: MatchMode::Subset, prune: true, dedup_step2: false }
    }
}

/// One step-2 choice: evaluate `cur` of a clause at the current time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Evaluation {
    pub clause: usize,
    pub cur: Vec<usize>,
    pub theta: Binding,
    pub later_conds: Vec<usize>,
    pub later_cons: Vec<usize>,
}

/// One step-3 choice: actions at i+1 from one clause instance.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActionOption {
    pub clause: usize,
    pub tau: TimeBinding,
    pub actions: BTreeSet<GroundAtom>,
}

/// Conditions evaluated now, the binding they produce, and the condition
/// and constraint indices left for later.
type Sequencing = (Vec<usize>, Binding, Vec<usize>, Vec<usize>);

/// `(rule, disjunct)` for a complex, and which side of the rule it sits on.
#[derive(Clone, Copy)]
enum Part {
    Antecedent(usize),
    Disjunct(usize, usize),
}

#[derive(Clone, Debug)]
pub struct EngineState {
    pub time: u32,
    pub state: State,
    pub last: EventSet,
    pub residuals: BTreeSet<Residual>,
    pub trees: BTreeMap<usize, GoalTree>,
    pub clauses: BTreeMap<usize, GoalClause>,
    next_id: usize,
}

/// Why a run stopped before its horizon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Halt {
    /// The cycle whose external events violated the preconditions on their own.
    pub time: u32,
    pub violations: Vec<PreViolation>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub trace: Trace,
    pub trees: Vec<GoalTree>,
    pub halted: Option<Halt>,
    /// Final engine state (after the closing evaluation at the horizon).
    pub engine: EngineState,
}

impl RunResult {
    /// Every goal tree opened during the run was achieved within the horizon.
    pub fn all_achieved(&self) -> bool {
        self.trees.iter().all(|t| t.achieved.is_some())
    }
}

pub struct Engine<'a> {
    pub fw: &'a Framework,
    pub cfg: EngineConfig,
    ctx: EvalCtx<'a>,
    bound: u32,
}

fn stamp_le(a: i64, s: &TimeExpr) -> Constraint {
    Constraint::Le(TimeExpr::constant(a), s.clone())
}

fn anchors<'c>(stamps: impl IntoIterator<Item = &'c TimeExpr>) -> Vec<Constraint> {
    stamps.into_iter().filter(|s| s.var.is_some()).map(|s| Constraint::Le(s.clone(), s.clone())).collect()
}

impl<'a> Engine<'a> {
    pub fn new(fw: &'a Framework, cfg: EngineConfig) -> Self {
        Engine { fw, cfg, ctx: EvalCtx::new(fw, cfg.horizon), bound: fw.solver_bound(cfg.horizon) }
    }

    fn complex(&self, p: Part) -> &'a Complex {
        match p {
            Part::Antecedent(r) => &self.fw.rules[r].antecedent,
            Part::Disjunct(r, d) => &self.fw.rules[r].consequents[d],
        }
    }

    /// G_0 and R_0.
    pub fn init(&self) -> EngineState {
        let mut es = EngineState {
            time: 0,
            state: self.fw.initial.clone(),
            last: EventSet::default(),
            residuals: BTreeSet::new(),
            trees: BTreeMap::new(),
            clauses: BTreeMap::new(),
            next_id: 0,
        };
        for r in &self.fw.rules {
            if r.antecedent.is_empty() {
                self.open_tree(&mut es, r.index, Binding::new(), 0);
            } else {
                es.residuals.insert(Residual {
                    rule: r.index,
                    binding: Binding::new(),
                    conds: (0..r.antecedent.conditions.len()).collect(),
                    cons: (0..r.antecedent.constraints.len()).collect(),
                });
            }
        }
        es
    }

    fn open_tree(&self, es: &mut EngineState, rule: usize, binding: Binding, at: u32) {
        let id = es.next_id;
        es.next_id += 1;
        es.trees.insert(id, GoalTree { id, rule, binding: binding.clone(), opened: at, achieved: None });
        let tb = time_part(&binding);
        for (di, d) in self.fw.rules[rule].consequents.iter().enumerate() {
            let mut cs = d.constraints.clone();
            cs.extend(anchors(&d.stamps()));
            if temporal::satisfiable(&cs, &tb, self.bound) {
                let cid = es.next_id;
                es.next_id += 1;
                es.clauses.insert(
                    cid,
                    GoalClause {
                        id: cid,
                        tree: id,
                        parent: None,
                        disjunct: di,
                        binding: binding.clone(),
                        conds: (0..d.conditions.len()).collect(),
                        cons: (0..d.constraints.len()).collect(),
                        created: at,
                    },
                );
            }
        }
    }

    pub fn frame<'s>(&self, es: &'s EngineState) -> Frame<'s>
    where
        'a: 's,
    {
        Frame { time: es.time, state: &es.state, ext: &es.last.ext, acts: &es.last.acts, aux: &self.fw.aux }
    }

    /// Every sequencing `current < later` of the given remainder with
    /// `current` non-empty, true in the current frame, and stamped `i`.
    fn sequencings(
        &self,
        es: &EngineState,
        part: Part,
        binding: &Binding,
        conds: &[usize],
        cons: &[usize],
    ) -> Result<Vec<Sequencing>, EvalError> {
        let cx = self.complex(part);
        let i = es.time as i64;
        let frame = self.frame(es);
        // Conditions that could be stamped i.
        let now: Vec<usize> = conds
            .iter()
            .copied()
            .filter(|&k| match &cx.conditions[k].stamp {
                Some(s) => match s.var.as_ref().and_then(|v| binding.get(v)) {
                    Some(Value::Time(t)) => *t as i64 + s.offset == i,
                    Some(Value::Sym(_)) => false,
                    None if s.var.is_none() => s.offset == i,
                    None => i - s.offset >= 0,
                },
                None => false,
            })
            .collect();
        let mut out = Vec::new();
        let n = now.len().min(20);
        for mask in 1u32..(1 << n) {
            let cur: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).map(|b| now[b]).collect();
            let mut thetas = vec![binding.clone()];
            for &k in &cur {
                let c = &cx.conditions[k];
                let mut next = Vec::new();
                for b in &thetas {
                    next.extend(eval_condition(&self.ctx, c, &frame, b)?);
                }
                thetas = next;
                if thetas.is_empty() {
                    break;
                }
            }
            let later_conds: Vec<usize> = conds.iter().copied().filter(|k| !cur.contains(k)).collect();
            'theta: for theta in thetas {
                let tb = time_part(&theta);
                let mut later_cons = Vec::new();
                for &k in cons {
                    let c = &cx.constraints[k];
                    let g = c.apply(&tb);
                    if g.is_ground() {
                        if !temporal::eval_ground_constraints(&[g], &TimeBinding::new()).unwrap_or(false) {
                            continue 'theta;
                        }
                    } else {
                        later_cons.push(k);
                    }
                }
                let later_stamps: Vec<TimeExpr> = later_conds.iter().filter_map(|&k| cx.conditions[k].stamp.clone()).collect();
                let mut cs: Vec<Constraint> = later_cons.iter().map(|&k| cx.constraints[k].clone()).collect();
                cs.extend(later_stamps.iter().map(|s| stamp_le(i + 1, s)));
                cs.extend(anchors(&later_stamps));
                if temporal::satisfiable(&cs, &tb, self.bound) {
                    out.push((cur.clone(), theta, later_conds.clone(), later_cons));
                }
            }
        }
        Ok(out)
    }

    /// Groundings of constraint-only remainders (functional outputs).
    fn close_constraints(&self, part: Part, binding: &Binding, cons: &[usize]) -> Vec<Binding> {
        if cons.is_empty() {
            return vec![binding.clone()];
        }
        let cx = self.complex(part);
        let cs: Vec<Constraint> = cons.iter().map(|&k| cx.constraints[k].clone()).collect();
        temporal::all_solutions(&cs, &time_part(binding), self.bound)
            .into_iter()
            .map(|sol| {
                let mut b = binding.clone();
                b.extend(sol.into_iter().map(|(k, v)| (k, Value::Time(v))));
                b
            })
            .collect()
    }

    /// Step 1: recognise antecedent conditions in the current frame.
    pub fn step1(&self, es: &mut EngineState) -> Result<(), EvalError> {
        let snapshot: Vec<Residual> = es.residuals.iter().cloned().collect();
        for r in snapshot {
            for (_, theta, later_conds, later_cons) in self.sequencings(es, Part::Antecedent(r.rule), &r.binding, &r.conds, &r.cons)? {
                if later_conds.is_empty() {
                    for b in self.close_constraints(Part::Antecedent(r.rule), &theta, &later_cons) {
                        self.open_tree(es, r.rule, b, es.time);
                    }
                } else {
                    es.residuals.insert(Residual { rule: r.rule, binding: theta, conds: later_conds, cons: later_cons });
                }
            }
        }
        Ok(())
    }

    /// Candidate step-2 evaluations, in clause order.
    pub fn step2_candidates(&self, es: &EngineState) -> Result<Vec<Evaluation>, EvalError> {
        let mut out = Vec::new();
        for c in es.clauses.values() {
            if c.is_true() {
                continue;
            }
            let rule = es.trees[&c.tree].rule;
            for (cur, theta, later_conds, later_cons) in self.sequencings(es, Part::Disjunct(rule, c.disjunct), &c.binding, &c.conds, &c.cons)? {
                out.push(Evaluation { clause: c.id, cur, theta, later_conds, later_cons });
            }
        }
        Ok(out)
    }

    /// Step 2: apply the chosen evaluations, adding children.
    pub fn step2_apply(&self, es: &mut EngineState, chosen: &[Evaluation]) {
        for ev in chosen {
            let Some(parent) = es.clauses.get(&ev.clause).cloned() else { continue };
            let rule = es.trees[&parent.tree].rule;
            let part = Part::Disjunct(rule, parent.disjunct);
            let children: Vec<(Binding, Vec<usize>, Vec<usize>)> = if ev.later_conds.is_empty() {
                self.close_constraints(part, &ev.theta, &ev.later_cons).into_iter().map(|b| (b, Vec::new(), Vec::new())).collect()
            } else {
                vec![(ev.theta.clone(), ev.later_conds.clone(), ev.later_cons.clone())]
            };
            for (binding, conds, cons) in children {
                let child = GoalClause {
                    id: es.next_id,
                    tree: parent.tree,
                    parent: Some(parent.id),
                    disjunct: parent.disjunct,
                    binding,
                    conds,
                    cons,
                    created: es.time,
                };
                if es.clauses.values().any(|c| c.key() == child.key()) {
                    continue;
                }
                es.next_id += 1;
                if child.is_true() {
                    let t = es.trees.get_mut(&parent.tree).expect("tree exists");
                    t.achieved.get_or_insert(es.time);
                }
                es.clauses.insert(child.id, child);
            }
        }
        if self.cfg.dedup_step2 {
            let done: BTreeSet<usize> = es.trees.values().filter(|t| t.achieved.is_some()).map(|t| t.id).collect();
            es.clauses.retain(|_, c| !done.contains(&c.tree));
        }
    }

    /// Step 3 options: for each clause, each grounding of action timestamps
    /// to i+1 whose actions can precede the rest of the clause.
    pub fn step3_options(&self, es: &EngineState) -> Vec<ActionOption> {
        let next = es.time as i64 + 1;
        let mut out = BTreeSet::new();
        for c in es.clauses.values() {
            if c.is_true() {
                continue;
            }
            let rule = es.trees[&c.tree].rule;
            let cx = &self.fw.rules[rule].consequents[c.disjunct];
            let bare: Vec<(usize, &FolCondition)> =
                c.conds.iter().map(|&k| (k, &cx.conditions[k])).filter(|(_, fc)| !action_conjuncts(self.fw, fc).is_empty()).collect();
            // Candidate values for each unbound action stamp variable.
            let mut choices: BTreeMap<Name, BTreeSet<u32>> = BTreeMap::new();
            for (_, fc) in &bare {
                if let Some(TimeExpr { var: Some(v), offset }) = &fc.stamp {
                    if !c.binding.contains_key(v) && next - offset >= 0 {
                        choices.entry(v.clone()).or_default().insert((next - offset) as u32);
                    }
                }
            }
            let vars: Vec<(Name, Vec<u32>)> = choices.into_iter().map(|(k, v)| (k, v.into_iter().collect())).collect();
            // Each variable is either left unbound or given one of its values.
            let mut taus: Vec<TimeBinding> = vec![TimeBinding::new()];
            for (v, vals) in &vars {
                let mut grown = Vec::new();
                for t in &taus {
                    grown.push(t.clone());
                    for val in vals {
                        let mut nt = t.clone();
                        nt.insert(v.clone(), *val);
                        grown.push(nt);
                    }
                }
                taus = grown;
            }
            for tau in taus {
                let mut b = c.binding.clone();
                b.extend(tau.iter().map(|(k, v)| (k.clone(), Value::Time(*v))));
                let mut actions = BTreeSet::new();
                let mut act_conds = BTreeSet::new();
                let mut used_vars = BTreeSet::new();
                for (k, fc) in &bare {
                    let Some(s) = &fc.stamp else { continue };
                    if crate::model::time_value(s, &b).ok() != Some(next) {
                        continue;
                    }
                    let mut any = false;
                    for a in action_conjuncts(self.fw, fc) {
                        if let Ok(Some(g)) = crate::model::ground_atom(a, &b) {
                            actions.insert(g);
                            any = true;
                        }
                    }
                    if any {
                        if let Some(v) = &s.var {
                            used_vars.insert(v.clone());
                        }
                        if matches!(fc.formula, Formula::Atom(_)) {
                            act_conds.insert(*k);
                        }
                    }
                }
                // tau binds all and only the stamp variables of the chosen actions.
                if actions.is_empty() || tau.keys().any(|v| !used_vars.contains(v)) {
                    continue;
                }
                let tb = time_part(&b);
                let rest: Vec<TimeExpr> =
                    c.conds.iter().filter(|k| !act_conds.contains(*k)).filter_map(|&k| cx.conditions[k].stamp.clone()).collect();
                let mut cs: Vec<Constraint> = c.cons.iter().map(|&k| cx.constraints[k].clone()).collect();
                cs.extend(rest.iter().map(|s| stamp_le(next, s)));
                cs.extend(anchors(&rest));
                if temporal::satisfiable(&cs, &tb, self.bound) {
                    out.insert(ActionOption { clause: c.id, tau, actions });
                }
            }
        }
        out.into_iter().collect()
    }

    /// Whether `acts` together with `ext` keeps the preconditions true.
    pub fn passes(&self, es: &EngineState, ext: &BTreeSet<GroundAtom>, acts: &BTreeSet<GroundAtom>) -> Result<Vec<PreViolation>, EvalError> {
        let next = EventSet { ext: ext.clone(), acts: acts.clone() };
        check_preconditions(self.fw, &self.frame(es), &next)
    }

    /// Step 4: commit events and move to i+1.
    pub fn step4_commit(&self, es: &mut EngineState, ext: BTreeSet<GroundAtom>, acts: BTreeSet<GroundAtom>) {
        let ev = EventSet { ext, acts };
        es.state = succ(&es.state, &ev.all(), &self.fw.causal, self.cfg.mode);
        es.last = ev;
        es.time += 1;
        if self.cfg.prune {
            self.prune(es);
        }
    }

    fn alive(&self, part: Part, binding: &Binding, conds: &[usize], cons: &[usize], now: i64) -> bool {
        let cx = self.complex(part);
        let stamps: Vec<TimeExpr> = conds.iter().filter_map(|&k| cx.conditions[k].stamp.clone()).collect();
        let mut cs: Vec<Constraint> = cons.iter().map(|&k| cx.constraints[k].clone()).collect();
        cs.extend(stamps.iter().map(|s| stamp_le(now, s)));
        cs.extend(anchors(&stamps));
        temporal::satisfiable(&cs, &time_part(binding), self.bound)
    }

    /// Drops residual rules and goal clauses that can no longer be completed.
    fn prune(&self, es: &mut EngineState) {
        let now = es.time as i64;
        es.residuals.retain(|r| self.alive(Part::Antecedent(r.rule), &r.binding, &r.conds, &r.cons, now));
        let trees = &es.trees;
        es.clauses.retain(|_, c| {
            c.is_true() || self.alive(Part::Disjunct(trees[&c.tree].rule, c.disjunct), &c.binding, &c.conds, &c.cons, now)
        });
    }

    /// Runs cycles 0..horizon-1, then evaluates antecedents and goal clauses
    /// once more at the horizon so goals completed there are recorded.
    pub fn run(&self, ext: &Timeline, strategy: &mut dyn Strategy) -> Result<RunResult, EngineError> {
        let mut es = self.init();
        let mut acts_tl = Timeline::new();
        let mut halted = None;
        let mut reached = self.cfg.horizon;
        for i in 0..self.cfg.horizon {
            self.step1(&mut es)?;
            self.cycle_step2(&mut es, strategy)?;
            let opts = self.step3_options(&es);
            let sel = strategy.step3(&Step3View { cycle: i, engine: &es, options: &opts });
            check_selection(i, &sel, opts.len())?;
            let mut cands = BTreeSet::new();
            for k in sel.iter() {
                cands.extend(opts[*k].actions.iter().cloned());
            }
            let cands: Vec<GroundAtom> = cands.into_iter().collect();
            let ext_next = ext.get(&(i + 1)).cloned().unwrap_or_default();
            let base = self.passes(&es, &ext_next, &BTreeSet::new())?;
            if !base.is_empty() {
                halted = Some(Halt { time: i + 1, violations: base });
                reached = i;
                break;
            }
            let err = RefCell::new(None);
            let check = |s: &BTreeSet<GroundAtom>| match self.passes(&es, &ext_next, s) {
                Ok(v) => v.is_empty(),
                Err(e) => {
                    err.borrow_mut().get_or_insert(e);
                    false
                }
            };
            let sel4 = strategy.step4(&Step4View { cycle: i, candidates: &cands, passes: &check });
            check_selection(i, &sel4, cands.len())?;
            let acts: BTreeSet<GroundAtom> = sel4.iter().map(|&k| cands[k].clone()).collect();
            if let Some(e) = err.into_inner() {
                return Err(e.into());
            }
            if !self.passes(&es, &ext_next, &acts)?.is_empty() {
                return Err(EngineError::Selection { cycle: i, msg: "chosen actions violate the preconditions".into() });
            }
            if !acts.is_empty() {
                acts_tl.insert(i + 1, acts.clone());
            }
            self.step4_commit(&mut es, ext_next, acts);
        }
        if halted.is_none() {
            self.step1(&mut es)?;
            self.cycle_step2(&mut es, strategy)?;
        }
        let ext_cut: Timeline = ext.range(..=reached).map(|(k, v)| (*k, v.clone())).collect();
        let trace = Trace::build(self.fw, &ext_cut, &acts_tl, reached, self.cfg.mode);
        Ok(RunResult { trace, trees: es.trees.values().cloned().collect(), halted, engine: es })
    }

    fn cycle_step2(&self, es: &mut EngineState, strategy: &mut dyn Strategy) -> Result<(), EngineError> {
        let cands = self.step2_candidates(es)?;
        let sel = strategy.step2(&Step2View { cycle: es.time, engine: es, candidates: &cands });
        check_selection(es.time, &sel, cands.len())?;
        let chosen: Vec<Evaluation> = sel.iter().map(|&k| cands[k].clone()).collect();
        self.step2_apply(es, &chosen);
        Ok(())
    }
}

fn check_selection(cycle: u32, sel: &Selection, n: usize) -> Result<(), EngineError> {
    match sel.iter().find(|&&k| k >= n) {
        Some(k) => Err(EngineError::Selection { cycle, msg: format!("index {k} out of range ({n} candidates)") }),
        None => Ok(()),
    }
}

/// Runs the framework with the given strategy and configuration.
pub fn run(fw: &Framework, ext: &Timeline, cfg: EngineConfig, strategy: &mut dyn Strategy) -> Result<RunResult, EngineError> {
    Engine::new(fw, cfg).run(ext, strategy)
}
