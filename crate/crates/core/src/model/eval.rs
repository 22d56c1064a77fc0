//! Truth of FOL conditions in a single time frame.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::state::State;
use crate::syntax::{Atom, CmpOp, FolCondition, Formula, Framework, GroundAtom, Name, PredKind, SortRef, Term, TimeExpr, Value};

/// Assignment of ground values to (time and non-time) variables.
pub type Binding = BTreeMap<Name, Value>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(Name),
    #[error("quantifier over time variable `{0}` needs a horizon bound")]
    UnboundedTime(Name),
    #[error("unknown sort `{0}`")]
    UnknownSort(Name),
    #[error("timestamp {0} is beyond the trace horizon {1}")]
    BeyondHorizon(i64, u32),
}

/// The view `Aux + S_i* + ev_i*` of one time point.
#[derive(Clone, Copy, Debug)]
pub struct Frame<'a> {
    pub time: u32,
    pub state: &'a State,
    pub ext: &'a BTreeSet<GroundAtom>,
    pub acts: &'a BTreeSet<GroundAtom>,
    pub aux: &'a BTreeSet<GroundAtom>,
}

impl Frame<'_> {
    fn sets(&self, kind: Option<PredKind>) -> Vec<&BTreeSet<GroundAtom>> {
        match kind {
            Some(PredKind::Fluent) => vec![self.state],
            Some(PredKind::External) | Some(PredKind::Action) => vec![self.ext, self.acts],
            Some(PredKind::Aux) => vec![self.aux],
            None => Vec::new(),
        }
    }

    pub fn contains(&self, kind: Option<PredKind>, a: &GroundAtom) -> bool {
        self.sets(kind).iter().any(|s| s.contains(a))
    }

    /// Atoms of one predicate, in order.
    fn with_pred<'s>(&'s self, kind: Option<PredKind>, pred: &Name) -> impl Iterator<Item = &'s GroundAtom> + 's {
        let start = GroundAtom { pred: pred.clone(), args: Vec::new() };
        let pred = pred.clone();
        self.sets(kind)
            .into_iter()
            .flat_map(move |s| s.range(start.clone()..).take_while({
                let pred = pred.clone();
                move |a| a.pred == pred
            }))
    }
}

/// Framework plus the bound used for time-sorted quantifiers.
#[derive(Clone, Copy, Debug)]
pub struct EvalCtx<'a> {
    pub fw: &'a Framework,
    pub time_bound: Option<u32>,
}

impl<'a> EvalCtx<'a> {
    pub fn new(fw: &'a Framework, time_bound: u32) -> Self {
        EvalCtx { fw, time_bound: Some(time_bound) }
    }

    pub fn domain(&self, v: &Name, s: &SortRef) -> Result<Vec<Value>, EvalError> {
        match s {
            SortRef::Time if self.time_bound.is_none() => Err(EvalError::UnboundedTime(v.clone())),
            SortRef::Named(n) if !self.fw.sorts.contains_key(n) => Err(EvalError::UnknownSort(n.clone())),
            _ => Ok(self.fw.domain(s, self.time_bound).unwrap_or_default()),
        }
    }

    fn sort_ok(&self, s: Option<&SortRef>, v: &Value) -> bool {
        match (s, v) {
            (Some(SortRef::Named(n)), Value::Sym(c)) => self.fw.sorts.get(n).is_some_and(|cs| cs.contains(c)),
            (Some(SortRef::Time), Value::Sym(_)) => false,
            (Some(SortRef::Named(_)) | Some(SortRef::Any), Value::Time(_)) => false,
            _ => true,
        }
    }
}

pub(crate) fn time_value(te: &TimeExpr, b: &Binding) -> Result<i64, EvalError> {
    match &te.var {
        None => Ok(te.offset),
        Some(v) => match b.get(v) {
            Some(Value::Time(t)) => Ok(*t as i64 + te.offset),
            Some(Value::Sym(_)) | None => Err(EvalError::Unbound(v.clone())),
        },
    }
}

fn term_value(t: &Term, b: &Binding) -> Result<Option<Value>, EvalError> {
    Ok(match t {
        Term::Const(c) => Some(Value::Sym(c.clone())),
        Term::Var(v) => Some(b.get(v).cloned().ok_or_else(|| EvalError::Unbound(v.clone()))?),
        Term::Time(te) => {
            let x = time_value(te, b)?;
            (x >= 0).then_some(Value::Time(x as u32))
        }
    })
}

/// Grounds an atom's arguments. `None` when some time argument is negative.
pub fn ground_atom(a: &Atom, b: &Binding) -> Result<Option<GroundAtom>, EvalError> {
    let mut args = Vec::with_capacity(a.args.len());
    for t in &a.args {
        match term_value(t, b)? {
            Some(v) => args.push(v),
            None => return Ok(None),
        }
    }
    Ok(Some(GroundAtom { pred: a.pred.clone(), args }))
}

/// Truth of a formula in `frame` under a binding covering its free variables.
pub fn holds(ctx: &EvalCtx<'_>, f: &Formula, frame: &Frame<'_>, b: &Binding) -> Result<bool, EvalError> {
    Ok(match f {
        Formula::True => true,
        Formula::False => false,
        Formula::Atom(a) => {
            if let Some(s) = &a.stamp {
                if time_value(s, b)? != frame.time as i64 {
                    return Ok(false);
                }
            }
            match ground_atom(a, b)? {
                Some(g) => frame.contains(ctx.fw.kind(&a.pred), &g),
                None => false,
            }
        }
        Formula::Cmp(op, l, r) => {
            let eq = term_value(l, b)? == term_value(r, b)?;
            (*op == CmpOp::Eq) == eq
        }
        Formula::Not(g) => !holds(ctx, g, frame, b)?,
        Formula::And(gs) => {
            for g in gs {
                if !holds(ctx, g, frame, b)? {
                    return Ok(false);
                }
            }
            true
        }
        Formula::Or(gs) => {
            for g in gs {
                if holds(ctx, g, frame, b)? {
                    return Ok(true);
                }
            }
            false
        }
        Formula::Implies(x, y) => !holds(ctx, x, frame, b)? || holds(ctx, y, frame, b)?,
        Formula::Forall(v, s, g) | Formula::Exists(v, s, g) => {
            let forall = matches!(f, Formula::Forall(..));
            let mut inner = b.clone();
            for val in ctx.domain(v, s)? {
                inner.insert(v.clone(), val);
                if holds(ctx, g, frame, &inner)? != forall {
                    return Ok(!forall);
                }
            }
            forall
        }
    })
}

/// Extends `b` in every way that makes the positive atom `a` true in `frame`.
fn match_atom(
    ctx: &EvalCtx<'_>,
    a: &Atom,
    frame: &Frame<'_>,
    sorts: &BTreeMap<Name, SortRef>,
    b: &Binding,
) -> Result<Vec<Binding>, EvalError> {
    let mut base = b.clone();
    if let Some(s) = &a.stamp {
        match &s.var {
            Some(v) if !base.contains_key(v) => {
                let t = frame.time as i64 - s.offset;
                if t < 0 {
                    return Ok(Vec::new());
                }
                base.insert(v.clone(), Value::Time(t as u32));
            }
            _ => {
                if time_value(s, &base)? != frame.time as i64 {
                    return Ok(Vec::new());
                }
            }
        }
    }
    let mut out = Vec::new();
    'cands: for g in frame.with_pred(ctx.fw.kind(&a.pred), &a.pred) {
        if g.args.len() != a.args.len() {
            continue;
        }
        let mut nb = base.clone();
        for (t, v) in a.args.iter().zip(&g.args) {
            match t {
                Term::Const(c) => {
                    if *v != Value::Sym(c.clone()) {
                        continue 'cands;
                    }
                }
                Term::Var(x) => match nb.get(x) {
                    Some(old) if old != v => continue 'cands,
                    Some(_) => {}
                    None => {
                        if !ctx.sort_ok(sorts.get(x), v) {
                            continue 'cands;
                        }
                        nb.insert(x.clone(), v.clone());
                    }
                },
                Term::Time(te) => {
                    let Value::Time(tv) = v else { continue 'cands };
                    match &te.var {
                        Some(x) if !nb.contains_key(x) => {
                            let base_t = *tv as i64 - te.offset;
                            if base_t < 0 {
                                continue 'cands;
                            }
                            nb.insert(x.clone(), Value::Time(base_t as u32));
                        }
                        _ => {
                            if time_value(te, &nb)? != *tv as i64 {
                                continue 'cands;
                            }
                        }
                    }
                }
            }
        }
        out.push(nb);
    }
    Ok(out)
}

/// Extends `b` over the listed unbound variables in every well-sorted way.
fn expand(
    ctx: &EvalCtx<'_>,
    vars: &BTreeSet<Name>,
    sorts: &BTreeMap<Name, SortRef>,
    b: Binding,
) -> Result<Vec<Binding>, EvalError> {
    let mut out = vec![b];
    for v in vars {
        if out[0].contains_key(v) {
            continue;
        }
        let s = sorts.get(v).cloned().unwrap_or(SortRef::Any);
        let dom = ctx.domain(v, &s)?;
        out = out
            .into_iter()
            .flat_map(|b| {
                dom.iter().map(move |val| {
                    let mut nb = b.clone();
                    nb.insert(v.clone(), val.clone());
                    nb
                })
            })
            .collect();
    }
    Ok(out)
}

fn join(
    ctx: &EvalCtx<'_>,
    f: &Formula,
    frame: &Frame<'_>,
    sorts: &BTreeMap<Name, SortRef>,
    bs: Vec<Binding>,
) -> Result<Vec<Binding>, EvalError> {
    match f {
        Formula::True => Ok(bs),
        Formula::False => Ok(Vec::new()),
        Formula::Atom(a) => {
            let mut out = Vec::new();
            for b in &bs {
                out.extend(match_atom(ctx, a, frame, sorts, b)?);
            }
            Ok(out)
        }
        Formula::And(gs) => {
            // Positive atoms first so they bind variables for the rest.
            let (atoms, others): (Vec<&Formula>, Vec<&Formula>) = gs.iter().partition(|g| matches!(g, Formula::Atom(_)));
            let mut cur = bs;
            for g in atoms.into_iter().chain(others) {
                if cur.is_empty() {
                    break;
                }
                cur = join(ctx, g, frame, sorts, cur)?;
            }
            Ok(cur)
        }
        _ => {
            let free = f.free_vars();
            let mut out = Vec::new();
            for b in bs {
                let missing: BTreeSet<Name> = free.iter().filter(|v| !b.contains_key(*v)).cloned().collect();
                for nb in expand(ctx, &missing, sorts, b)? {
                    if holds(ctx, f, frame, &nb)? {
                        out.push(nb);
                    }
                }
            }
            Ok(out)
        }
    }
}

/// All extensions of `partial` over the condition's free variables that make
/// it true in `frame`, in ascending order.
pub fn eval_condition(
    ctx: &EvalCtx<'_>,
    c: &FolCondition,
    frame: &Frame<'_>,
    partial: &Binding,
) -> Result<Vec<Binding>, EvalError> {
    let mut b = partial.clone();
    if let Some(s) = &c.stamp {
        match &s.var {
            Some(v) if !b.contains_key(v) => {
                let t = frame.time as i64 - s.offset;
                if t < 0 {
                    return Ok(Vec::new());
                }
                b.insert(v.clone(), Value::Time(t as u32));
            }
            _ => {
                if time_value(s, &b)? != frame.time as i64 {
                    return Ok(Vec::new());
                }
            }
        }
    }
    let joined = join(ctx, &c.formula, frame, &c.vars, vec![b])?;
    let vars = c.free_vars();
    let mut out = BTreeSet::new();
    for b in joined {
        out.extend(expand(ctx, &vars, &c.vars, b)?);
    }
    Ok(out.into_iter().collect())
}
