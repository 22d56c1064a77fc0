//! Temporal constraints over the discrete clock: ground evaluation,
//! satisfiability, and sequencing witnesses.
//!
//! The solver propagates interval bounds over the supported atom forms and
//! falls back to a depth-first search (ascending values, variables in name
//! order) when propagation alone is inconclusive. The first solution found
//! is therefore the lexicographically least one.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::syntax::{Complex, Name, TimeExpr};

/// Assignment of natural-number times to time variables.
pub type TimeBinding = BTreeMap<Name, u32>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constraint {
    Lt(TimeExpr, TimeExpr),
    Le(TimeExpr, TimeExpr),
    Eq(TimeExpr, TimeExpr),
    /// `max(a, b, out)`: out is the larger of a and b.
    Max(TimeExpr, TimeExpr, TimeExpr),
    /// `min(a, b, out)`: out is the smaller of a and b.
    Min(TimeExpr, TimeExpr, TimeExpr),
}

impl Constraint {
    pub fn exprs(&self) -> Vec<&TimeExpr> {
        match self {
            Constraint::Lt(a, b) | Constraint::Le(a, b) | Constraint::Eq(a, b) => vec![a, b],
            Constraint::Max(a, b, c) | Constraint::Min(a, b, c) => vec![a, b, c],
        }
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        self.exprs().into_iter().filter_map(|e| e.var.clone()).collect()
    }

    /// The variable a functional atom determines from its other arguments, if any.
    pub fn output_var(&self) -> Option<&Name> {
        match self {
            Constraint::Max(_, _, c) | Constraint::Min(_, _, c) => c.var.as_ref(),
            Constraint::Eq(a, b) => a.var.as_ref().or(b.var.as_ref()),
            _ => None,
        }
    }

    /// Substitutes bound variables by constants.
    pub fn apply(&self, b: &TimeBinding) -> Constraint {
        let f = |e: &TimeExpr| subst(e, b);
        match self {
            Constraint::Lt(x, y) => Constraint::Lt(f(x), f(y)),
            Constraint::Le(x, y) => Constraint::Le(f(x), f(y)),
            Constraint::Eq(x, y) => Constraint::Eq(f(x), f(y)),
            Constraint::Max(x, y, z) => Constraint::Max(f(x), f(y), f(z)),
            Constraint::Min(x, y, z) => Constraint::Min(f(x), f(y), f(z)),
        }
    }

    pub fn is_ground(&self) -> bool {
        self.exprs().iter().all(|e| e.var.is_none())
    }
}

fn subst(e: &TimeExpr, b: &TimeBinding) -> TimeExpr {
    match &e.var {
        Some(v) => match b.get(v) {
            Some(t) => TimeExpr::constant(*t as i64 + e.offset),
            None => e.clone(),
        },
        None => e.clone(),
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constraint::Lt(a, b) => write!(f, "{a} < {b}"),
            Constraint::Le(a, b) => write!(f, "{a} <= {b}"),
            Constraint::Eq(a, b) => write!(f, "{a} = {b}"),
            Constraint::Max(a, b, c) => write!(f, "max({a}, {b}, {c})"),
            Constraint::Min(a, b, c) => write!(f, "min({a}, {b}, {c})"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemporalError {
    #[error("unbound time variable `{0}`")]
    Unbound(Name),
}

fn value(e: &TimeExpr, b: &TimeBinding) -> Result<i64, TemporalError> {
    match &e.var {
        None => Ok(e.offset),
        Some(v) => b.get(v).map(|t| *t as i64 + e.offset).ok_or_else(|| TemporalError::Unbound(v.clone())),
    }
}

fn holds(k: &Constraint, b: &TimeBinding) -> Result<bool, TemporalError> {
    Ok(match k {
        Constraint::Lt(x, y) => value(x, b)? < value(y, b)?,
        Constraint::Le(x, y) => value(x, b)? <= value(y, b)?,
        Constraint::Eq(x, y) => value(x, b)? == value(y, b)?,
        Constraint::Max(x, y, z) => value(x, b)?.max(value(y, b)?) == value(z, b)?,
        Constraint::Min(x, y, z) => value(x, b)?.min(value(y, b)?) == value(z, b)?,
    })
}

/// True iff every atom holds under `b` by ordinary arithmetic.
pub fn eval_ground_constraints(cs: &[Constraint], b: &TimeBinding) -> Result<bool, TemporalError> {
    for k in cs {
        if !holds(k, b)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Per-variable closed interval.
#[derive(Clone, Debug)]
struct Domains {
    vars: Vec<Name>,
    lo: Vec<i64>,
    hi: Vec<i64>,
}

impl Domains {
    fn idx(&self, v: &Name) -> usize {
        self.vars.binary_search(v).expect("variable collected")
    }

    fn bounds(&self, e: &TimeExpr) -> (i64, i64) {
        match &e.var {
            None => (e.offset, e.offset),
            Some(v) => {
                let i = self.idx(v);
                (self.lo[i] + e.offset, self.hi[i] + e.offset)
            }
        }
    }

    /// Tightens `e` to lie within `[lo, hi]`. Returns whether anything changed.
    fn restrict(&mut self, e: &TimeExpr, lo: i64, hi: i64) -> bool {
        let Some(v) = &e.var else { return false };
        let i = self.idx(v);
        let mut changed = false;
        if lo - e.offset > self.lo[i] {
            self.lo[i] = lo - e.offset;
            changed = true;
        }
        if hi - e.offset < self.hi[i] {
            self.hi[i] = hi - e.offset;
            changed = true;
        }
        changed
    }

    fn empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    fn inconsistent_ground(&self, cs: &[Constraint]) -> bool {
        cs.iter().any(|k| {
            let ground: Vec<_> = k.exprs().iter().map(|e| self.bounds(e)).collect();
            if ground.iter().all(|(l, h)| l == h) {
                let vals: Vec<i64> = ground.iter().map(|(l, _)| *l).collect();
                !match k {
                    Constraint::Lt(..) => vals[0] < vals[1],
                    Constraint::Le(..) => vals[0] <= vals[1],
                    Constraint::Eq(..) => vals[0] == vals[1],
                    Constraint::Max(..) => vals[0].max(vals[1]) == vals[2],
                    Constraint::Min(..) => vals[0].min(vals[1]) == vals[2],
                }
            } else {
                false
            }
        })
    }

    /// Bounds propagation to a fixpoint. Returns false if some domain empties.
    fn propagate(&mut self, cs: &[Constraint]) -> bool {
        loop {
            let mut changed = false;
            for k in cs {
                match k {
                    Constraint::Lt(a, b) | Constraint::Le(a, b) => {
                        let gap = if matches!(k, Constraint::Lt(..)) { 1 } else { 0 };
                        let (_, bh) = self.bounds(b);
                        changed |= self.restrict(a, i64::MIN / 4, bh - gap);
                        let (al, _) = self.bounds(a);
                        changed |= self.restrict(b, al + gap, i64::MAX / 4);
                    }
                    Constraint::Eq(a, b) => {
                        let (bl, bh) = self.bounds(b);
                        changed |= self.restrict(a, bl, bh);
                        let (al, ah) = self.bounds(a);
                        changed |= self.restrict(b, al, ah);
                    }
                    Constraint::Max(a, b, c) => {
                        let (al, ah) = self.bounds(a);
                        let (bl, bh) = self.bounds(b);
                        changed |= self.restrict(c, al.max(bl), ah.max(bh));
                        let (_, ch) = self.bounds(c);
                        changed |= self.restrict(a, i64::MIN / 4, ch);
                        changed |= self.restrict(b, i64::MIN / 4, ch);
                    }
                    Constraint::Min(a, b, c) => {
                        let (al, ah) = self.bounds(a);
                        let (bl, bh) = self.bounds(b);
                        changed |= self.restrict(c, al.min(bl), ah.min(bh));
                        let (cl, _) = self.bounds(c);
                        changed |= self.restrict(a, cl, i64::MAX / 4);
                        changed |= self.restrict(b, cl, i64::MAX / 4);
                    }
                }
                if self.empty() {
                    return false;
                }
            }
            if !changed {
                return !self.inconsistent_ground(cs);
            }
        }
    }
}

fn init_domains(cs: &[Constraint], partial: &TimeBinding, horizon: u32) -> (Vec<Constraint>, Domains) {
    let cs: Vec<Constraint> = cs.iter().map(|k| k.apply(partial)).collect();
    let vars: Vec<Name> = cs.iter().flat_map(|k| k.vars()).collect::<BTreeSet<_>>().into_iter().collect();
    let n = vars.len();
    let d = Domains { vars, lo: vec![0; n], hi: vec![horizon as i64; n] };
    (cs, d)
}

fn search(cs: &[Constraint], mut d: Domains, out: &mut Vec<TimeBinding>, limit: usize) {
    if out.len() >= limit || !d.propagate(cs) {
        return;
    }
    match (0..d.vars.len()).find(|&i| d.lo[i] != d.hi[i]) {
        None => {
            let b: TimeBinding = d.vars.iter().zip(&d.lo).map(|(v, l)| (v.clone(), *l as u32)).collect();
            if eval_ground_constraints(cs, &b).unwrap_or(false) {
                out.push(b);
            }
        }
        Some(i) => {
            for val in d.lo[i]..=d.hi[i] {
                let mut next = d.clone();
                next.lo[i] = val;
                next.hi[i] = val;
                search(cs, next, out, limit);
                if out.len() >= limit {
                    return;
                }
            }
        }
    }
}

/// Lexicographically least completion of `partial` satisfying `cs`, with
/// every free variable in `0..=horizon`. The result covers `partial` too.
pub fn solve(cs: &[Constraint], partial: &TimeBinding, horizon: u32) -> Option<TimeBinding> {
    all_solutions_limited(cs, partial, horizon, 1).into_iter().next()
}

/// True iff some completion of `partial` within the horizon satisfies `cs`.
pub fn satisfiable(cs: &[Constraint], partial: &TimeBinding, horizon: u32) -> bool {
    solve(cs, partial, horizon).is_some()
}

/// Every completion of `partial` within the horizon, in lexicographic order.
pub fn all_solutions(cs: &[Constraint], partial: &TimeBinding, horizon: u32) -> Vec<TimeBinding> {
    all_solutions_limited(cs, partial, horizon, usize::MAX)
}

fn all_solutions_limited(cs: &[Constraint], partial: &TimeBinding, horizon: u32, limit: usize) -> Vec<TimeBinding> {
    let (cs, d) = init_domains(cs, partial, horizon);
    let mut out = Vec::new();
    search(&cs, d, &mut out, limit);
    for b in &mut out {
        b.extend(partial.iter().map(|(k, v)| (k.clone(), *v)));
    }
    out
}

/// Constraints expressing that every stamp of `earlier` precedes (or, when
/// not strict, does not follow) every stamp of `later`.
pub fn ordering_constraints(earlier: &[TimeExpr], later: &[TimeExpr], strict: bool) -> Vec<Constraint> {
    let mut out = Vec::new();
    for e in earlier {
        for l in later {
            out.push(if strict {
                Constraint::Lt(e.clone(), l.clone())
            } else {
                Constraint::Le(e.clone(), l.clone())
            });
        }
    }
    out
}

/// Finds a time binding witnessing the sequencing `earlier < later`
/// (or `earlier <= later` when `strict` is false).
pub fn admits_sequencing(
    earlier: &Complex,
    later: &Complex,
    strict: bool,
    partial: &TimeBinding,
    horizon: u32,
) -> Option<TimeBinding> {
    let mut cs: Vec<Constraint> = earlier.constraints.iter().chain(&later.constraints).cloned().collect();
    cs.extend(ordering_constraints(&earlier.stamps(), &later.stamps(), strict));
    // Variables that only occur as condition stamps still need a value.
    let mut anchor = Vec::new();
    for s in earlier.stamps().into_iter().chain(later.stamps()) {
        if s.var.is_some() {
            anchor.push(Constraint::Le(s.clone(), s));
        }
    }
    cs.extend(anchor);
    solve(&cs, partial, horizon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> TimeExpr {
        TimeExpr::var(s)
    }

    fn c(n: i64) -> TimeExpr {
        TimeExpr::constant(n)
    }

    fn bind(pairs: &[(&str, u32)]) -> TimeBinding {
        pairs.iter().map(|(k, v)| (crate::syntax::name(k), *v)).collect()
    }

    #[test]
    fn ground_literals() {
        assert!(eval_ground_constraints(&[Constraint::Lt(c(3), c(4))], &TimeBinding::new()).unwrap());
    }

    #[test]
    fn window_constraint_values() {
        let cs = [Constraint::Lt(v("T1"), v("T2")), Constraint::Le(v("T2"), TimeExpr::plus("T1", 3))];
        assert!(eval_ground_constraints(&cs, &bind(&[("T1", 1), ("T2", 4)])).unwrap());
        assert!(!eval_ground_constraints(&cs, &bind(&[("T1", 1), ("T2", 5)])).unwrap());
    }

    #[test]
    fn max_definition() {
        let cs = [Constraint::Max(c(2), c(5), v("T"))];
        assert!(eval_ground_constraints(&cs, &bind(&[("T", 5)])).unwrap());
        assert!(!eval_ground_constraints(&cs, &bind(&[("T", 2)])).unwrap());
    }

    #[test]
    fn unbound_variable_is_an_error() {
        let cs = [Constraint::Lt(v("T"), c(3))];
        assert_eq!(
            eval_ground_constraints(&cs, &TimeBinding::new()),
            Err(TemporalError::Unbound(crate::syntax::name("T")))
        );
    }

    #[test]
    fn irreflexive_lt_is_unsat() {
        assert!(!satisfiable(&[Constraint::Lt(v("T"), v("T"))], &TimeBinding::new(), 10));
    }

    #[test]
    fn offset_cannot_fit_under_two() {
        let cs = [Constraint::Eq(v("T2"), TimeExpr::plus("T1", 3)), Constraint::Le(v("T2"), c(2))];
        assert!(!satisfiable(&cs, &TimeBinding::new(), 10));
    }

    #[test]
    fn window_satisfiable_from_three() {
        let cs = [Constraint::Lt(v("T1"), v("T2")), Constraint::Le(v("T2"), TimeExpr::plus("T1", 3))];
        let p = bind(&[("T1", 3)]);
        assert!(satisfiable(&cs, &p, 10));
        let sols: Vec<u32> = all_solutions(&cs, &p, 10).iter().map(|b| b[&crate::syntax::name("T2")]).collect();
        assert_eq!(sols, vec![4, 5, 6]);
    }

    #[test]
    fn least_witness_is_returned() {
        let cs = [Constraint::Lt(v("A"), v("B"))];
        assert_eq!(solve(&cs, &TimeBinding::new(), 5), Some(bind(&[("A", 0), ("B", 1)])));
    }

    #[test]
    fn negative_offsets_respect_naturals() {
        // T-1 >= 0 is not implied, but T itself is a natural.
        let cs = [Constraint::Eq(TimeExpr::plus("T", -1), c(0))];
        assert_eq!(solve(&cs, &TimeBinding::new(), 5), Some(bind(&[("T", 1)])));
    }
}
