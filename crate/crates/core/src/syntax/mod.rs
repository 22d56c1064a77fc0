//! Abstract syntax for reactive-rule frameworks, plus the concrete text
//! format (parser and printer) and load-time validation.

mod lexer;
mod parser;
mod print;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::temporal::Constraint;

pub use lexer::SyntaxError;
pub use parser::{parse_framework, parse_ground_atom, LoadError};
pub(crate) use validate::action_conjuncts;
pub use validate::{bare_actions, validate_framework, BareAction, Split, ValidationReport, Violation, ViolationKind};

/// Interned-ish symbol. Cheap to clone and shareable across threads.
pub type Name = Arc<str>;

pub fn name(s: &str) -> Name {
    Arc::from(s)
}

/// A ground value: a sorted constant or a natural-number time.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Sym(Name),
    Time(u32),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Sym(s) => f.write_str(s),
            Value::Time(t) => write!(f, "{t}"),
        }
    }
}

/// An unstamped ground atom, e.g. `dispatch(bob, book)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAtom {
    pub pred: Name,
    pub args: Vec<Value>,
}

impl GroundAtom {
    pub fn new(pred: &str, args: &[&str]) -> Self {
        GroundAtom {
            pred: name(pred),
            args: args.iter().map(|a| Value::Sym(name(a))).collect(),
        }
    }

    pub fn prop(pred: &str) -> Self {
        GroundAtom { pred: name(pred), args: Vec::new() }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl serde::Serialize for GroundAtom {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A clock term: a constant `n`, a variable `T`, or `T+n` / `T-n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TimeExpr {
    pub var: Option<Name>,
    pub offset: i64,
}

impl TimeExpr {
    pub fn constant(n: i64) -> Self {
        TimeExpr { var: None, offset: n }
    }

    pub fn var(v: &str) -> Self {
        TimeExpr { var: Some(name(v)), offset: 0 }
    }

    pub fn plus(v: &str, n: i64) -> Self {
        TimeExpr { var: Some(name(v)), offset: n }
    }

    pub fn is_ground(&self) -> bool {
        self.var.is_none()
    }

    /// Replaces the variable by its time value when `b` binds it.
    pub fn apply_binding(&self, b: &BTreeMap<Name, Value>) -> TimeExpr {
        match self.var.as_ref().and_then(|v| b.get(v)) {
            Some(Value::Time(t)) => TimeExpr::constant(*t as i64 + self.offset),
            _ => self.clone(),
        }
    }
}

impl fmt::Display for TimeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.var {
            None => write!(f, "{}", self.offset),
            Some(v) if self.offset == 0 => f.write_str(v),
            Some(v) if self.offset > 0 => write!(f, "{v}+{}", self.offset),
            Some(v) => write!(f, "{v}-{}", -self.offset),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Const(Name),
    Var(Name),
    Time(TimeExpr),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Const(c) => f.write_str(c),
            Term::Var(v) => f.write_str(v),
            Term::Time(t) => write!(f, "{t}"),
        }
    }
}

/// The sort of an argument position or a variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SortRef {
    Named(Name),
    /// Untyped position (`p/n` declarations): ranges over every declared constant.
    Any,
    Time,
}

impl fmt::Display for SortRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SortRef::Named(n) => f.write_str(n),
            SortRef::Any => f.write_str("any"),
            SortRef::Time => f.write_str("time"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PredKind {
    Fluent,
    External,
    Action,
    Aux,
}

impl PredKind {
    pub fn is_event(self) -> bool {
        matches!(self, PredKind::External | PredKind::Action)
    }

    /// Fluent and event atoms carry a trailing timestamp.
    pub fn is_stamped(self) -> bool {
        !matches!(self, PredKind::Aux)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredDecl {
    pub name: Name,
    pub kind: PredKind,
    /// Sorts of the unstamped arguments.
    pub args: Vec<SortRef>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    pub pred: Name,
    pub args: Vec<Term>,
    pub stamp: Option<TimeExpr>,
}

impl Atom {
    pub fn vars(&self, out: &mut BTreeSet<Name>) {
        for a in &self.args {
            term_vars(a, out);
        }
        if let Some(Some(v)) = self.stamp.as_ref().map(|s| s.var.clone()) {
            out.insert(v);
        }
    }
}

pub(crate) fn term_vars(t: &Term, out: &mut BTreeSet<Name>) {
    match t {
        Term::Var(v) => {
            out.insert(v.clone());
        }
        Term::Time(TimeExpr { var: Some(v), .. }) => {
            out.insert(v.clone());
        }
        _ => {}
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
}

/// First-order formula over fluent, event and time-independent atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    /// Equality or disequality between non-time terms.
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Forall(Name, SortRef, Box<Formula>),
    Exists(Name, SortRef, Box<Formula>),
}

impl Formula {
    /// Variables occurring free in the formula.
    pub fn free_vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                let mut vs = BTreeSet::new();
                a.vars(&mut vs);
                out.extend(vs.into_iter().filter(|v| !bound.contains(v)));
            }
            Formula::Cmp(_, l, r) => {
                let mut vs = BTreeSet::new();
                term_vars(l, &mut vs);
                term_vars(r, &mut vs);
                out.extend(vs.into_iter().filter(|v| !bound.contains(v)));
            }
            Formula::Not(f) => f.collect_free(bound, out),
            Formula::And(fs) | Formula::Or(fs) => {
                for f in fs {
                    f.collect_free(bound, out);
                }
            }
            Formula::Implies(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Formula::Forall(v, _, f) | Formula::Exists(v, _, f) => {
                bound.push(v.clone());
                f.collect_free(bound, out);
                bound.pop();
            }
        }
    }

    /// Every atom in the formula, including those under negation or quantifiers.
    pub fn atoms(&self) -> Vec<&Atom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a Atom>) {
        match self {
            Formula::Atom(a) => out.push(a),
            Formula::Not(f) | Formula::Forall(_, _, f) | Formula::Exists(_, _, f) => f.collect_atoms(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_atoms(out)),
            Formula::Implies(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
            Formula::True | Formula::False | Formula::Cmp(..) => {}
        }
    }

    /// Top-level conjuncts after flattening nested conjunctions.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(fs) => fs.iter().flat_map(|f| f.conjuncts()).collect(),
            f => vec![f],
        }
    }

    /// Variables bound by some quantifier inside the formula.
    pub fn quantified_vars(&self) -> Vec<(Name, SortRef)> {
        let mut out = Vec::new();
        self.collect_quantified(&mut out);
        out
    }

    fn collect_quantified(&self, out: &mut Vec<(Name, SortRef)>) {
        match self {
            Formula::Forall(v, s, f) | Formula::Exists(v, s, f) => {
                out.push((v.clone(), s.clone()));
                f.collect_quantified(out);
            }
            Formula::Not(f) => f.collect_quantified(out),
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.collect_quantified(out)),
            Formula::Implies(a, b) => {
                a.collect_quantified(out);
                b.collect_quantified(out);
            }
            _ => {}
        }
    }
}

/// A formula queried against a single time frame. `stamp` is the single
/// timestamp; `None` only for malformed conditions rejected by validation.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FolCondition {
    pub formula: Formula,
    pub stamp: Option<TimeExpr>,
    /// Sorts of the free variables, including the timestamp variable.
    pub vars: BTreeMap<Name, SortRef>,
}

impl FolCondition {
    pub fn stamp_var(&self) -> Option<&Name> {
        self.stamp.as_ref().and_then(|s| s.var.as_ref())
    }

    /// Distinct timestamps of stamped atoms (should be exactly one).
    pub fn stamps(&self) -> BTreeSet<TimeExpr> {
        self.formula.atoms().into_iter().filter_map(|a| a.stamp.clone()).collect()
    }

    pub fn free_vars(&self) -> BTreeSet<Name> {
        self.vars.keys().cloned().collect()
    }
}

/// Conjunction of conditions and temporal constraints.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Complex {
    pub conditions: Vec<FolCondition>,
    pub constraints: Vec<Constraint>,
}

impl Complex {
    pub fn is_empty(&self) -> bool {
        self.conditions.is_empty() && self.constraints.is_empty()
    }

    pub fn vars(&self) -> BTreeSet<Name> {
        let mut out = BTreeSet::new();
        for c in &self.conditions {
            out.extend(c.free_vars());
        }
        for k in &self.constraints {
            out.extend(k.vars());
        }
        out
    }

    pub fn stamps(&self) -> Vec<TimeExpr> {
        self.conditions.iter().filter_map(|c| c.stamp.clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReactiveRule {
    pub index: usize,
    pub antecedent: Complex,
    pub consequents: Vec<Complex>,
    /// Variables of the antecedent (implicitly universal).
    pub universal: BTreeSet<Name>,
    /// Per-disjunct variables not in the antecedent (implicitly existential).
    pub existential: Vec<BTreeSet<Name>>,
    /// Sorts of every free variable in the rule.
    pub var_sorts: BTreeMap<Name, SortRef>,
}

/// `initiates(events, fluent)` / `terminates(events, fluent)` after ground expansion.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PostEntry {
    pub events: BTreeSet<GroundAtom>,
    pub fluent: GroundAtom,
}

/// `current(T-1) & events(T) -> false`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PreConstraint {
    pub body: Vec<FolCondition>,
    pub var_sorts: BTreeMap<Name, SortRef>,
}

impl PreConstraint {
    /// Largest stamp offset in the body: conditions at this offset form `events(T)`.
    pub fn now_offset(&self) -> Option<(Option<Name>, i64)> {
        self.body
            .iter()
            .filter_map(|c| c.stamp.as_ref())
            .map(|s| (s.var.clone(), s.offset))
            .max_by_key(|(_, o)| *o)
    }

    pub fn events_part(&self) -> Vec<&FolCondition> {
        let now = self.now_offset().map(|(_, o)| o);
        self.body.iter().filter(|c| c.stamp.as_ref().map(|s| s.offset) == now).collect()
    }

    pub fn current_part(&self) -> Vec<&FolCondition> {
        let now = self.now_offset().map(|(_, o)| o);
        self.body.iter().filter(|c| c.stamp.as_ref().map(|s| s.offset) != now).collect()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CausalTheory {
    pub initiates: Vec<PostEntry>,
    pub terminates: Vec<PostEntry>,
    pub pre: Vec<PreConstraint>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Framework {
    pub sorts: BTreeMap<Name, Vec<Name>>,
    pub preds: BTreeMap<Name, PredDecl>,
    pub rules: Vec<ReactiveRule>,
    pub aux: BTreeSet<GroundAtom>,
    pub causal: CausalTheory,
    pub initial: BTreeSet<GroundAtom>,
}

impl Framework {
    pub fn kind(&self, pred: &str) -> Option<PredKind> {
        self.preds.get(pred).map(|d| d.kind)
    }

    /// Every declared constant, in sort order then declaration order, deduplicated.
    pub fn all_constants(&self) -> Vec<Name> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for cs in self.sorts.values() {
            for c in cs {
                if seen.insert(c.clone()) {
                    out.push(c.clone());
                }
            }
        }
        out
    }

    /// Ground values of a sort. Time ranges over `0..=time_bound`.
    pub fn domain(&self, sort: &SortRef, time_bound: Option<u32>) -> Option<Vec<Value>> {
        match sort {
            SortRef::Named(n) => self.sorts.get(n).map(|cs| cs.iter().map(|c| Value::Sym(c.clone())).collect()),
            SortRef::Any => Some(self.all_constants().into_iter().map(Value::Sym).collect()),
            SortRef::Time => time_bound.map(|b| (0..=b).map(Value::Time).collect()),
        }
    }

    /// All well-sorted unstamped ground instances of a predicate.
    pub fn ground_instances(&self, pred: &str, time_bound: Option<u32>) -> Vec<GroundAtom> {
        let Some(decl) = self.preds.get(pred) else {
            return Vec::new();
        };
        let mut out = vec![Vec::new()];
        for s in &decl.args {
            let dom = self.domain(s, time_bound).unwrap_or_default();
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<Value>| {
                    dom.iter().map(move |v| {
                        let mut p = prefix.clone();
                        p.push(v.clone());
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(|args| GroundAtom { pred: decl.name.clone(), args }).collect()
    }

    pub fn preds_of_kind(&self, kind: PredKind) -> impl Iterator<Item = &PredDecl> {
        self.preds.values().filter(move |d| d.kind == kind)
    }

    /// Ground fluent atoms over the declared sorts.
    pub fn fluent_base(&self) -> Vec<GroundAtom> {
        self.preds_of_kind(PredKind::Fluent)
            .flat_map(|d| self.ground_instances(&d.name, None))
            .collect()
    }

    /// Ground action atoms over the declared sorts.
    pub fn action_alphabet(&self) -> Vec<GroundAtom> {
        self.preds_of_kind(PredKind::Action)
            .flat_map(|d| self.ground_instances(&d.name, None))
            .collect()
    }

    /// A time bound large enough that any temporal constraint set of this
    /// framework that is satisfiable over the naturals has a witness below it,
    /// given anchoring times no later than `horizon`.
    pub fn solver_bound(&self, horizon: u32) -> u32 {
        let mut slack: i64 = 2;
        let mut vars = 0usize;
        let mut visit = |k: &Constraint| {
            for e in k.exprs() {
                slack += e.offset.abs();
            }
            vars += k.vars().len();
        };
        for r in &self.rules {
            r.antecedent.constraints.iter().for_each(&mut visit);
            for d in &r.consequents {
                d.constraints.iter().for_each(&mut visit);
            }
        }
        for r in &self.rules {
            for c in r.antecedent.conditions.iter().chain(r.consequents.iter().flat_map(|d| d.conditions.iter())) {
                if let Some(s) = &c.stamp {
                    slack += s.offset.abs();
                }
            }
        }
        let extra = (slack + vars as i64).min(10_000) as u32;
        horizon.saturating_add(extra)
    }
}
