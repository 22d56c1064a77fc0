//! Recursive-descent parser for `.kelps` framework files.
//!
//! Parsing happens in two phases: the token stream is read into a raw tree
//! that knows nothing about declarations, then every section is lowered
//! against the collected sort and predicate declarations. Sections may
//! therefore appear in any order.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::lexer::{lex, Spanned, SyntaxError, Tok};
use super::{
    name, Atom, CausalTheory, CmpOp, Complex, FolCondition, Formula, Framework, GroundAtom, PostEntry,
    PreConstraint, PredDecl, PredKind, ReactiveRule, SortRef, Term, TimeExpr, Value,
};
use crate::temporal::Constraint;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoadError {
    #[error("syntax error at {0}")]
    Syntax(#[from] SyntaxError),
    #[error("{line}:{col}: unknown sort `{name}`")]
    UnknownSort { name: String, line: usize, col: usize },
    #[error("{line}:{col}: unknown predicate `{name}`")]
    UnknownPredicate { name: String, line: usize, col: usize },
    #[error("{line}:{col}: `{name}` expects {expected} argument(s), found {found}")]
    Arity { name: String, expected: usize, found: usize, line: usize, col: usize },
    #[error("{line}:{col}: {msg}")]
    Sort { msg: String, line: usize, col: usize },
}

type Pos = (usize, usize);

#[derive(Debug, Clone)]
enum RawTerm {
    Ident(String, Pos),
    Var(String, Pos),
    Int(i64, Pos),
    /// `V+n` or `V-n`
    Offset(String, i64, Pos),
}

impl RawTerm {
    fn pos(&self) -> Pos {
        match self {
            RawTerm::Ident(_, p) | RawTerm::Var(_, p) | RawTerm::Int(_, p) | RawTerm::Offset(_, _, p) => *p,
        }
    }
}

#[derive(Debug, Clone)]
enum RawFormula {
    True,
    False,
    Atom { pred: String, args: Vec<RawTerm>, pos: Pos },
    Chain { terms: Vec<RawTerm>, ops: Vec<Tok>, pos: Pos },
    Func { name: String, args: Vec<RawTerm>, pos: Pos },
    Not(Box<RawFormula>),
    And(Vec<RawFormula>),
    Or(Vec<RawFormula>),
    Implies(Box<RawFormula>, Box<RawFormula>),
    Quant { forall: bool, var: String, sort: String, body: Box<RawFormula>, pos: Pos },
}

#[derive(Debug, Clone)]
enum RawDecl {
    Arity(String, usize, Pos),
    Typed(String, Vec<(String, Pos)>, Pos),
}

#[derive(Debug, Clone)]
struct RawRule {
    antecedent: Vec<RawFormula>,
    disjuncts: Vec<Vec<RawFormula>>,
    pos: Pos,
}

#[derive(Debug, Clone)]
struct RawPost {
    events: Vec<RawFormula>,
    fluent: RawFormula,
}

#[derive(Debug, Default)]
struct RawFile {
    sorts: Vec<(String, Vec<String>, Pos)>,
    decls: Vec<(PredKind, RawDecl)>,
    initial: Vec<RawFormula>,
    aux_facts: Vec<RawFormula>,
    initiates: Vec<RawPost>,
    terminates: Vec<RawPost>,
    pre: Vec<(Vec<RawFormula>, Pos)>,
    rules: Vec<RawRule>,
}

struct Parser {
    toks: Vec<Spanned>,
    i: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.i].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.i + k).min(self.toks.len() - 1)].tok
    }

    fn pos(&self) -> Pos {
        let t = &self.toks[self.i];
        (t.line, t.col)
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.i].tok.clone();
        if self.i + 1 < self.toks.len() {
            self.i += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SyntaxError> {
        let (line, col) = self.pos();
        Err(SyntaxError { line, col, msg: msg.into() })
    }

    fn expect(&mut self, t: Tok) -> Result<(), SyntaxError> {
        if *self.peek() == t {
            self.next();
            Ok(())
        } else {
            self.err(format!("expected {t}, found {}", self.peek()))
        }
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == t {
            self.next();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.next() {
            Tok::Ident(s) => Ok(s),
            t => {
                self.i -= 1;
                self.err(format!("expected a name, found {t}"))
            }
        }
    }

    /// Comma-separated list inside braces, allowing a trailing comma.
    fn braced<T>(&mut self, mut item: impl FnMut(&mut Self) -> Result<T, SyntaxError>) -> Result<Vec<T>, SyntaxError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RBrace {
            out.push(item(self)?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RBrace)?;
        Ok(out)
    }

    fn file(&mut self) -> Result<RawFile, SyntaxError> {
        let mut f = RawFile::default();
        while *self.peek() != Tok::Eof {
            let section = self.ident()?;
            match section.as_str() {
                "sorts" => {
                    let sorts = self.braced(|p| {
                        let pos = p.pos();
                        let n = p.ident()?;
                        p.expect(Tok::Colon)?;
                        let cs = p.braced(|p| p.ident())?;
                        Ok((n, cs, pos))
                    })?;
                    f.sorts.extend(sorts);
                }
                "fluents" | "actions" | "events" | "aux" => {
                    let kind = match section.as_str() {
                        "fluents" => PredKind::Fluent,
                        "actions" => PredKind::Action,
                        "events" => PredKind::External,
                        _ => PredKind::Aux,
                    };
                    let ds = self.braced(|p| p.decl())?;
                    f.decls.extend(ds.into_iter().map(|d| (kind, d)));
                }
                "initial" => {
                    let a = self.braced(|p| p.atom_only())?;
                    f.initial.extend(a);
                }
                "aux-facts" => {
                    let a = self.braced(|p| p.atom_only())?;
                    f.aux_facts.extend(a);
                }
                "initiates" | "terminates" => {
                    let entries = self.braced(|p| {
                        let events = if *p.peek() == Tok::LBrace { p.braced(|p| p.atom_only())? } else { vec![p.atom_only()?] };
                        if events.is_empty() {
                            return p.err("an initiates/terminates entry needs at least one event");
                        }
                        p.expect(Tok::LeadsTo)?;
                        let fluent = p.atom_only()?;
                        Ok(RawPost { events, fluent })
                    })?;
                    if section == "initiates" {
                        f.initiates.extend(entries);
                    } else {
                        f.terminates.extend(entries);
                    }
                }
                "preconditions" => {
                    let pre = self.braced(|p| {
                        let pos = p.pos();
                        let body = p.conj()?;
                        p.expect(Tok::Arrow)?;
                        match p.next() {
                            Tok::Ident(s) if s == "false" => Ok((body, pos)),
                            t => {
                                p.i -= 1;
                                p.err(format!("precondition must end in `-> false`, found {t}"))
                            }
                        }
                    })?;
                    f.pre.extend(pre);
                }
                "rules" => {
                    let rules = self.braced(|p| {
                        let pos = p.pos();
                        let antecedent = p.conj()?;
                        p.expect(Tok::Arrow)?;
                        let mut disjuncts = vec![p.conj()?];
                        while p.eat(&Tok::Bar) {
                            disjuncts.push(p.conj()?);
                        }
                        Ok(RawRule { antecedent, disjuncts, pos })
                    })?;
                    f.rules.extend(rules);
                }
                other => {
                    self.i -= 1;
                    return self.err(format!("unknown section `{other}`"));
                }
            }
        }
        Ok(f)
    }

    fn decl(&mut self) -> Result<RawDecl, SyntaxError> {
        let pos = self.pos();
        let n = self.ident()?;
        if self.eat(&Tok::Slash) {
            match self.next() {
                Tok::Int(k) if k >= 0 => Ok(RawDecl::Arity(n, k as usize, pos)),
                _ => {
                    self.i -= 1;
                    self.err("expected an arity after `/`")
                }
            }
        } else if *self.peek() == Tok::LParen {
            self.next();
            let mut sorts = Vec::new();
            while *self.peek() != Tok::RParen {
                let p = self.pos();
                sorts.push((self.ident()?, p));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(Tok::RParen)?;
            Ok(RawDecl::Typed(n, sorts, pos))
        } else {
            Ok(RawDecl::Arity(n, 0, pos))
        }
    }

    fn atom_only(&mut self) -> Result<RawFormula, SyntaxError> {
        let pos = self.pos();
        let pred = self.ident()?;
        let args = if *self.peek() == Tok::LParen { self.args()? } else { Vec::new() };
        Ok(RawFormula::Atom { pred, args, pos })
    }

    fn args(&mut self) -> Result<Vec<RawTerm>, SyntaxError> {
        self.expect(Tok::LParen)?;
        let mut out = Vec::new();
        while *self.peek() != Tok::RParen {
            out.push(self.term()?);
            if !self.eat(&Tok::Comma) {
                break;
            }
        }
        self.expect(Tok::RParen)?;
        Ok(out)
    }

    fn term(&mut self) -> Result<RawTerm, SyntaxError> {
        let pos = self.pos();
        match self.next() {
            Tok::Ident(s) => Ok(RawTerm::Ident(s, pos)),
            Tok::Int(n) => Ok(RawTerm::Int(n, pos)),
            Tok::Var(v) => {
                let sign = match self.peek() {
                    Tok::Plus => 1,
                    Tok::Minus => -1,
                    _ => return Ok(RawTerm::Var(v, pos)),
                };
                if let Tok::Int(n) = self.peek_at(1).clone() {
                    self.next();
                    self.next();
                    Ok(RawTerm::Offset(v, sign * n, pos))
                } else {
                    Ok(RawTerm::Var(v, pos))
                }
            }
            t => {
                self.i -= 1;
                self.err(format!("expected a term, found {t}"))
            }
        }
    }

    /// `item & item & ...` where items are unary formulas.
    fn conj(&mut self) -> Result<Vec<RawFormula>, SyntaxError> {
        let mut items = vec![self.unary()?];
        while self.eat(&Tok::Amp) {
            items.push(self.unary()?);
        }
        Ok(items)
    }

    fn implies(&mut self) -> Result<RawFormula, SyntaxError> {
        let lhs = self.or()?;
        if self.eat(&Tok::Implies) {
            let rhs = self.or()?;
            Ok(RawFormula::Implies(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<RawFormula, SyntaxError> {
        let mut items = vec![self.and()?];
        while self.eat(&Tok::Bar) {
            items.push(self.and()?);
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { RawFormula::Or(items) })
    }

    fn and(&mut self) -> Result<RawFormula, SyntaxError> {
        let mut items = self.conj()?;
        Ok(if items.len() == 1 { items.pop().unwrap() } else { RawFormula::And(items) })
    }

    fn unary(&mut self) -> Result<RawFormula, SyntaxError> {
        if self.eat(&Tok::Tilde) {
            return Ok(RawFormula::Not(Box::new(self.unary()?)));
        }
        if let Tok::Ident(s) = self.peek().clone() {
            if s == "forall" || s == "exists" {
                let pos = self.pos();
                self.next();
                let var = match self.next() {
                    Tok::Ident(v) | Tok::Var(v) => v,
                    t => {
                        self.i -= 1;
                        return self.err(format!("expected a variable after `{s}`, found {t}"));
                    }
                };
                self.expect(Tok::Colon)?;
                let sort = self.ident()?;
                self.expect(Tok::Dot)?;
                let body = self.unary()?;
                return Ok(RawFormula::Quant { forall: s == "forall", var, sort, body: Box::new(body), pos });
            }
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<RawFormula, SyntaxError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::LParen => {
                self.next();
                let f = self.implies()?;
                self.expect(Tok::RParen)?;
                Ok(f)
            }
            Tok::Ident(s) if s == "true" => {
                self.next();
                Ok(RawFormula::True)
            }
            Tok::Ident(s) if s == "false" => {
                self.next();
                Ok(RawFormula::False)
            }
            Tok::Ident(s) if matches!(s.as_str(), "max" | "min" | "plus") && *self.peek_at(1) == Tok::LParen => {
                self.next();
                let args = self.args()?;
                Ok(RawFormula::Func { name: s, args, pos })
            }
            Tok::Ident(_) if is_cmp(self.peek_at(1)) => self.chain(),
            Tok::Ident(_) => self.atom_only(),
            Tok::Var(_) | Tok::Int(_) => self.chain(),
            t => self.err(format!("expected a condition, found {t}")),
        }
    }

    fn chain(&mut self) -> Result<RawFormula, SyntaxError> {
        let pos = self.pos();
        let mut terms = vec![self.term()?];
        let mut ops = Vec::new();
        while is_cmp(self.peek()) {
            ops.push(self.next());
            terms.push(self.term()?);
        }
        if ops.is_empty() {
            return self.err("expected a comparison operator");
        }
        Ok(RawFormula::Chain { terms, ops, pos })
    }
}

fn is_cmp(t: &Tok) -> bool {
    matches!(t, Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::Eq | Tok::Ne)
}

/// Parses and lowers a framework source text.
pub fn parse_framework(src: &str) -> Result<Framework, LoadError> {
    let toks = lex(src)?;
    let raw = Parser { toks, i: 0 }.file()?;
    Lowering::new(&raw)?.run(&raw)
}

/// Parses an unstamped ground atom such as `dispatch(bob,book)` against the
/// framework's declarations.
pub fn parse_ground_atom(s: &str, fw: &Framework) -> Result<GroundAtom, LoadError> {
    let toks = lex(s)?;
    let mut p = Parser { toks, i: 0 };
    let a = p.atom_only()?;
    if *p.peek() != Tok::Eof {
        return Err(p.err::<()>(format!("trailing input after atom: {}", p.peek())).unwrap_err().into());
    }
    let lw = Lowering { fw: fw.clone() };
    lw.ground_atom(&a, false)
}

struct Lowering {
    fw: Framework,
}

/// Variable sorts collected while lowering one rule or precondition.
#[derive(Default)]
struct SortEnv {
    sorts: BTreeMap<String, SortRef>,
}

impl SortEnv {
    fn note(&mut self, v: &str, s: SortRef, pos: Pos) -> Result<(), LoadError> {
        match self.sorts.get(v) {
            None => {
                self.sorts.insert(v.to_string(), s);
            }
            Some(old) if *old == s => {}
            Some(SortRef::Any) if s != SortRef::Time => {
                self.sorts.insert(v.to_string(), s);
            }
            Some(old) if s == SortRef::Any && *old != SortRef::Time => {}
            Some(old) => {
                return Err(LoadError::Sort {
                    msg: format!("variable `{v}` used with sort `{old}` and sort `{s}`"),
                    line: pos.0,
                    col: pos.1,
                })
            }
        }
        Ok(())
    }
}

enum Item {
    Cond(Formula, Option<TimeExpr>),
    Constraint(Vec<Constraint>),
    Skip,
}

impl Lowering {
    fn new(raw: &RawFile) -> Result<Self, LoadError> {
        let mut fw = Framework::default();
        for (n, cs, _) in &raw.sorts {
            fw.sorts.entry(name(n)).or_default().extend(cs.iter().map(|c| name(c)));
        }
        let mut lw = Lowering { fw };
        for (kind, d) in &raw.decls {
            let (RawDecl::Arity(n, _, pos) | RawDecl::Typed(n, _, pos)) = d;
            if lw.fw.preds.contains_key(n.as_str()) {
                return Err(LoadError::Sort { msg: format!("predicate `{n}` declared twice"), line: pos.0, col: pos.1 });
            }
            let decl = match d {
                RawDecl::Arity(n, k, _) => PredDecl { name: name(n), kind: *kind, args: vec![SortRef::Any; *k] },
                RawDecl::Typed(n, sorts, _) => {
                    let args = sorts.iter().map(|(s, p)| lw.sort_ref(s, *p)).collect::<Result<Vec<_>, _>>()?;
                    PredDecl { name: name(n), kind: *kind, args }
                }
            };
            lw.fw.preds.insert(decl.name.clone(), decl);
        }
        Ok(lw)
    }

    fn sort_ref(&self, s: &str, pos: Pos) -> Result<SortRef, LoadError> {
        match s {
            "time" => Ok(SortRef::Time),
            "any" => Ok(SortRef::Any),
            _ if self.fw.sorts.contains_key(s) => Ok(SortRef::Named(name(s))),
            _ => Err(LoadError::UnknownSort { name: s.to_string(), line: pos.0, col: pos.1 }),
        }
    }

    fn decl(&self, pred: &str, pos: Pos) -> Result<&PredDecl, LoadError> {
        self.fw
            .preds
            .get(pred)
            .ok_or_else(|| LoadError::UnknownPredicate { name: pred.to_string(), line: pos.0, col: pos.1 })
    }

    fn run(mut self, raw: &RawFile) -> Result<Framework, LoadError> {
        for a in &raw.initial {
            let g = self.ground_atom(a, false)?;
            self.expect_kind(a, &[PredKind::Fluent], "initial state")?;
            self.fw.initial.insert(g);
        }
        for a in &raw.aux_facts {
            let g = self.ground_atom(a, false)?;
            self.expect_kind(a, &[PredKind::Aux], "aux-facts")?;
            self.fw.aux.insert(g);
        }
        let mut causal = CausalTheory::default();
        for (src, dst) in [(&raw.initiates, &mut causal.initiates), (&raw.terminates, &mut causal.terminates)] {
            for entry in src {
                dst.extend(self.post_entries(entry)?);
            }
        }
        for (body, pos) in &raw.pre {
            causal.pre.push(self.precondition(body, *pos)?);
        }
        self.fw.causal = causal;
        let mut rules = Vec::new();
        for (i, r) in raw.rules.iter().enumerate() {
            rules.push(self.rule(i, r)?);
        }
        self.fw.rules = rules;
        Ok(self.fw)
    }

    fn expect_kind(&self, a: &RawFormula, kinds: &[PredKind], what: &str) -> Result<(), LoadError> {
        if let RawFormula::Atom { pred, pos, .. } = a {
            let d = self.decl(pred, *pos)?;
            if !kinds.contains(&d.kind) {
                return Err(LoadError::Sort {
                    msg: format!("`{pred}` ({:?}) is not allowed in {what}", d.kind),
                    line: pos.0,
                    col: pos.1,
                });
            }
        }
        Ok(())
    }

    fn constant(&self, c: &str, sort: &SortRef, pos: Pos) -> Result<Value, LoadError> {
        let ok = match sort {
            SortRef::Named(s) => self.fw.sorts.get(s).is_some_and(|cs| cs.iter().any(|x| &**x == c)),
            SortRef::Any => self.fw.sorts.values().any(|cs| cs.iter().any(|x| &**x == c)),
            SortRef::Time => false,
        };
        if ok {
            Ok(Value::Sym(name(c)))
        } else {
            Err(LoadError::Sort { msg: format!("constant `{c}` is not of sort `{sort}`"), line: pos.0, col: pos.1 })
        }
    }

    /// Unstamped ground atom. With `allow_vars`, variables are returned as
    /// errors for the caller to expand instead.
    fn ground_atom(&self, a: &RawFormula, allow_vars: bool) -> Result<GroundAtom, LoadError> {
        let RawFormula::Atom { pred, args, pos } = a else {
            unreachable!("atom_only produces atoms")
        };
        let d = self.decl(pred, *pos)?;
        if args.len() != d.args.len() {
            return Err(LoadError::Arity { name: pred.clone(), expected: d.args.len(), found: args.len(), line: pos.0, col: pos.1 });
        }
        let mut vals = Vec::new();
        for (t, s) in args.iter().zip(&d.args) {
            vals.push(match (t, s) {
                (RawTerm::Int(n, _), SortRef::Time) if *n >= 0 => Value::Time(*n as u32),
                (RawTerm::Ident(c, p), _) => self.constant(c, s, *p)?,
                (RawTerm::Var(v, p), _) if allow_vars => {
                    return Err(LoadError::Sort { msg: format!("variable `{v}`"), line: p.0, col: p.1 })
                }
                (t, _) => {
                    let p = t.pos();
                    return Err(LoadError::Sort { msg: format!("expected a ground term of sort `{s}`"), line: p.0, col: p.1 });
                }
            });
        }
        Ok(GroundAtom { pred: d.name.clone(), args: vals })
    }

    /// Expands variable shorthand in a post entry over the declared sorts.
    fn post_entries(&self, e: &RawPost) -> Result<Vec<PostEntry>, LoadError> {
        let mut env = SortEnv::default();
        for a in e.events.iter().chain(std::iter::once(&e.fluent)) {
            let RawFormula::Atom { pred, args, pos } = a else { unreachable!() };
            let d = self.decl(pred, *pos)?;
            if args.len() != d.args.len() {
                return Err(LoadError::Arity { name: pred.clone(), expected: d.args.len(), found: args.len(), line: pos.0, col: pos.1 });
            }
            for (t, s) in args.iter().zip(&d.args) {
                if let RawTerm::Var(v, p) = t {
                    env.note(v, s.clone(), *p)?;
                }
            }
        }
        for a in &e.events {
            self.expect_kind(a, &[PredKind::External, PredKind::Action], "the event set of a post entry")?;
        }
        self.expect_kind(&e.fluent, &[PredKind::Fluent], "the fluent of a post entry")?;
        let mut groundings: Vec<BTreeMap<String, Value>> = vec![BTreeMap::new()];
        for (v, s) in &env.sorts {
            let dom = self.fw.domain(s, None).unwrap_or_default();
            groundings = groundings
                .into_iter()
                .flat_map(|g| {
                    dom.iter().map(move |val| {
                        let mut g = g.clone();
                        g.insert(v.clone(), val.clone());
                        g
                    })
                })
                .collect();
        }
        let inst = |a: &RawFormula, g: &BTreeMap<String, Value>| -> Result<GroundAtom, LoadError> {
            let RawFormula::Atom { pred, args, pos } = a else { unreachable!() };
            let d = self.decl(pred, *pos)?;
            let mut vals = Vec::new();
            for (t, s) in args.iter().zip(&d.args) {
                vals.push(match t {
                    RawTerm::Var(v, _) => g[v].clone(),
                    RawTerm::Ident(c, p) => self.constant(c, s, *p)?,
                    RawTerm::Int(n, _) if *s == SortRef::Time && *n >= 0 => Value::Time(*n as u32),
                    t => {
                        let p = t.pos();
                        return Err(LoadError::Sort { msg: "unexpected time term in post entry".into(), line: p.0, col: p.1 });
                    }
                });
            }
            Ok(GroundAtom { pred: d.name.clone(), args: vals })
        };
        let mut out = Vec::new();
        for g in &groundings {
            let events = e.events.iter().map(|a| inst(a, g)).collect::<Result<BTreeSet<_>, _>>()?;
            out.push(PostEntry { events, fluent: inst(&e.fluent, g)? });
        }
        Ok(out)
    }

    fn precondition(&self, body: &[RawFormula], pos: Pos) -> Result<PreConstraint, LoadError> {
        let mut env = SortEnv::default();
        for f in body {
            self.infer(f, &mut env, &mut Vec::new())?;
        }
        let items = body.iter().map(|f| self.item(f, &env, &mut Vec::new())).collect::<Result<Vec<_>, _>>()?;
        let (conds, constraints) = group_items(items, &env);
        if !constraints.is_empty() {
            return Err(LoadError::Sort {
                msg: "temporal constraints are not supported in preconditions".into(),
                line: pos.0,
                col: pos.1,
            });
        }
        let var_sorts = env.sorts.iter().map(|(k, v)| (name(k), v.clone())).collect();
        Ok(PreConstraint { body: conds, var_sorts })
    }

    fn rule(&self, index: usize, r: &RawRule) -> Result<ReactiveRule, LoadError> {
        let mut env = SortEnv::default();
        for f in r.antecedent.iter().chain(r.disjuncts.iter().flatten()) {
            self.infer(f, &mut env, &mut Vec::new())?;
        }
        if r.disjuncts.iter().any(|d| d.len() == 1 && matches!(d[0], RawFormula::False)) {
            return Err(LoadError::Sort {
                msg: "a rule consequent cannot be `false`; use a precondition instead".into(),
                line: r.pos.0,
                col: r.pos.1,
            });
        }
        let lower = |fs: &[RawFormula]| -> Result<Complex, LoadError> {
            let items = fs.iter().map(|f| self.item(f, &env, &mut Vec::new())).collect::<Result<Vec<_>, _>>()?;
            let (conditions, constraints) = group_items(items, &env);
            Ok(Complex { conditions, constraints })
        };
        let antecedent = lower(&r.antecedent)?;
        let consequents = r.disjuncts.iter().map(|d| lower(d)).collect::<Result<Vec<_>, _>>()?;
        let universal = antecedent.vars();
        let existential = consequents.iter().map(|d| d.vars().difference(&universal).cloned().collect()).collect();
        let var_sorts = env.sorts.iter().map(|(k, v)| (name(k), v.clone())).collect();
        Ok(ReactiveRule { index, antecedent, consequents, universal, existential, var_sorts })
    }

    /// First pass: record the sort of every free variable.
    fn infer(&self, f: &RawFormula, env: &mut SortEnv, scope: &mut Vec<String>) -> Result<(), LoadError> {
        match f {
            RawFormula::True | RawFormula::False => Ok(()),
            RawFormula::Atom { pred, args, pos } => {
                let d = self.decl(pred, *pos)?;
                let stamped = d.kind.is_stamped();
                let expected = d.args.len() + usize::from(stamped);
                if args.len() != expected {
                    return Err(LoadError::Arity { name: pred.clone(), expected, found: args.len(), line: pos.0, col: pos.1 });
                }
                let sorts = d.args.iter().cloned().chain(stamped.then_some(SortRef::Time));
                for (t, s) in args.iter().zip(sorts) {
                    match t {
                        RawTerm::Var(v, p) if !scope.contains(v) => env.note(v, s, *p)?,
                        RawTerm::Offset(v, _, p) if !scope.contains(v) => env.note(v, SortRef::Time, *p)?,
                        _ => {}
                    }
                }
                Ok(())
            }
            RawFormula::Chain { terms, ops, .. } => {
                let timed = ops.iter().any(|o| !matches!(o, Tok::Eq | Tok::Ne))
                    || terms.iter().any(|t| match t {
                        RawTerm::Int(..) | RawTerm::Offset(..) => true,
                        RawTerm::Var(v, _) => env.sorts.get(v) == Some(&SortRef::Time),
                        RawTerm::Ident(..) => false,
                    });
                let timed = timed && !terms.iter().any(|t| matches!(t, RawTerm::Ident(..)));
                for t in terms {
                    match t {
                        RawTerm::Var(v, p) | RawTerm::Offset(v, _, p) if !scope.contains(v) => {
                            if timed {
                                env.note(v, SortRef::Time, *p)?
                            } else if !env.sorts.contains_key(v) {
                                env.note(v, SortRef::Any, *p)?
                            }
                        }
                        _ => {}
                    }
                }
                Ok(())
            }
            RawFormula::Func { args, .. } => {
                for t in args {
                    if let RawTerm::Var(v, p) | RawTerm::Offset(v, _, p) = t {
                        env.note(v, SortRef::Time, *p)?;
                    }
                }
                Ok(())
            }
            RawFormula::Not(g) => self.infer(g, env, scope),
            RawFormula::And(gs) | RawFormula::Or(gs) => gs.iter().try_for_each(|g| self.infer(g, env, scope)),
            RawFormula::Implies(a, b) => {
                self.infer(a, env, scope)?;
                self.infer(b, env, scope)
            }
            RawFormula::Quant { var, sort, body, pos, .. } => {
                self.sort_ref(sort, *pos)?;
                scope.push(var.clone());
                let r = self.infer(body, env, scope);
                scope.pop();
                r
            }
        }
    }

    fn term(&self, t: &RawTerm, sort: &SortRef, env: &SortEnv, scope: &[(String, SortRef)]) -> Result<Term, LoadError> {
        let quantified = |v: &str| scope.iter().rev().find(|(n, _)| n == v).map(|(_, s)| s.clone());
        let p = t.pos();
        match (t, sort) {
            (RawTerm::Int(n, _), SortRef::Time) => Ok(Term::Time(TimeExpr::constant(*n))),
            (RawTerm::Offset(v, k, _), SortRef::Time) => Ok(Term::Time(TimeExpr::plus(v, *k))),
            (RawTerm::Var(v, _), SortRef::Time) => Ok(Term::Time(TimeExpr::var(v))),
            (RawTerm::Ident(c, _), SortRef::Time) if quantified(c) == Some(SortRef::Time) => Ok(Term::Time(TimeExpr::var(c))),
            (RawTerm::Ident(c, _), _) if quantified(c).is_some() => Ok(Term::Var(name(c))),
            (RawTerm::Var(v, _), _) if quantified(v).is_some() || env.sorts.contains_key(v) => Ok(Term::Var(name(v))),
            (RawTerm::Ident(c, _), s) => match self.constant(c, s, p)? {
                Value::Sym(c) => Ok(Term::Const(c)),
                Value::Time(_) => unreachable!(),
            },
            _ => Err(LoadError::Sort { msg: format!("term is not of sort `{sort}`"), line: p.0, col: p.1 }),
        }
    }

    fn time_expr(&self, t: &RawTerm, scope: &[(String, SortRef)]) -> Result<TimeExpr, LoadError> {
        match t {
            RawTerm::Int(n, _) => Ok(TimeExpr::constant(*n)),
            RawTerm::Var(v, _) => Ok(TimeExpr::var(v)),
            RawTerm::Offset(v, k, _) => Ok(TimeExpr::plus(v, *k)),
            RawTerm::Ident(c, _) if scope.iter().any(|(n, s)| n == c && *s == SortRef::Time) => Ok(TimeExpr::var(c)),
            RawTerm::Ident(c, p) => Err(LoadError::Sort { msg: format!("`{c}` is not a time"), line: p.0, col: p.1 }),
        }
    }

    fn item(&self, f: &RawFormula, env: &SortEnv, scope: &mut Vec<(String, SortRef)>) -> Result<Item, LoadError> {
        match f {
            RawFormula::True => Ok(Item::Skip),
            RawFormula::Chain { .. } | RawFormula::Func { .. } if self.is_temporal(f, env, scope) => {
                Ok(Item::Constraint(self.constraints(f, scope)?))
            }
            _ => {
                let formula = self.formula(f, env, scope)?;
                let stamps: BTreeSet<TimeExpr> = formula.atoms().into_iter().filter_map(|a| a.stamp.clone()).collect();
                Ok(Item::Cond(formula, stamps.into_iter().next()))
            }
        }
    }

    fn is_temporal(&self, f: &RawFormula, env: &SortEnv, scope: &[(String, SortRef)]) -> bool {
        match f {
            RawFormula::Func { .. } => true,
            RawFormula::Chain { terms, ops, .. } => {
                ops.iter().any(|o| !matches!(o, Tok::Eq | Tok::Ne))
                    || terms.iter().any(|t| match t {
                        RawTerm::Int(..) | RawTerm::Offset(..) => true,
                        RawTerm::Var(v, _) | RawTerm::Ident(v, _) => {
                            scope.iter().rev().find(|(n, _)| n == v).map(|(_, s)| s.clone()).or_else(|| env.sorts.get(v).cloned())
                                == Some(SortRef::Time)
                        }
                    })
            }
            _ => false,
        }
    }

    fn constraints(&self, f: &RawFormula, scope: &[(String, SortRef)]) -> Result<Vec<Constraint>, LoadError> {
        match f {
            RawFormula::Func { name: fname, args, pos } => {
                if args.len() != 3 {
                    return Err(LoadError::Arity { name: fname.clone(), expected: 3, found: args.len(), line: pos.0, col: pos.1 });
                }
                let out = self.time_expr(&args[2], scope)?;
                Ok(vec![match fname.as_str() {
                    "max" => Constraint::Max(self.time_expr(&args[0], scope)?, self.time_expr(&args[1], scope)?, out),
                    "min" => Constraint::Min(self.time_expr(&args[0], scope)?, self.time_expr(&args[1], scope)?, out),
                    _ => {
                        let RawTerm::Int(n, _) = args[1] else {
                            let p = args[1].pos();
                            return Err(LoadError::Sort { msg: "plus/3 expects a literal offset".into(), line: p.0, col: p.1 });
                        };
                        let base = self.time_expr(&args[0], scope)?;
                        Constraint::Eq(out, TimeExpr { var: base.var, offset: base.offset + n })
                    }
                }])
            }
            RawFormula::Chain { terms, ops, pos } => {
                let mut out = Vec::new();
                for (k, op) in ops.iter().enumerate() {
                    let a = self.time_expr(&terms[k], scope)?;
                    let b = self.time_expr(&terms[k + 1], scope)?;
                    out.push(match op {
                        Tok::Lt => Constraint::Lt(a, b),
                        Tok::Le => Constraint::Le(a, b),
                        Tok::Gt => Constraint::Lt(b, a),
                        Tok::Ge => Constraint::Le(b, a),
                        Tok::Eq => Constraint::Eq(a, b),
                        _ => {
                            return Err(LoadError::Sort {
                                msg: "`!=` is not supported between times".into(),
                                line: pos.0,
                                col: pos.1,
                            })
                        }
                    });
                }
                Ok(out)
            }
            _ => unreachable!(),
        }
    }

    fn formula(&self, f: &RawFormula, env: &SortEnv, scope: &mut Vec<(String, SortRef)>) -> Result<Formula, LoadError> {
        Ok(match f {
            RawFormula::True => Formula::True,
            RawFormula::False => Formula::False,
            RawFormula::Atom { pred, args, pos } => {
                let d = self.decl(pred, *pos)?;
                let mut terms = Vec::new();
                for (t, s) in args.iter().zip(&d.args) {
                    terms.push(self.term(t, s, env, scope)?);
                }
                let stamp = if d.kind.is_stamped() {
                    match self.term(&args[d.args.len()], &SortRef::Time, env, scope)? {
                        Term::Time(te) => Some(te),
                        _ => unreachable!(),
                    }
                } else {
                    None
                };
                Formula::Atom(Atom { pred: d.name.clone(), args: terms, stamp })
            }
            RawFormula::Chain { terms, ops, pos } => {
                if self.is_temporal(f, env, scope) {
                    return Err(LoadError::Sort {
                        msg: "temporal constraints must be top-level conjuncts".into(),
                        line: pos.0,
                        col: pos.1,
                    });
                }
                if ops.len() != 1 {
                    return Err(LoadError::Sort { msg: "chained (dis)equality between non-time terms".into(), line: pos.0, col: pos.1 });
                }
                let sort_of = |t: &RawTerm| match t {
                    RawTerm::Var(v, _) | RawTerm::Ident(v, _) => scope
                        .iter()
                        .rev()
                        .find(|(n, _)| n == v)
                        .map(|(_, s)| s.clone())
                        .or_else(|| env.sorts.get(v).cloned())
                        .unwrap_or(SortRef::Any),
                    _ => SortRef::Any,
                };
                let l = self.term(&terms[0], &sort_of(&terms[0]), env, scope)?;
                let r = self.term(&terms[1], &sort_of(&terms[1]), env, scope)?;
                Formula::Cmp(if ops[0] == Tok::Eq { CmpOp::Eq } else { CmpOp::Ne }, l, r)
            }
            RawFormula::Func { pos, .. } => {
                return Err(LoadError::Sort { msg: "temporal constraints must be top-level conjuncts".into(), line: pos.0, col: pos.1 })
            }
            RawFormula::Not(g) => Formula::Not(Box::new(self.formula(g, env, scope)?)),
            RawFormula::And(gs) => Formula::And(gs.iter().map(|g| self.formula(g, env, scope)).collect::<Result<_, _>>()?),
            RawFormula::Or(gs) => Formula::Or(gs.iter().map(|g| self.formula(g, env, scope)).collect::<Result<_, _>>()?),
            RawFormula::Implies(a, b) => Formula::Implies(Box::new(self.formula(a, env, scope)?), Box::new(self.formula(b, env, scope)?)),
            RawFormula::Quant { forall, var, sort, body, pos } => {
                let s = self.sort_ref(sort, *pos)?;
                scope.push((var.clone(), s.clone()));
                let b = self.formula(body, env, scope);
                scope.pop();
                let b = Box::new(b?);
                if *forall {
                    Formula::Forall(name(var), s, b)
                } else {
                    Formula::Exists(name(var), s, b)
                }
            }
        })
    }
}

/// Turns lowered items into conditions and constraints. Items without a
/// timestamp are conjoined onto the nearest preceding stamped condition
/// (or the first following one when none precedes).
fn group_items(items: Vec<Item>, env: &SortEnv) -> (Vec<FolCondition>, Vec<Constraint>) {
    let mut constraints = Vec::new();
    let mut conds: Vec<(Formula, Option<TimeExpr>)> = Vec::new();
    let mut pending: Vec<Formula> = Vec::new();
    for it in items {
        match it {
            Item::Skip => {}
            Item::Constraint(cs) => constraints.extend(cs),
            Item::Cond(f, Some(s)) => {
                let f = if pending.is_empty() {
                    f
                } else {
                    let mut parts: Vec<Formula> = std::mem::take(&mut pending);
                    parts.push(f);
                    Formula::And(parts)
                };
                conds.push((f, Some(s)));
            }
            Item::Cond(f, None) => match conds.last_mut() {
                Some((prev, _)) => {
                    let old = std::mem::replace(prev, Formula::True);
                    *prev = match old {
                        Formula::And(mut v) => {
                            v.push(f);
                            Formula::And(v)
                        }
                        o => Formula::And(vec![o, f]),
                    };
                }
                None => pending.push(f),
            },
        }
    }
    for f in pending {
        conds.push((f, None));
    }
    let conditions = conds
        .into_iter()
        .map(|(formula, stamp)| {
            let vars = formula
                .free_vars()
                .into_iter()
                .map(|v| {
                    let s = env.sorts.get(&*v).cloned().unwrap_or(SortRef::Any);
                    (v, s)
                })
                .collect();
            FolCondition { formula, stamp, vars }
        })
        .collect();
    (conditions, constraints)
}
