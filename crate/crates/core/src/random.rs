//! Seeded generator of tiny valid frameworks with external-event streams,
//! for property campaigns over the engine and the checkers.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::Timeline;
use crate::syntax::{parse_framework, validate_framework, Framework, GroundAtom};

/// A generated instance: source text, parsed framework, events and horizon.
#[derive(Clone, Debug)]
pub struct Instance {
    pub source: String,
    pub framework: Framework,
    pub ext: Timeline,
    pub horizon: u32,
}

#[derive(Clone)]
struct Pred {
    name: &'static str,
    unary: bool,
}

impl Pred {
    fn atom(&self, arg: &str, stamp: &str) -> String {
        if self.unary {
            format!("{}({arg}, {stamp})", self.name)
        } else {
            format!("{}({stamp})", self.name)
        }
    }
}

struct Gen {
    rng: ChaCha8Rng,
    consts: Vec<&'static str>,
    fluents: Vec<Pred>,
    events: Vec<Pred>,
    actions: Vec<Pred>,
}

impl Gen {
    fn preds(&mut self, names: &[&'static str]) -> Vec<Pred> {
        let n = self.rng.gen_range(1..=names.len());
        names[..n].iter().map(|&name| Pred { name, unary: self.rng.gen_bool(0.4) }).collect()
    }

    fn pick<'a>(&mut self, ps: &'a [Pred]) -> &'a Pred {
        ps.choose(&mut self.rng).expect("nonempty")
    }

    fn arg(&mut self, bound: bool) -> String {
        if bound && self.rng.gen_bool(0.7) {
            "X".into()
        } else {
            (*self.consts.choose(&mut self.rng).expect("nonempty")).to_string()
        }
    }

    fn decls(ps: &[Pred]) -> String {
        ps.iter().map(|p| if p.unary { format!("{}(s)", p.name) } else { p.name.to_string() }).collect::<Vec<_>>().join(", ")
    }

    /// Antecedent text and whether it binds `X`.
    fn antecedent(&mut self) -> (String, bool) {
        if self.rng.gen_bool(0.15) {
            return ("true".into(), false);
        }
        let mut parts = Vec::new();
        let mut binds = false;
        let ev = self.pick(&self.events.clone()).clone();
        let x = if ev.unary {
            binds = true;
            "X".to_string()
        } else {
            self.arg(false)
        };
        parts.push(ev.atom(&x, "T1"));
        if self.rng.gen_bool(0.5) {
            let f = self.pick(&self.fluents.clone()).clone();
            let a = self.arg(binds);
            let neg = if self.rng.gen_bool(0.3) { "~" } else { "" };
            // A negated atom cannot introduce X.
            let a = if !neg.is_empty() && a == "X" && !binds { self.arg(false) } else { a };
            if a == "X" {
                binds = true;
            }
            parts.push(format!("{neg}{}", f.atom(&a, "T1")));
        }
        (parts.join(" & "), binds)
    }

    fn disjunct(&mut self, has_t1: bool, binds: bool) -> String {
        let mut parts = Vec::new();
        let mut cons = Vec::new();
        let lo = if has_t1 { "T1 < " } else { "" };
        let window = self.rng.gen_range(1..=3);
        if self.rng.gen_bool(0.3) {
            let f = self.pick(&self.fluents.clone()).clone();
            let a = self.arg(binds);
            parts.push(f.atom(&a, "T2"));
            cons.push(if has_t1 { format!("T1 <= T2 <= T1 + {window}") } else { format!("T2 <= {window}") });
        }
        let n = self.rng.gen_range(1..=2);
        for k in 0..n {
            let act = self.pick(&self.actions.clone()).clone();
            let a = self.arg(binds);
            let v = format!("T{}", 3 + k);
            parts.push(act.atom(&a, &v));
            cons.push(if has_t1 { format!("{lo}{v} <= T1 + {window}") } else { format!("{v} <= {window}") });
        }
        if parts.len() == 3 && self.rng.gen_bool(0.5) {
            cons.push("T3 <= T4".into());
        }
        // A consequent condition that has to be observed before acting.
        if parts.len() >= 2 && parts[0].contains("T2") && self.rng.gen_bool(0.5) {
            cons.push("T2 < T3".into());
        }
        parts.extend(cons);
        parts.join(" & ")
    }

    fn source(&mut self) -> String {
        let mut out = String::new();
        out.push_str(&format!("sorts {{ s: {{{}}} }}\n", self.consts.join(", ")));
        out.push_str(&format!("fluents {{ {} }}\n", Self::decls(&self.fluents)));
        out.push_str(&format!("events {{ {} }}\n", Self::decls(&self.events)));
        out.push_str(&format!("actions {{ {} }}\n", Self::decls(&self.actions)));
        // Initial state: a random subset of the fluent base.
        let mut init = Vec::new();
        for f in self.fluents.clone() {
            let args: Vec<String> = if f.unary { self.consts.iter().map(|c| c.to_string()).collect() } else { vec![String::new()] };
            for a in args {
                if self.rng.gen_bool(0.4) {
                    init.push(if f.unary { format!("{}({a})", f.name) } else { f.name.to_string() });
                }
            }
        }
        out.push_str(&format!("initial {{ {} }}\n", init.join(", ")));
        let mut ini = Vec::new();
        let mut ter = Vec::new();
        let causes: Vec<Pred> = self.actions.iter().chain(&self.events).cloned().collect();
        for _ in 0..self.rng.gen_range(0..=3) {
            let e = causes.choose(&mut self.rng).expect("nonempty").clone();
            let f = self.pick(&self.fluents.clone()).clone();
            let (ea, fa) = match (e.unary, f.unary) {
                (true, true) if self.rng.gen_bool(0.5) => ("(X)".to_string(), "(X)".to_string()),
                (eu, fu) => (
                    if eu { format!("({})", self.arg(false)) } else { String::new() },
                    if fu { format!("({})", self.arg(false)) } else { String::new() },
                ),
            };
            let entry = format!("{{{}{ea}}} ~> {}{fa}", e.name, f.name);
            if self.rng.gen_bool(0.5) {
                ini.push(entry);
            } else {
                ter.push(entry);
            }
        }
        out.push_str(&format!("initiates {{ {} }}\nterminates {{ {} }}\n", ini.join(", "), ter.join(", ")));
        if self.actions.len() == 2 && self.rng.gen_bool(0.3) {
            let (a, b) = (self.actions[0].clone(), self.actions[1].clone());
            let x = self.arg(false);
            let y = self.arg(false);
            out.push_str(&format!("preconditions {{ {} & {} -> false }}\n", a.atom(&x, "T"), b.atom(&y, "T")));
        }
        let mut rules = Vec::new();
        for _ in 0..self.rng.gen_range(1..=2) {
            let (ante, binds) = self.antecedent();
            let has_t1 = ante != "true";
            let n = self.rng.gen_range(1..=2);
            let ds: Vec<String> = (0..n).map(|_| self.disjunct(has_t1, binds)).collect();
            rules.push(format!("    {ante} -> {},", ds.join(" | ")));
        }
        out.push_str(&format!("rules {{\n{}\n}}\n", rules.join("\n")));
        out
    }

    fn ext(&mut self, horizon: u32) -> Timeline {
        let mut alphabet: Vec<GroundAtom> = Vec::new();
        for e in &self.events {
            if e.unary {
                alphabet.extend(self.consts.iter().map(|c| GroundAtom::new(e.name, &[c])));
            } else {
                alphabet.push(GroundAtom::prop(e.name));
            }
        }
        let mut out = Timeline::new();
        for t in 1..=horizon {
            let set: std::collections::BTreeSet<GroundAtom> = alphabet.iter().filter(|_| self.rng.gen_bool(0.35)).cloned().collect();
            if !set.is_empty() {
                out.insert(t, set);
            }
        }
        out
    }
}

/// A tiny valid instance: one sort of one or two constants, at most two
/// fluent, event and action predicates (arity 0 or 1), one or two rules,
/// and a horizon between 2 and 4. Candidates failing validation are
/// discarded and regenerated from the same stream.
pub fn tiny_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let sub = rng.gen::<u64>();
        let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(sub), consts: Vec::new(), fluents: Vec::new(), events: Vec::new(), actions: Vec::new() };
        g.consts = if g.rng.gen_bool(0.5) { vec!["a"] } else { vec!["a", "b"] };
        g.fluents = g.preds(&["f", "g"]);
        g.events = g.preds(&["e", "d"]);
        g.actions = g.preds(&["p", "q"]);
        let source = g.source();
        let Ok(framework) = parse_framework(&source) else { continue };
        if !validate_framework(&framework).is_ok() {
            continue;
        }
        let horizon = g.rng.gen_range(2..=4);
        let ext = g.ext(horizon);
        return Instance { source, framework, ext, horizon };
    }
}
