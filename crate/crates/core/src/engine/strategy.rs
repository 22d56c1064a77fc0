//! Choice policies for steps 2, 3 and 4, and scripted replay.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{ActionOption, EngineState, Evaluation};
use crate::syntax::GroundAtom;

/// Indices into a candidate list, ascending.
pub type Selection = Vec<usize>;

pub struct Step2View<'v> {
    pub cycle: u32,
    pub engine: &'v EngineState,
    pub candidates: &'v [Evaluation],
}

pub struct Step3View<'v> {
    pub cycle: u32,
    pub engine: &'v EngineState,
    pub options: &'v [ActionOption],
}

pub struct Step4View<'v> {
    pub cycle: u32,
    /// Union of the chosen step-3 actions, sorted.
    pub candidates: &'v [GroundAtom],
    /// Whether a subset of the candidates (with the external events) keeps
    /// the preconditions true.
    pub passes: &'v dyn Fn(&BTreeSet<GroundAtom>) -> bool,
}

pub trait Strategy {
    fn step2(&mut self, view: &Step2View<'_>) -> Selection;
    fn step3(&mut self, view: &Step3View<'_>) -> Selection;
    fn step4(&mut self, view: &Step4View<'_>) -> Selection;
}

fn all(n: usize) -> Selection {
    (0..n).collect()
}

fn pick(cands: &[GroundAtom], sel: &[usize]) -> BTreeSet<GroundAtom> {
    sel.iter().map(|&k| cands[k].clone()).collect()
}

/// Largest passing subset, ties broken lexicographically by index. Above
/// 16 candidates this degrades to a greedy pass in candidate order.
pub fn maximal_passing(view: &Step4View<'_>) -> Selection {
    let n = view.candidates.len();
    if (view.passes)(&view.candidates.iter().cloned().collect()) {
        return all(n);
    }
    if n > 16 {
        let mut sel = Vec::new();
        for k in 0..n {
            sel.push(k);
            if !(view.passes)(&pick(view.candidates, &sel)) {
                sel.pop();
            }
        }
        return sel;
    }
    for size in (1..n).rev() {
        let mut masks: Vec<u32> = (0u32..1 << n).filter(|m| m.count_ones() as usize == size).collect();
        // Lexicographic order on the ascending index lists.
        masks.sort_by_key(|m| std::cmp::Reverse(m.reverse_bits()));
        for m in masks {
            let sel: Selection = (0..n).filter(|b| m & (1 << b) != 0).collect();
            if (view.passes)(&pick(view.candidates, &sel)) {
                return sel;
            }
        }
    }
    Vec::new()
}

/// Textual order, earliest timestamps: every step-2 evaluation, and for
/// each open goal tree the largest action option of its most promising clause.
#[derive(Clone, Debug, Default)]
pub struct Deterministic {
    /// Never select actions from disjuncts other than the first.
    pub first_disjunct: bool,
}

impl Strategy for Deterministic {
    fn step2(&mut self, view: &Step2View<'_>) -> Selection {
        all(view.candidates.len())
    }

    fn step3(&mut self, view: &Step3View<'_>) -> Selection {
        let es = view.engine;
        let mut by_clause: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (k, o) in view.options.iter().enumerate() {
            by_clause.entry(o.clause).or_default().push(k);
        }
        let mut sel = Vec::new();
        for tree in es.trees.values().filter(|t| t.achieved.is_none()) {
            let mut clauses: Vec<_> = es
                .clauses
                .values()
                .filter(|c| c.tree == tree.id && (!self.first_disjunct || c.disjunct == 0))
                .collect();
            clauses.sort_by_key(|c| (c.disjunct, std::cmp::Reverse(c.created), std::cmp::Reverse(c.id)));
            if let Some(opts) = clauses.iter().find_map(|c| by_clause.get(&c.id)) {
                let best = opts.iter().copied().max_by_key(|&k| (view.options[k].actions.len(), std::cmp::Reverse(k)));
                sel.extend(best);
            }
        }
        sel.sort_unstable();
        sel.dedup();
        sel
    }

    fn step4(&mut self, view: &Step4View<'_>) -> Selection {
        maximal_passing(view)
    }
}

/// Every evaluation and every option; the maximal passing action subset.
#[derive(Clone, Debug, Default)]
pub struct Maximal;

impl Strategy for Maximal {
    fn step2(&mut self, view: &Step2View<'_>) -> Selection {
        all(view.candidates.len())
    }

    fn step3(&mut self, view: &Step3View<'_>) -> Selection {
        all(view.options.len())
    }

    fn step4(&mut self, view: &Step4View<'_>) -> Selection {
        maximal_passing(view)
    }
}

/// Independent coin flips for every choice, from a seeded ChaCha stream.
#[derive(Clone, Debug)]
pub struct RandomStrategy {
    rng: ChaCha8Rng,
}

impl RandomStrategy {
    pub fn new(seed: u64) -> Self {
        RandomStrategy { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    fn coins(&mut self, n: usize) -> Selection {
        (0..n).filter(|_| self.rng.gen_bool(0.5)).collect()
    }
}

impl Strategy for RandomStrategy {
    fn step2(&mut self, view: &Step2View<'_>) -> Selection {
        self.coins(view.candidates.len())
    }

    fn step3(&mut self, view: &Step3View<'_>) -> Selection {
        self.coins(view.options.len())
    }

    fn step4(&mut self, view: &Step4View<'_>) -> Selection {
        let mut order = all(view.candidates.len());
        order.shuffle(&mut self.rng);
        let mut sel = Vec::new();
        for k in order {
            if self.rng.gen_bool(0.5) {
                sel.push(k);
                if !(view.passes)(&pick(view.candidates, &sel)) {
                    sel.pop();
                }
            }
        }
        sel.sort_unstable();
        sel
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Choice {
    All,
    Pick(Selection),
}

impl Choice {
    fn resolve(&self, n: usize) -> Selection {
        match self {
            Choice::All => all(n),
            Choice::Pick(s) => s.clone(),
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::All => f.write_str("*"),
            Choice::Pick(s) if s.is_empty() => f.write_str("-"),
            Choice::Pick(s) => f.write_str(&s.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(",")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("script line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("cannot read script: {0}")]
    Io(#[from] std::io::Error),
    #[error("unknown strategy `{0}` (expected det, det:first-disjunct, rand:<seed>, exhaustive or script:<path>)")]
    Spec(String),
}

/// Per-cycle choices for steps 2, 3 and 4. Text form, one line per cycle:
/// `<cycle>: <step2> | <step3> | <step4>` where each field is `*` (all),
/// `-` (none) or comma-separated candidate indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Script {
    pub cycles: BTreeMap<u32, [Option<Choice>; 3]>,
}

impl Script {
    fn set(&mut self, cycle: u32, step: usize, sel: &Selection) {
        self.cycles.entry(cycle).or_default()[step] = Some(Choice::Pick(sel.clone()));
    }

    fn get(&self, cycle: u32, step: usize) -> Option<&Choice> {
        self.cycles.get(&cycle).and_then(|c| c[step].as_ref())
    }
}

impl fmt::Display for Script {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (cycle, steps) in &self.cycles {
            let show = |c: &Option<Choice>| c.as_ref().map_or("-".to_string(), |c| c.to_string());
            writeln!(f, "{cycle}: {} | {} | {}", show(&steps[0]), show(&steps[1]), show(&steps[2]))?;
        }
        Ok(())
    }
}

impl FromStr for Script {
    type Err = ScriptError;
    fn from_str(text: &str) -> Result<Self, ScriptError> {
        let mut script = Script::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: &str| ScriptError::Parse { line: ln + 1, msg: msg.to_string() };
            let (cycle, rest) = line.split_once(':').ok_or_else(|| err("expected `<cycle>: ...`"))?;
            let cycle: u32 = cycle.trim().parse().map_err(|_| err("bad cycle number"))?;
            let fields: Vec<&str> = rest.split('|').map(str::trim).collect();
            if fields.len() != 3 {
                return Err(err("expected three `|`-separated fields"));
            }
            let mut steps: [Option<Choice>; 3] = Default::default();
            for (k, field) in fields.iter().enumerate() {
                steps[k] = Some(match *field {
                    "*" => Choice::All,
                    "-" => Choice::Pick(Vec::new()),
                    s => {
                        let mut v = s
                            .split(',')
                            .map(|x| x.trim().parse::<usize>())
                            .collect::<Result<Vec<_>, _>>()
                            .map_err(|_| err("bad index list"))?;
                        v.sort_unstable();
                        v.dedup();
                        Choice::Pick(v)
                    }
                });
            }
            if script.cycles.insert(cycle, steps).is_some() {
                return Err(err("cycle listed twice"));
            }
        }
        Ok(script)
    }
}

/// Replays a script; cycles it does not list use the deterministic strategy.
#[derive(Clone, Debug)]
pub struct Scripted {
    pub script: Script,
    fallback: Deterministic,
}

impl Scripted {
    pub fn new(script: Script) -> Self {
        Scripted { script, fallback: Deterministic::default() }
    }
}

impl Strategy for Scripted {
    fn step2(&mut self, view: &Step2View<'_>) -> Selection {
        match self.script.get(view.cycle, 0) {
            Some(c) => c.resolve(view.candidates.len()),
            None => self.fallback.step2(view),
        }
    }

    fn step3(&mut self, view: &Step3View<'_>) -> Selection {
        match self.script.get(view.cycle, 1) {
            Some(c) => c.resolve(view.options.len()),
            None => self.fallback.step3(view),
        }
    }

    fn step4(&mut self, view: &Step4View<'_>) -> Selection {
        match self.script.get(view.cycle, 2) {
            Some(c) => c.resolve(view.candidates.len()),
            None => self.fallback.step4(view),
        }
    }
}

/// Wraps a strategy and writes down every choice it makes.
pub struct Recorder<S> {
    pub inner: S,
    pub script: Script,
}

impl<S: Strategy> Recorder<S> {
    pub fn new(inner: S) -> Self {
        Recorder { inner, script: Script::default() }
    }
}

impl<S: Strategy> Strategy for Recorder<S> {
    fn step2(&mut self, view: &Step2View<'_>) -> Selection {
        let s = self.inner.step2(view);
        self.script.set(view.cycle, 0, &s);
        s
    }

    fn step3(&mut self, view: &Step3View<'_>) -> Selection {
        let s = self.inner.step3(view);
        self.script.set(view.cycle, 1, &s);
        s
    }

    fn step4(&mut self, view: &Step4View<'_>) -> Selection {
        let s = self.inner.step4(view);
        self.script.set(view.cycle, 2, &s);
        s
    }
}

/// Strategy named on the command line.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StrategySpec {
    Det,
    DetFirstDisjunct,
    Random(u64),
    Exhaustive,
    Script(PathBuf),
}

impl FromStr for StrategySpec {
    type Err = ScriptError;
    fn from_str(s: &str) -> Result<Self, ScriptError> {
        Ok(match s {
            "det" => StrategySpec::Det,
            "det:first-disjunct" => StrategySpec::DetFirstDisjunct,
            "exhaustive" => StrategySpec::Exhaustive,
            _ => match s.split_once(':') {
                Some(("rand", seed)) => StrategySpec::Random(seed.parse().map_err(|_| ScriptError::Spec(s.into()))?),
                Some(("script", path)) if !path.is_empty() => StrategySpec::Script(path.into()),
                _ => return Err(ScriptError::Spec(s.into())),
            },
        })
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Det => f.write_str("det"),
            StrategySpec::DetFirstDisjunct => f.write_str("det:first-disjunct"),
            StrategySpec::Random(s) => write!(f, "rand:{s}"),
            StrategySpec::Exhaustive => f.write_str("exhaustive"),
            StrategySpec::Script(p) => write!(f, "script:{}", p.display()),
        }
    }
}

impl StrategySpec {
    pub fn build(&self) -> Result<Box<dyn Strategy>, ScriptError> {
        Ok(match self {
            StrategySpec::Det => Box::new(Deterministic::default()),
            StrategySpec::DetFirstDisjunct => Box::new(Deterministic { first_disjunct: true }),
            StrategySpec::Random(seed) => Box::new(RandomStrategy::new(*seed)),
            StrategySpec::Exhaustive => Box::new(Maximal),
            StrategySpec::Script(p) => Box::new(Scripted::new(std::fs::read_to_string(p)?.parse()?)),
        })
    }
}

impl<S: Strategy + ?Sized> Strategy for Box<S> {
    fn step2(&mut self, view: &Step2View<'_>) -> Selection {
        (**self).step2(view)
    }
    fn step3(&mut self, view: &Step3View<'_>) -> Selection {
        (**self).step3(view)
    }
    fn step4(&mut self, view: &Step4View<'_>) -> Selection {
        (**self).step4(view)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_round_trips() {
        let text = "0: * | - | -\n3: 0,2 | 1 | 0\n";
        let s: Script = text.parse().unwrap();
        assert_eq!(s.get(3, 0), Some(&Choice::Pick(vec![0, 2])));
        assert_eq!(s.get(0, 0), Some(&Choice::All));
        assert_eq!(s.to_string(), text);
    }

    #[test]
    fn script_rejects_bad_lines() {
        assert!("1: 0 | 1".parse::<Script>().is_err());
        assert!("x: - | - | -".parse::<Script>().is_err());
        assert!("1: - | - | -\n1: - | - | -".parse::<Script>().is_err());
    }

    #[test]
    fn strategy_specs() {
        assert_eq!("rand:7".parse::<StrategySpec>().unwrap(), StrategySpec::Random(7));
        assert_eq!("det:first-disjunct".parse::<StrategySpec>().unwrap(), StrategySpec::DetFirstDisjunct);
        assert!("rand:x".parse::<StrategySpec>().is_err());
        assert!("greedy".parse::<StrategySpec>().is_err());
    }

    #[test]
    fn maximal_prefers_larger_then_earlier() {
        let c: Vec<GroundAtom> = ["a", "b", "c"].iter().map(|x| GroundAtom::prop(x)).collect();
        // a and b conflict.
        let passes = |s: &BTreeSet<GroundAtom>| !(s.contains(&c[0]) && s.contains(&c[1]));
        let view = Step4View { cycle: 0, candidates: &c, passes: &passes };
        assert_eq!(maximal_passing(&view), vec![0, 2]);
    }
}
