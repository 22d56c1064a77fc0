//! Brute-force reactive interpretations over the full ground action
//! alphabet, and the comparison with the engine's exploration.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::Serialize;

use super::{check_reactive, check_rules, check_trace_preconditions, supports_at, SupportDefinition, VerifyConfig, VerifyError};
use crate::engine::{explore, ExploreConfig};
use crate::model::{RuleVerdict, Timeline, Trace};
use crate::state::{succ, EventSet, MatchMode};
use crate::syntax::{Framework, GroundAtom};

#[derive(Clone, Copy, Debug)]
pub struct OracleConfig {
    pub mode: MatchMode,
    pub support: SupportDefinition,
    /// Upper bound on candidate traces examined.
    pub cap: usize,
    pub workers: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { mode: MatchMode::Subset, support: SupportDefinition::Operational, cap: 5_000_000, workers: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct OracleResult {
    /// Reactive interpretations, ordered by their timestamped actions.
    pub interpretations: Vec<Trace>,
    /// Parallel to `interpretations`: whether no rule is false there.
    pub models: Vec<bool>,
    pub incomplete: bool,
    pub examined: usize,
}

fn subsets(alphabet: &[GroundAtom]) -> impl Iterator<Item = BTreeSet<GroundAtom>> + '_ {
    (0u64..1 << alphabet.len()).map(move |m| (0..alphabet.len()).filter(|b| m & (1 << b) != 0).map(|b| alphabet[b].clone()).collect())
}

fn extend(fw: &Framework, prefix: &Trace, ext: &Timeline, acts: BTreeSet<GroundAtom>, mode: MatchMode) -> Trace {
    let t = prefix.horizon() + 1;
    let ev = EventSet { ext: ext.get(&t).cloned().unwrap_or_default(), acts };
    let next = succ(prefix.states.last().expect("nonempty"), &ev.all(), &fw.causal, mode);
    let mut out = prefix.clone();
    out.states.push(next);
    out.events.push(ev);
    out
}

fn finish(fw: &Framework, traces: Vec<Trace>, vcfg: &VerifyConfig, incomplete: bool, examined: usize) -> Result<OracleResult, VerifyError> {
    let mut traces = traces;
    traces.sort_by_key(|t| t.acts_star());
    let models = traces
        .iter()
        .map(|t| Ok(check_rules(fw, t, vcfg)?.iter().all(|r| !matches!(r.verdict, RuleVerdict::False(_)))))
        .collect::<Result<_, VerifyError>>()?;
    Ok(OracleResult { interpretations: traces, models, incomplete, examined })
}

/// Every reactive interpretation with the given external events up to the
/// horizon. Action subsets are chosen time by time over the whole ground
/// alphabet; a prefix is abandoned as soon as one of its actions lacks
/// support or a precondition fails, since both only look backwards. Each
/// surviving trace is re-checked as a whole.
pub fn enumerate_reactive_oracle(fw: &Framework, ext: &Timeline, horizon: u32, cfg: &OracleConfig) -> Result<OracleResult, VerifyError> {
    let alphabet = fw.action_alphabet();
    let vcfg = VerifyConfig { mode: cfg.mode, support: cfg.support, horizon: Some(horizon) };
    if alphabet.len() > 20 {
        return finish(fw, Vec::new(), &vcfg, true, 0);
    }
    let root = Trace::build(fw, ext, &Timeline::new(), 0, cfg.mode);
    let mut frontier = vec![root];
    let mut examined = 0usize;
    let mut incomplete = false;
    for _ in 1..=horizon {
        let cands: Vec<Trace> = frontier.iter().flat_map(|p| subsets(&alphabet).map(move |a| (p, a))).map(|(p, a)| extend(fw, p, ext, a, cfg.mode)).collect();
        examined += cands.len();
        if examined > cfg.cap {
            incomplete = true;
            frontier.clear();
            break;
        }
        let keep = |tr: &Trace| -> Result<bool, VerifyError> {
            let t = tr.horizon();
            let pre = crate::state::check_preconditions(fw, &tr.frame(t - 1), &tr.events[t as usize])?;
            if !pre.is_empty() {
                return Ok(false);
            }
            Ok(supports_at(fw, tr, t, &vcfg)?.iter().all(|s| s.witness.is_some()))
        };
        let flags: Vec<bool> = if cfg.workers > 1 {
            cands.par_iter().map(keep).collect::<Result<_, _>>()?
        } else {
            cands.iter().map(keep).collect::<Result<_, _>>()?
        };
        frontier = cands.into_iter().zip(flags).filter(|(_, k)| *k).map(|(t, _)| t).collect();
    }
    for tr in &frontier {
        let rep = check_reactive(fw, tr, &vcfg)?;
        assert!(rep.reactive_interpretation, "incremental and whole-trace checks disagree");
    }
    finish(fw, frontier, &vcfg, incomplete, examined)
}

/// The same set by plain enumeration of all action assignments, with no
/// pruning. Only for very small instances; used to cross-check the oracle.
pub fn enumerate_reactive_naive(fw: &Framework, ext: &Timeline, horizon: u32, cfg: &OracleConfig) -> Result<OracleResult, VerifyError> {
    let alphabet = fw.action_alphabet();
    let vcfg = VerifyConfig { mode: cfg.mode, support: cfg.support, horizon: Some(horizon) };
    let bits = alphabet.len() * horizon as usize;
    if bits > 24 || (1usize << bits) > cfg.cap {
        return finish(fw, Vec::new(), &vcfg, true, 0);
    }
    let mut out = Vec::new();
    for m in 0u64..1 << bits {
        let mut acts = Timeline::new();
        for t in 0..horizon as usize {
            let set: BTreeSet<GroundAtom> = (0..alphabet.len())
                .filter(|b| m & (1 << (t * alphabet.len() + b)) != 0)
                .map(|b| alphabet[b].clone())
                .collect();
            if !set.is_empty() {
                acts.insert(t as u32 + 1, set);
            }
        }
        let tr = Trace::build(fw, ext, &acts, horizon, cfg.mode);
        if check_trace_preconditions(fw, &tr)?.is_empty() && check_reactive(fw, &tr, &vcfg)?.reactive_interpretation {
            out.push(tr);
        }
    }
    finish(fw, out, &vcfg, false, 1 << bits)
}

type ActsStar = BTreeSet<(u32, GroundAtom)>;

fn show(a: &ActsStar) -> Vec<String> {
    a.iter().map(|(t, g)| format!("{g}@{t}")).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TheoremReport {
    pub explored: usize,
    pub oracle: usize,
    pub explore_incomplete: bool,
    pub oracle_incomplete: bool,
    /// Every explored trace is a reactive interpretation.
    pub generated_are_reactive: bool,
    /// Every reactive interpretation was explored.
    pub reactive_are_generated: bool,
    /// Explored but not reactive.
    pub not_reactive: Vec<Vec<String>>,
    /// Reactive but never explored.
    pub not_generated: Vec<Vec<String>>,
}

/// Compares the engine's reachable traces with the oracle's, by timestamped actions.
pub fn check_theorems(
    fw: &Framework,
    ext: &Timeline,
    horizon: u32,
    ecfg: &ExploreConfig,
    ocfg: &OracleConfig,
) -> Result<TheoremReport, VerifyError> {
    let ex = explore(fw, ext, ecfg)?;
    let or = enumerate_reactive_oracle(fw, ext, horizon, ocfg)?;
    let a: BTreeSet<ActsStar> = ex.traces.iter().map(Trace::acts_star).collect();
    let b: BTreeSet<ActsStar> = or.interpretations.iter().map(Trace::acts_star).collect();
    let not_reactive: Vec<Vec<String>> = a.difference(&b).map(show).collect();
    let not_generated: Vec<Vec<String>> = b.difference(&a).map(show).collect();
    Ok(TheoremReport {
        explored: a.len(),
        oracle: b.len(),
        explore_incomplete: ex.incomplete,
        oracle_incomplete: or.incomplete,
        generated_are_reactive: not_reactive.is_empty(),
        reactive_are_generated: not_generated.is_empty(),
        not_reactive,
        not_generated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::parse_events;
    use crate::syntax::parse_framework;

    fn load(src: &str) -> Framework {
        parse_framework(src).unwrap()
    }

    fn acts(r: &OracleResult) -> Vec<Vec<String>> {
        r.interpretations.iter().map(|t| show(&t.acts_star())).collect()
    }

    #[test]
    fn fig1_oracle() {
        let fw = load("events { see-wolf } actions { cry-wolf } rules { see-wolf(T) -> cry-wolf(T + 1) }");
        let ext = parse_events("3: see-wolf", &fw).unwrap();
        let r = enumerate_reactive_oracle(&fw, &ext, 5, &OracleConfig::default()).unwrap();
        assert_eq!(acts(&r), vec![Vec::<String>::new(), vec!["cry-wolf@4".to_string()]]);
        assert_eq!(r.models, vec![false, true]);
        let n = enumerate_reactive_naive(&fw, &ext, 5, &OracleConfig::default()).unwrap();
        assert_eq!(acts(&n), acts(&r));
    }

    #[test]
    fn fig2_oracle_never_goes_inside() {
        let fw = load(include_str!("../../fixtures/fig2.kelps"));
        let ext = parse_events("3: see-wolf", &fw).unwrap();
        let r = enumerate_reactive_oracle(&fw, &ext, 5, &OracleConfig::default()).unwrap();
        assert_eq!(r.interpretations.len(), 2);
        assert!(r.interpretations.iter().all(|t| t.acts_star().iter().all(|(_, a)| a.pred.as_ref() != "go-inside")));
    }

    #[test]
    fn empty_rules_keep_only_ext() {
        let fw = load(include_str!("../../fixtures/empty.kelps"));
        let r = enumerate_reactive_oracle(&fw, &Timeline::new(), 3, &OracleConfig::default()).unwrap();
        assert_eq!(r.interpretations.len(), 1);
        assert_eq!(r.models, vec![true]);
    }

    #[test]
    fn theorems_on_figures() {
        for (src, ev) in [(include_str!("../../fixtures/fig1.kelps"), "3: see-wolf"), (include_str!("../../fixtures/fig2.kelps"), "3: see-wolf")] {
            let fw = load(src);
            let ext = parse_events(ev, &fw).unwrap();
            let rep = check_theorems(&fw, &ext, 5, &ExploreConfig::new(5), &OracleConfig::default()).unwrap();
            assert!(rep.generated_are_reactive && rep.reactive_are_generated, "{rep:?}");
            assert_eq!(rep.explored, 2);
        }
    }

    #[test]
    fn literal_support_admits_more_than_the_cycle() {
        let fw = load("actions { f, a } rules { true -> f(T2) & a(T3) & T2 < T3 }");
        let lit = OracleConfig { support: SupportDefinition::Literal, ..Default::default() };
        let rep = check_theorems(&fw, &Timeline::new(), 2, &ExploreConfig::new(2), &lit).unwrap();
        assert!(rep.generated_are_reactive);
        assert!(!rep.reactive_are_generated);
        assert!(rep.not_generated.contains(&vec!["a@1".to_string()]));
        let op = check_theorems(&fw, &Timeline::new(), 2, &ExploreConfig::new(2), &OracleConfig::default()).unwrap();
        assert!(op.reactive_are_generated && op.generated_are_reactive, "{op:?}");
    }
}
