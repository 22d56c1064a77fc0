//! Every trace the cycle can produce: all step-2 evaluations and step-3
//! options are taken (they only widen later choices), and every
//! precondition-respecting subset of the resulting candidates is a branch.

use std::collections::{BTreeSet, HashMap};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use super::{Engine, EngineConfig, EngineState, Residual};
use crate::model::{Binding, EvalError, Timeline, Trace};
use crate::state::{EventSet, State};
use crate::syntax::{Framework, GroundAtom};

#[derive(Clone, Copy, Debug)]
pub struct ExploreConfig {
    pub engine: EngineConfig,
    /// Upper bound on expanded choice points before giving up.
    pub cap: usize,
    /// Worker threads; 1 explores sequentially.
    pub workers: usize,
}

impl ExploreConfig {
    pub fn new(horizon: u32) -> Self {
        ExploreConfig {
            engine: EngineConfig { prune: false, ..EngineConfig::new(horizon) },
            cap: 1_000_000,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExploreResult {
    /// Distinct traces, ordered by their timestamped actions.
    pub traces: Vec<Trace>,
    /// The cap was hit; `traces` is a subset of the reachable set.
    pub incomplete: bool,
    /// Branches that stopped because external events alone broke a precondition.
    pub halted: usize,
    pub nodes: usize,
}

type Suffix = Vec<(u32, BTreeSet<GroundAtom>)>;
type Suffixes = Arc<BTreeSet<Suffix>>;

/// Future behaviour depends only on this, not on clause identities.
type Key = (u32, State, EventSet, BTreeSet<Residual>, BTreeSet<(usize, usize, Binding, Vec<usize>, Vec<usize>)>);

fn key(es: &EngineState) -> Key {
    let clauses = es
        .clauses
        .values()
        .filter(|c| !c.is_true())
        .map(|c| (es.trees[&c.tree].rule, c.disjunct, c.binding.clone(), c.conds.clone(), c.cons.clone()))
        .collect();
    (es.time, es.state.clone(), es.last.clone(), es.residuals.clone(), clauses)
}

struct Search<'a> {
    engine: Engine<'a>,
    ext: &'a Timeline,
    cap: usize,
    parallel: bool,
    nodes: AtomicUsize,
    halted: AtomicUsize,
    incomplete: AtomicBool,
    memo: Mutex<HashMap<Key, Suffixes>>,
}

impl Search<'_> {
    fn visit(&self, mut es: EngineState) -> Result<Suffixes, EvalError> {
        if es.time >= self.engine.cfg.horizon {
            return Ok(Arc::new(BTreeSet::from([Vec::new()])));
        }
        let k = key(&es);
        if let Some(hit) = self.memo.lock().expect("memo lock").get(&k) {
            return Ok(hit.clone());
        }
        if self.nodes.fetch_add(1, Ordering::Relaxed) >= self.cap {
            self.incomplete.store(true, Ordering::Relaxed);
            return Ok(Arc::new(BTreeSet::new()));
        }
        let e = &self.engine;
        e.step1(&mut es)?;
        let evals = e.step2_candidates(&es)?;
        e.step2_apply(&mut es, &evals);
        let cands: Vec<GroundAtom> =
            e.step3_options(&es).into_iter().flat_map(|o| o.actions).collect::<BTreeSet<_>>().into_iter().collect();
        let next_t = es.time + 1;
        let ext_next = self.ext.get(&next_t).cloned().unwrap_or_default();
        if !e.passes(&es, &ext_next, &BTreeSet::new())?.is_empty() {
            self.halted.fetch_add(1, Ordering::Relaxed);
            return Ok(Arc::new(BTreeSet::new()));
        }
        if cands.len() > 20 {
            self.incomplete.store(true, Ordering::Relaxed);
            return Ok(Arc::new(BTreeSet::new()));
        }
        let mut subsets = Vec::new();
        for mask in 0u32..(1 << cands.len()) {
            let acts: BTreeSet<GroundAtom> =
                (0..cands.len()).filter(|b| mask & (1 << b) != 0).map(|b| cands[b].clone()).collect();
            if e.passes(&es, &ext_next, &acts)?.is_empty() {
                subsets.push(acts);
            }
        }
        let branch = |acts: BTreeSet<GroundAtom>| -> Result<Vec<Suffix>, EvalError> {
            let mut child = es.clone();
            e.step4_commit(&mut child, ext_next.clone(), acts.clone());
            let rest = self.visit(child)?;
            Ok(rest
                .iter()
                .map(|s| {
                    let mut v = Vec::with_capacity(s.len() + 1);
                    if !acts.is_empty() {
                        v.push((next_t, acts.clone()));
                    }
                    v.extend(s.iter().cloned());
                    v
                })
                .collect())
        };
        let parts: Vec<Vec<Suffix>> = if self.parallel {
            subsets.into_par_iter().map(branch).collect::<Result<_, _>>()?
        } else {
            subsets.into_iter().map(branch).collect::<Result<_, _>>()?
        };
        let out: Suffixes = Arc::new(parts.into_iter().flatten().collect());
        self.memo.lock().expect("memo lock").insert(k, out.clone());
        Ok(out)
    }
}

/// Enumerates all traces reachable under every choice in steps 2, 3 and 4,
/// deduplicated by their timestamped actions.
pub fn explore(fw: &Framework, ext: &Timeline, cfg: &ExploreConfig) -> Result<ExploreResult, EvalError> {
    let search = Search {
        engine: Engine::new(fw, cfg.engine),
        ext,
        cap: cfg.cap,
        parallel: cfg.workers > 1,
        nodes: AtomicUsize::new(0),
        halted: AtomicUsize::new(0),
        incomplete: AtomicBool::new(false),
        memo: Mutex::new(HashMap::new()),
    };
    let start = search.engine.init();
    let suffixes = if cfg.workers > 1 {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().expect("thread pool");
        pool.install(|| search.visit(start))?
    } else {
        search.visit(start)?
    };
    let horizon = cfg.engine.horizon;
    let traces = suffixes
        .iter()
        .map(|s| {
            let acts: Timeline = s.iter().cloned().collect();
            Trace::build(fw, ext, &acts, horizon, cfg.engine.mode)
        })
        .collect();
    Ok(ExploreResult {
        traces,
        incomplete: search.incomplete.load(Ordering::Relaxed),
        halted: search.halted.load(Ordering::Relaxed),
        nodes: search.nodes.load(Ordering::Relaxed),
    })
}
