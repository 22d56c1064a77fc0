//! Timestamped Herbrand interpretations of finite runs, and their JSON Lines form.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Frame;
use crate::state::{succ, EventSet, MatchMode, State};
use crate::syntax::{parse_ground_atom, Framework, GroundAtom, LoadError, PredKind};

/// Events keyed by time; missing times have no events.
pub type Timeline = BTreeMap<u32, BTreeSet<GroundAtom>>;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("line {line}: {msg}")]
    Json { line: usize, msg: String },
    #[error("line {line}: bad atom `{atom}`: {source}")]
    Atom { line: usize, atom: String, source: LoadError },
    #[error("line {line}: expected t = {expected}, found {found}")]
    Order { line: usize, expected: u32, found: u32 },
    #[error("time {t}: `{atom}` is not a {what}")]
    Kind { t: u32, atom: String, what: &'static str },
    #[error("time {t}: state is not the successor of time {prev} under the causal theory")]
    Successor { t: u32, prev: u32 },
    #[error("trace is empty")]
    Empty,
}

/// `Aux + S_0* .. S_n* + ev_1* .. ev_n*` for a finite horizon n.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub aux: BTreeSet<GroundAtom>,
    /// `states[i]` is S_i, for i in 0..=n.
    pub states: Vec<State>,
    /// `events[i]` is ev_i; `events[0]` is always empty.
    pub events: Vec<EventSet>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    t: u32,
    state: Vec<String>,
    ext: Vec<String>,
    acts: Vec<String>,
}

impl Trace {
    /// Rebuilds states from S_0 by `succ`, given events at times 1..=horizon.
    pub fn build(fw: &Framework, ext: &Timeline, acts: &Timeline, horizon: u32, mode: MatchMode) -> Trace {
        let mut states = vec![fw.initial.clone()];
        let mut events = vec![EventSet::default()];
        for t in 1..=horizon {
            let ev = EventSet {
                ext: ext.get(&t).cloned().unwrap_or_default(),
                acts: acts.get(&t).cloned().unwrap_or_default(),
            };
            let next = succ(states.last().unwrap(), &ev.all(), &fw.causal, mode);
            states.push(next);
            events.push(ev);
        }
        Trace { aux: fw.aux.clone(), states, events }
    }

    pub fn horizon(&self) -> u32 {
        (self.states.len() - 1) as u32
    }

    pub fn frame(&self, i: u32) -> Frame<'_> {
        let ev = &self.events[i as usize];
        Frame { time: i, state: &self.states[i as usize], ext: &ev.ext, acts: &ev.acts, aux: &self.aux }
    }

    /// The sub-interpretation for times 0..=i.
    pub fn prefix(&self, i: u32) -> Trace {
        let n = (i as usize + 1).min(self.states.len());
        Trace { aux: self.aux.clone(), states: self.states[..n].to_vec(), events: self.events[..n].to_vec() }
    }

    /// Timestamped actions; the identity of a trace given fixed external events.
    pub fn acts_star(&self) -> BTreeSet<(u32, GroundAtom)> {
        self.events
            .iter()
            .enumerate()
            .flat_map(|(t, e)| e.acts.iter().map(move |a| (t as u32, a.clone())))
            .collect()
    }

    pub fn ext_timeline(&self) -> Timeline {
        self.events.iter().enumerate().filter(|(_, e)| !e.ext.is_empty()).map(|(t, e)| (t as u32, e.ext.clone())).collect()
    }

    pub fn acts_timeline(&self) -> Timeline {
        self.events.iter().enumerate().filter(|(_, e)| !e.acts.is_empty()).map(|(t, e)| (t as u32, e.acts.clone())).collect()
    }

    /// Checks atom kinds and that each state is the successor of the previous one.
    pub fn check_consistent(&self, fw: &Framework, mode: MatchMode) -> Result<(), TraceError> {
        for (t, (s, e)) in self.states.iter().zip(&self.events).enumerate() {
            let t = t as u32;
            let kind_err = |a: &GroundAtom, what| TraceError::Kind { t, atom: a.to_string(), what };
            if let Some(a) = s.iter().find(|a| fw.kind(&a.pred) != Some(PredKind::Fluent)) {
                return Err(kind_err(a, "fluent"));
            }
            if let Some(a) = e.ext.iter().find(|a| !fw.kind(&a.pred).is_some_and(|k| k.is_event())) {
                return Err(kind_err(a, "event"));
            }
            if let Some(a) = e.acts.iter().find(|a| fw.kind(&a.pred) != Some(PredKind::Action)) {
                return Err(kind_err(a, "action"));
            }
        }
        if !self.events[0].is_empty() {
            return Err(TraceError::Kind { t: 0, atom: "events".into(), what: "empty event set at time 0" });
        }
        if self.states[0] != fw.initial {
            return Err(TraceError::Successor { t: 0, prev: 0 });
        }
        for t in 1..self.states.len() {
            let expect = succ(&self.states[t - 1], &self.events[t].all(), &fw.causal, mode);
            if expect != self.states[t] {
                return Err(TraceError::Successor { t: t as u32, prev: t as u32 - 1 });
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let strs = |s: &BTreeSet<GroundAtom>| s.iter().map(|a| a.to_string()).collect::<Vec<_>>();
        let mut out = String::new();
        for (t, (s, e)) in self.states.iter().zip(&self.events).enumerate() {
            let r = Record { t: t as u32, state: strs(s), ext: strs(&e.ext), acts: strs(&e.acts) };
            out.push_str(&serde_json::to_string(&r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    /// Reads a trace written by [`Trace::to_jsonl`]. Aux comes from the framework.
    pub fn from_jsonl(text: &str, fw: &Framework) -> Result<Trace, TraceError> {
        let mut states = Vec::new();
        let mut events = Vec::new();
        for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line_no = k + 1;
            let r: Record = serde_json::from_str(line).map_err(|e| TraceError::Json { line: line_no, msg: e.to_string() })?;
            if r.t as usize != states.len() {
                return Err(TraceError::Order { line: line_no, expected: states.len() as u32, found: r.t });
            }
            let atoms = |xs: &[String]| -> Result<BTreeSet<GroundAtom>, TraceError> {
                xs.iter()
                    .map(|x| parse_ground_atom(x, fw).map_err(|source| TraceError::Atom { line: line_no, atom: x.clone(), source }))
                    .collect()
            };
            states.push(atoms(&r.state)?);
            events.push(EventSet { ext: atoms(&r.ext)?, acts: atoms(&r.acts)? });
        }
        if states.is_empty() {
            return Err(TraceError::Empty);
        }
        Ok(Trace { aux: fw.aux.clone(), states, events })
    }
}
