//! The destructive current state: successor function and precondition checks.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::model::{eval_condition, Binding, EvalCtx, EvalError, Frame};
use crate::syntax::{CausalTheory, Framework, GroundAtom, PostEntry, Value};

/// Unstamped ground fluents.
pub type State = BTreeSet<GroundAtom>;

/// Concurrent events at one time, split by origin.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct EventSet {
    pub ext: BTreeSet<GroundAtom>,
    pub acts: BTreeSet<GroundAtom>,
}

impl EventSet {
    pub fn all(&self) -> BTreeSet<GroundAtom> {
        self.ext.union(&self.acts).cloned().collect()
    }

    pub fn is_empty(&self) -> bool {
        self.ext.is_empty() && self.acts.is_empty()
    }
}

/// How a post entry's event-set key is matched against concurrent events.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// The key must be contained in the events.
    #[default]
    Subset,
    /// The key must equal the events.
    Exact,
}

impl FromStr for MatchMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "subset" => Ok(MatchMode::Subset),
            "exact" => Ok(MatchMode::Exact),
            _ => Err(format!("unknown match mode `{s}` (expected subset or exact)")),
        }
    }
}

impl fmt::Display for MatchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MatchMode::Subset => "subset",
            MatchMode::Exact => "exact",
        })
    }
}

fn fires(e: &PostEntry, ev: &BTreeSet<GroundAtom>, mode: MatchMode) -> bool {
    match mode {
        MatchMode::Subset => e.events.is_subset(ev),
        MatchMode::Exact => e.events == *ev,
    }
}

/// Fluents initiated by `ev`.
pub fn initiated(ev: &BTreeSet<GroundAtom>, causal: &CausalTheory, mode: MatchMode) -> BTreeSet<GroundAtom> {
    causal.initiates.iter().filter(|e| fires(e, ev, mode)).map(|e| e.fluent.clone()).collect()
}

/// Fluents terminated by `ev`.
pub fn terminated(ev: &BTreeSet<GroundAtom>, causal: &CausalTheory, mode: MatchMode) -> BTreeSet<GroundAtom> {
    causal.terminates.iter().filter(|e| fires(e, ev, mode)).map(|e| e.fluent.clone()).collect()
}

/// `(s - terminated) | initiated`.
pub fn succ(s: &State, ev: &BTreeSet<GroundAtom>, causal: &CausalTheory, mode: MatchMode) -> State {
    let gone = terminated(ev, causal, mode);
    let mut next: State = s.difference(&gone).cloned().collect();
    next.extend(initiated(ev, causal, mode));
    next
}

/// A precondition sentence whose body became true.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PreViolation {
    /// Index into the framework's precondition list.
    pub index: usize,
    pub sentence: String,
    /// Variable bindings of the first instance found.
    pub binding: Vec<(String, String)>,
}

/// Indices of the precondition sentences violated by moving from `prev`
/// (the frame at time i) to the events `next` at time i+1.
pub fn check_preconditions(fw: &Framework, prev: &Frame<'_>, next: &EventSet) -> Result<Vec<PreViolation>, EvalError> {
    let t_next = prev.time + 1;
    let empty = BTreeSet::new();
    let next_frame = Frame { time: t_next, state: &empty, ext: &next.ext, acts: &next.acts, aux: prev.aux };
    let ctx = EvalCtx::new(fw, t_next);
    let mut out = Vec::new();
    for (index, pre) in fw.causal.pre.iter().enumerate() {
        let Some((var, now)) = pre.now_offset() else { continue };
        let mut start = Binding::new();
        match var {
            Some(v) => {
                let t = t_next as i64 - now;
                if t < 0 {
                    continue;
                }
                start.insert(v, Value::Time(t as u32));
            }
            None if now != t_next as i64 => continue,
            None => {}
        }
        let mut bindings = vec![start];
        for c in pre.events_part() {
            bindings = eval_all(&ctx, c, &next_frame, bindings)?;
        }
        for c in pre.current_part() {
            bindings = eval_all(&ctx, c, prev, bindings)?;
        }
        if let Some(b) = bindings.first() {
            out.push(PreViolation {
                index,
                sentence: pre.to_string(),
                binding: b.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            });
        }
    }
    Ok(out)
}

fn eval_all(
    ctx: &EvalCtx<'_>,
    c: &crate::syntax::FolCondition,
    frame: &Frame<'_>,
    bindings: Vec<Binding>,
) -> Result<Vec<Binding>, EvalError> {
    let mut out = Vec::new();
    for b in bindings {
        out.extend(eval_condition(ctx, c, frame, &b)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_framework;

    fn fig2() -> Framework {
        parse_framework(
            "fluents { outdoors } events { see-wolf, go-outside } actions { cry-wolf, go-inside }
             initial { outdoors }
             initiates { go-outside ~> outdoors } terminates { go-inside ~> outdoors }",
        )
        .unwrap()
    }

    fn set(xs: &[&str]) -> BTreeSet<GroundAtom> {
        xs.iter().map(|x| GroundAtom::prop(x)).collect()
    }

    #[test]
    fn going_inside_removes_outdoors() {
        let fw = fig2();
        assert!(succ(&set(&["outdoors"]), &set(&["go-inside"]), &fw.causal, MatchMode::Subset).is_empty());
    }

    #[test]
    fn unrelated_event_persists_state() {
        let fw = fig2();
        assert_eq!(succ(&set(&["outdoors"]), &set(&["see-wolf"]), &fw.causal, MatchMode::Subset), set(&["outdoors"]));
    }

    #[test]
    fn going_outside_adds_outdoors() {
        let fw = fig2();
        assert_eq!(succ(&set(&[]), &set(&["go-outside"]), &fw.causal, MatchMode::Subset), set(&["outdoors"]));
    }

    #[test]
    fn exact_mode_needs_the_whole_set() {
        let fw = fig2();
        let ev = set(&["go-inside", "see-wolf"]);
        assert!(succ(&set(&["outdoors"]), &ev, &fw.causal, MatchMode::Subset).is_empty());
        assert_eq!(succ(&set(&["outdoors"]), &ev, &fw.causal, MatchMode::Exact), set(&["outdoors"]));
    }

    #[test]
    fn initiate_wins_over_terminate() {
        let fw = parse_framework("fluents { f } actions { a } initiates { a ~> f } terminates { a ~> f }").unwrap();
        assert_eq!(succ(&set(&["f"]), &set(&["a"]), &fw.causal, MatchMode::Subset), set(&["f"]));
    }

    fn pre_check(fw: &Framework, acts: &[GroundAtom]) -> Vec<PreViolation> {
        let (s, e) = (State::new(), BTreeSet::new());
        let prev = Frame { time: 0, state: &s, ext: &e, acts: &e, aux: &fw.aux };
        let next = EventSet { ext: BTreeSet::new(), acts: acts.iter().cloned().collect() };
        check_preconditions(fw, &prev, &next).unwrap()
    }

    #[test]
    fn two_dispatches_of_one_item() {
        let fw = parse_framework(
            "sorts { customer: {c1, c2}, item: {book} } actions { dispatch(customer, item) }
             preconditions { dispatch(C1, I, T) & dispatch(C2, I, T) & C1 != C2 -> false }",
        )
        .unwrap();
        let both = [GroundAtom::new("dispatch", &["c1", "book"]), GroundAtom::new("dispatch", &["c2", "book"])];
        assert_eq!(pre_check(&fw, &both).len(), 1);
        assert!(pre_check(&fw, &both[..1]).is_empty());
    }

    #[test]
    fn leaving_without_keys() {
        let fw = parse_framework("actions { leave-house, take-keys } preconditions { leave-house(T) & ~take-keys(T) -> false }").unwrap();
        assert_eq!(pre_check(&fw, &[GroundAtom::prop("leave-house")]).len(), 1);
        assert!(pre_check(&fw, &[GroundAtom::prop("leave-house"), GroundAtom::prop("take-keys")]).is_empty());
        assert!(pre_check(&fw, &[]).is_empty());
    }
}
