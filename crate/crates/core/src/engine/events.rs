//! External-event files: `<time>: atom[, atom]*`, times strictly increasing.

use thiserror::Error;

use crate::model::Timeline;
use crate::syntax::{parse_ground_atom, Framework, PredKind};

#[derive(Debug, Error)]
pub enum EventFileError {
    #[error("event file line {line}: {msg}")]
    Line { line: usize, msg: String },
}

fn split_atoms(s: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start) = (0i32, 0usize);
    for (i, ch) in s.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(s[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(s[start..].trim());
    out.into_iter().filter(|a| !a.is_empty()).collect()
}

/// Parses an external-event file against the framework's declarations.
/// Only external-event predicates are accepted; time 0 is rejected since
/// the first event set is ev_1.
pub fn parse_events(text: &str, fw: &Framework) -> Result<Timeline, EventFileError> {
    let mut out = Timeline::new();
    let mut last: Option<u32> = None;
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: String| EventFileError::Line { line: ln + 1, msg };
        let (t, rest) = line.split_once(':').ok_or_else(|| err("expected `<time>: <atoms>`".into()))?;
        let t: u32 = t.trim().parse().map_err(|_| err(format!("bad time `{}`", t.trim())))?;
        if t == 0 {
            return Err(err("events start at time 1".into()));
        }
        if last.is_some_and(|l| t <= l) {
            return Err(err(format!("time {t} is not after time {}", last.unwrap_or(0))));
        }
        last = Some(t);
        let set = out.entry(t).or_default();
        for a in split_atoms(rest) {
            let g = parse_ground_atom(a, fw).map_err(|e| err(e.to_string()))?;
            if fw.kind(&g.pred) != Some(PredKind::External) {
                return Err(err(format!("`{g}` is not an external event")));
            }
            set.insert(g);
        }
    }
    Ok(out)
}
