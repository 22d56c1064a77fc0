//! Pretty-printer producing text that parses back to an identical framework.

use std::fmt::{self, Display, Formatter};

use super::{Atom, CmpOp, Complex, FolCondition, Formula, Framework, PostEntry, PreConstraint, PredKind, ReactiveRule};

fn comma_list<T: Display>(f: &mut Formatter<'_>, items: impl IntoIterator<Item = T>, sep: &str) -> fmt::Result {
    for (i, it) in items.into_iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{it}")?;
    }
    Ok(())
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        let n = self.args.len() + usize::from(self.stamp.is_some());
        if n > 0 {
            f.write_str("(")?;
            comma_list(f, &self.args, ", ")?;
            if let Some(s) = &self.stamp {
                if !self.args.is_empty() {
                    f.write_str(", ")?;
                }
                write!(f, "{s}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

impl Display for Formula {
    /// Compound formulas are always parenthesized so the output is a
    /// single item wherever it lands.
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Cmp(op, l, r) => write!(f, "{l} {} {r}", if *op == CmpOp::Eq { "=" } else { "!=" }),
            Formula::Not(g) => write!(f, "~{g}"),
            Formula::And(gs) => {
                f.write_str("(")?;
                comma_list(f, gs, " & ")?;
                f.write_str(")")
            }
            Formula::Or(gs) => {
                f.write_str("(")?;
                comma_list(f, gs, " | ")?;
                f.write_str(")")
            }
            Formula::Implies(a, b) => write!(f, "({a} => {b})"),
            Formula::Forall(v, s, g) => write!(f, "(forall {v}:{s} . {g})"),
            Formula::Exists(v, s, g) => write!(f, "(exists {v}:{s} . {g})"),
        }
    }
}

impl Display for FolCondition {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.formula)
    }
}

impl Display for Complex {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("true");
        }
        let items = self
            .conditions
            .iter()
            .map(|c| c.to_string())
            .chain(self.constraints.iter().map(|k| k.to_string()));
        comma_list(f, items, " & ")
    }
}

impl Display for ReactiveRule {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> ", self.antecedent)?;
        comma_list(f, &self.consequents, " | ")
    }
}

impl Display for PostEntry {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        comma_list(f, &self.events, ", ")?;
        write!(f, "}} ~> {}", self.fluent)
    }
}

impl Display for PreConstraint {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        comma_list(f, &self.body, " & ")?;
        f.write_str(" -> false")
    }
}

fn section<T: Display>(f: &mut Formatter<'_>, title: &str, items: impl IntoIterator<Item = T>) -> fmt::Result {
    writeln!(f, "{title} {{")?;
    for it in items {
        writeln!(f, "    {it},")?;
    }
    writeln!(f, "}}")
}

impl Display for Framework {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        section(
            f,
            "sorts",
            self.sorts.iter().map(|(s, cs)| format!("{s}: {{{}}}", cs.iter().map(|c| &**c).collect::<Vec<_>>().join(", "))),
        )?;
        for (title, kind) in [
            ("fluents", PredKind::Fluent),
            ("events", PredKind::External),
            ("actions", PredKind::Action),
            ("aux", PredKind::Aux),
        ] {
            let decls = self.preds_of_kind(kind).map(|d| {
                if d.args.is_empty() {
                    d.name.to_string()
                } else {
                    format!("{}({})", d.name, d.args.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", "))
                }
            });
            section(f, title, decls)?;
        }
        section(f, "initial", &self.initial)?;
        section(f, "aux-facts", &self.aux)?;
        section(f, "initiates", &self.causal.initiates)?;
        section(f, "terminates", &self.causal.terminates)?;
        section(f, "preconditions", &self.causal.pre)?;
        section(f, "rules", &self.rules)
    }
}
