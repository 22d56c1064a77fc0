//! The temporal constraint solver on its own: satisfiability, the least
//! witness, all solutions, and sequencing of two complexes.
//!
//!     cargo run --example temporal_constraints

use kelps::syntax::{parse_framework, TimeExpr};
use kelps::temporal::{admits_sequencing, all_solutions, satisfiable, solve, Constraint, TimeBinding};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (t1, t2) = (TimeExpr::var("T1"), TimeExpr::var("T2"));
    let window = vec![Constraint::Lt(t1.clone(), t2.clone()), Constraint::Le(t2, TimeExpr::plus("T1", 3))];
    let at3: TimeBinding = [("T1".into(), 3)].into_iter().collect();
    println!("T1 < T2 <= T1 + 3 with T1 = 3, horizon 10");
    println!("  satisfiable: {}", satisfiable(&window, &at3, 10));
    println!("  least: {:?}", solve(&window, &at3, 10));
    println!("  all T2: {:?}", all_solutions(&window, &at3, 10).iter().map(|b| b["T2"]).collect::<Vec<_>>());
    println!("  horizon 4: {:?}", all_solutions(&window, &at3, 4));

    let max = [Constraint::Max(TimeExpr::constant(2), t1, TimeExpr::var("M")), Constraint::Le(TimeExpr::var("M"), TimeExpr::constant(4))];
    println!("max(2, T1, M) and M <= 4: {} solutions", all_solutions(&max, &TimeBinding::new(), 6).len());

    // Can the order be observed before both actions, in this order?
    let fw = parse_framework(
        "events { o } actions { a, b }
         rules { o(T1) -> a(T2) & b(T3) & T1 < T2 <= T3 <= T1 + 3 }",
    )?;
    let rule = &fw.rules[0];
    let at1: TimeBinding = [("T1".into(), 1)].into_iter().collect();
    let d = &rule.consequents[0];
    println!("antecedent at 1 < consequent: {:?}", admits_sequencing(&rule.antecedent, d, true, &at1, 6));
    println!("same, horizon 1: {:?}", admits_sequencing(&rule.antecedent, d, true, &at1, 1));
    Ok(())
}
