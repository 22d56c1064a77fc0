//! Orders, dispatch and invoicing. Shows goal trees, a disjunctive
//! consequent, and a precondition that stops two customers receiving the
//! same item at once.
//!
//!     cargo run --example order_dispatch

use kelps::engine::{parse_events, run, Deterministic, EngineConfig, Maximal, RandomStrategy, Strategy};
use kelps::syntax::parse_framework;

const ONE_CUSTOMER: &str = include_str!("../fixtures/fig3.kelps");
const SHOP: &str = include_str!("../fixtures/fig3-shop.kelps");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fw = parse_framework(ONE_CUSTOMER)?;
    let ext = parse_events("1: orders(bob, book)", &fw)?;
    let res = run(&fw, &ext, EngineConfig::new(6), &mut Deterministic { first_disjunct: true })?;
    print!("{}", res.trace.to_jsonl());
    for tree in &res.trees {
        println!("goal tree {} of rule {} opened at {}, achieved at {:?}", tree.id, tree.rule, tree.opened, tree.achieved);
    }

    // Two reliable customers order the only book at the same time.
    let shop = parse_framework(SHOP)?;
    let ext = parse_events("1: orders(c1, book), orders(c2, book)", &shop)?;
    let strategies: Vec<(&str, Box<dyn Strategy>)> = vec![
        ("det", Box::new(Deterministic::default())),
        ("exhaustive", Box::new(Maximal)),
        ("rand:1", Box::new(RandomStrategy::new(1))),
    ];
    for (name, mut s) in strategies {
        let res = run(&shop, &ext, EngineConfig::new(6), &mut s)?;
        let acts: Vec<String> = res.trace.acts_star().iter().map(|(t, a)| format!("{a}@{t}")).collect();
        println!("{name}: {}", acts.join(" "));
    }
    Ok(())
}
