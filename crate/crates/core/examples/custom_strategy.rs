//! A hand-written choice policy: always apologise instead of dispatching.
//!
//!     cargo run --example custom_strategy

use kelps::engine::{maximal_passing, parse_events, run, EngineConfig, Selection, Step2View, Step3View, Step4View, Strategy};
use kelps::syntax::parse_framework;

/// Evaluates everything, but only acts on the second disjunct of open goal trees.
struct Apologetic;

impl Strategy for Apologetic {
    fn step2(&mut self, view: &Step2View<'_>) -> Selection {
        (0..view.candidates.len()).collect()
    }

    fn step3(&mut self, view: &Step3View<'_>) -> Selection {
        let es = view.engine;
        (0..view.options.len())
            .filter(|&k| {
                let c = &es.clauses[&view.options[k].clause];
                c.disjunct == 1 && es.trees[&c.tree].achieved.is_none()
            })
            .collect()
    }

    fn step4(&mut self, view: &Step4View<'_>) -> Selection {
        maximal_passing(view)
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fw = parse_framework(include_str!("../fixtures/fig3.kelps"))?;
    let ext = parse_events("1: orders(bob, book)", &fw)?;
    let res = run(&fw, &ext, EngineConfig::new(6), &mut Apologetic)?;
    print!("{}", res.trace.to_jsonl());
    println!("all goal trees achieved: {}", res.all_achieved());
    Ok(())
}
