//! Frame axioms hold of every trace built by the successor function, and a
//! hand-corrupted trace is caught.
//!
//!     cargo run --example frame_axioms

use kelps::engine::{parse_events, run, EngineConfig, RandomStrategy};
use kelps::model::Trace;
use kelps::state::MatchMode;
use kelps::syntax::parse_framework;
use kelps::verify::check_frame_axioms;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fw = parse_framework(include_str!("../fixtures/fig3-shop.kelps"))?;
    let ext = parse_events("1: orders(c1, book), orders(c2, book)\n4: pays-invoice(c1, book)", &fw)?;
    let res = run(&fw, &ext, EngineConfig::new(6), &mut RandomStrategy::new(7))?;
    print!("{}", res.trace.to_jsonl());
    println!("violations: {:?}", check_frame_axioms(&fw, &res.trace, MatchMode::Subset));

    let mut bad = res.trace.clone();
    if let Some((t, fluent)) = (1..bad.states.len()).find_map(|t| bad.states[t].iter().next().cloned().map(|f| (t, f))) {
        bad.states[t].remove(&fluent);
        println!("removed {fluent} from S_{t}");
        for v in check_frame_axioms(&fw, &bad, MatchMode::Subset) {
            println!("  {v}");
        }
    }

    let fig2 = parse_framework(include_str!("../fixtures/fig2.kelps"))?;
    let corrupted = Trace::from_jsonl(include_str!("../fixtures/corrupted.trace"), &fig2)?;
    println!("corrupted.trace: {:?}", check_frame_axioms(&fig2, &corrupted, MatchMode::Subset));
    Ok(())
}
