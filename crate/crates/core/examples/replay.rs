//! Record the choices of a seeded random run, print them as a script, and
//! replay the script to the same trace.
//!
//!     cargo run --example replay -- 42

use kelps::engine::{parse_events, run, EngineConfig, RandomStrategy, Recorder, Script, Scripted};
use kelps::syntax::parse_framework;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(42);
    let fw = parse_framework(include_str!("../fixtures/fig3-shop.kelps"))?;
    let ext = parse_events("1: orders(c1, book), orders(c2, book)", &fw)?;

    let mut rec = Recorder::new(RandomStrategy::new(seed));
    let first = run(&fw, &ext, EngineConfig::new(6), &mut rec)?.trace.to_jsonl();
    let text = rec.script.to_string();
    println!("script for rand:{seed}:\n{text}");

    let script: Script = text.parse()?;
    let again = run(&fw, &ext, EngineConfig::new(6), &mut Scripted::new(script))?.trace.to_jsonl();
    print!("{first}");
    println!("replay identical: {}", first == again);
    Ok(())
}
