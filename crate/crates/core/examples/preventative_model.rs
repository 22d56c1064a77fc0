//! Going inside to avoid having to cry wolf makes every rule true, but no
//! rule asked for it. Rules-mode verification accepts the trace; the
//! reactivity check does not.
//!
//!     cargo run --example preventative_model

use kelps::engine::{parse_events, run, Deterministic, EngineConfig};
use kelps::model::Trace;
use kelps::syntax::parse_framework;
use kelps::verify::{check_reactive, check_rules, VerifyConfig};

const FRAMEWORK: &str = include_str!("../fixtures/fig2.kelps");
const PREVENTATIVE: &str = include_str!("../fixtures/preventative.trace");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fw = parse_framework(FRAMEWORK)?;
    let cfg = VerifyConfig::default();

    let ext = parse_events("3: see-wolf", &fw)?;
    let res = run(&fw, &ext, EngineConfig::new(5), &mut Deterministic::default())?;
    println!("engine run:");
    print!("{}", res.trace.to_jsonl());

    let prev = Trace::from_jsonl(PREVENTATIVE, &fw)?;
    println!("\nhand-written trace:");
    print!("{}", prev.to_jsonl());
    for r in check_rules(&fw, &prev, &cfg)? {
        println!("rule {}: {:?}", r.text, r.verdict);
    }
    let rep = check_reactive(&fw, &prev, &cfg)?;
    println!("reactive interpretation: {}", rep.reactive_interpretation);
    println!("unsupported actions: {:?}", rep.unsupported);
    Ok(())
}
