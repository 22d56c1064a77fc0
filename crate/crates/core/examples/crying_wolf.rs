//! The boy who cried wolf: run the engine on one sighting and check that
//! the resulting trace is a reactive model.
//!
//!     cargo run --example crying_wolf

use kelps::engine::{parse_events, run, Deterministic, EngineConfig};
use kelps::syntax::parse_framework;
use kelps::verify::{check_reactive, VerifyConfig};

const FRAMEWORK: &str = include_str!("../fixtures/fig1.kelps");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fw = parse_framework(FRAMEWORK)?;
    let ext = parse_events("3: see-wolf", &fw)?;
    let res = run(&fw, &ext, EngineConfig::new(5), &mut Deterministic::default())?;

    print!("{}", res.trace.to_jsonl());
    for (t, a) in res.trace.acts_star() {
        println!("action {a} at {t}");
    }

    let rep = check_reactive(&fw, &res.trace, &VerifyConfig::default())?;
    println!("reactive model: {}", rep.reactive_model);
    for s in &rep.supports {
        if let Some(w) = &s.witness {
            println!("{}@{} is supported by rule {} under {:?}", s.action, s.t, w.rule, w.sigma);
        }
    }
    Ok(())
}
