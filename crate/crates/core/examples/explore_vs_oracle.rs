//! Every trace the cycle can produce, compared with a brute-force
//! enumeration of reactive interpretations, on random tiny frameworks.
//! Also shows what changes when support is read without the ordering and
//! range conditions.
//!
//!     cargo run --release --example explore_vs_oracle -- 50

use kelps::engine::ExploreConfig;
use kelps::random::tiny_instance;
use kelps::verify::{check_theorems, OracleConfig, SupportDefinition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(30);
    let literal = OracleConfig { support: SupportDefinition::Literal, ..Default::default() };
    let (mut agree, mut gaps) = (0, 0);
    for seed in 0..seeds {
        let inst = tiny_instance(seed);
        let ecfg = ExploreConfig::new(inst.horizon);
        let rep = check_theorems(&inst.framework, &inst.ext, inst.horizon, &ecfg, &OracleConfig::default())?;
        if rep.generated_are_reactive && rep.reactive_are_generated {
            agree += 1;
        } else {
            println!("seed {seed} disagrees:\n{}\n{rep:?}", inst.source);
        }
        let lit = check_theorems(&inst.framework, &inst.ext, inst.horizon, &ecfg, &literal)?;
        if !lit.reactive_are_generated && gaps == 0 {
            println!("seed {seed}: literal support admits traces the cycle cannot produce");
            print!("{}", inst.source);
            for (t, evs) in &inst.ext {
                let evs: Vec<String> = evs.iter().map(|e| e.to_string()).collect();
                println!("  {t}: {}", evs.join(", "));
            }
            println!("  horizon {}", inst.horizon);
            for t in &lit.not_generated {
                println!("  not generated: {t:?}");
            }
        }
        gaps += usize::from(!lit.reactive_are_generated);
    }
    println!("{agree}/{seeds} instances agree; literal support differs on {gaps}");
    Ok(())
}
