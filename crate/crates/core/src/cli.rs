//! Command-line front end: `run`, `explore` and `verify`.
//!
//! Exit codes: 0 ok, 1 verdict failure, 2 parse or input error,
//! 3 validation error, 4 precondition halt, 5 cap exceeded.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::engine::{explore, parse_events, run, EngineConfig, ExploreConfig, Recorder, StrategySpec};
use crate::model::{Timeline, Trace};
use crate::state::MatchMode;
use crate::syntax::{parse_framework, validate_framework, Framework};
use crate::verify::{check_frame_axioms, check_reactive, check_theorems, OracleConfig, SupportDefinition, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_HALT: i32 = 4;
pub const EXIT_CAP: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "kelps", version, about = "Run and verify reactive-rule frameworks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the cycle once and write the trace as JSON Lines.
    Run(RunConfig),
    /// Enumerate every trace the cycle can produce.
    Explore(ExploreArgs),
    /// Check a trace (or, in theorems mode, an event file) against a framework.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

impl Switch {
    fn on(self) -> bool {
        self == Switch::On
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Framework source (.kelps).
    pub framework: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: Option<u32>,
    #[arg(long = "match", default_value = "subset")]
    pub match_mode: MatchMode,
    /// Where to write the main output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RunConfig {
    #[command(flatten)]
    pub common: Common,
    /// External events, one `<time>: atom, ...` line per time.
    pub events: PathBuf,
    /// det, det:first-disjunct, rand:<seed>, exhaustive or script:<path>.
    #[arg(long, default_value = "det")]
    pub strategy: StrategySpec,
    #[arg(long, value_enum, default_value = "on")]
    pub prune: Switch,
    #[arg(long = "dedup-step2", value_enum, default_value = "off")]
    pub dedup_step2: Switch,
    /// Write the goal-tree report (JSON) here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Write the choices made as a replayable script here.
    #[arg(long)]
    pub record: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExploreArgs {
    #[command(flatten)]
    pub common: Common,
    pub events: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Maximum number of choice points expanded.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: usize,
    /// Directory receiving one trace file per explored trace.
    #[arg(long)]
    pub traces: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum VerifyMode {
    Reactive,
    Rules,
    Frame,
    Theorems,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    /// Trace file (JSON Lines); an event file in theorems mode.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "reactive")]
    pub mode: VerifyMode,
    #[arg(long, default_value = "operational")]
    pub support: SupportDefinition,
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
}

/// A failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub msg: String,
}

fn fail(code: i32, msg: impl std::fmt::Display) -> Failure {
    Failure { code, msg: msg.to_string() }
}

fn read(p: &Path) -> Result<String, Failure> {
    fs::read_to_string(p).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", p.display())))
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| fail(EXIT_PARSE, e)),
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("reports serialize");
    s.push('\n');
    s
}

/// Parses and validates a framework file.
pub fn load_framework(p: &Path) -> Result<Framework, Failure> {
    let fw = parse_framework(&read(p)?).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", p.display())))?;
    let rep = validate_framework(&fw);
    if !rep.is_ok() {
        let lines: Vec<String> = rep.violations.iter().map(|v| v.to_string()).collect();
        return Err(fail(EXIT_VALIDATION, format!("{}: invalid framework\n  {}", p.display(), lines.join("\n  "))));
    }
    for w in &rep.warnings {
        eprintln!("warning: {w}");
    }
    Ok(fw)
}

fn load_events(p: &Path, fw: &Framework) -> Result<Timeline, Failure> {
    parse_events(&read(p)?, fw).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", p.display())))
}

fn need_horizon(c: &Common) -> Result<u32, Failure> {
    c.horizon.ok_or_else(|| fail(EXIT_PARSE, "--horizon is required"))
}

pub fn cmd_run(cfg: &RunConfig) -> Result<i32, Failure> {
    let fw = load_framework(&cfg.common.framework)?;
    let ext = load_events(&cfg.events, &fw)?;
    let horizon = need_horizon(&cfg.common)?;
    let ecfg = EngineConfig { horizon, mode: cfg.common.match_mode, prune: cfg.prune.on(), dedup_step2: cfg.dedup_step2.on() };
    let inner = cfg.strategy.build().map_err(|e| fail(EXIT_PARSE, e))?;
    let mut strat = Recorder::new(inner);
    let res = run(&fw, &ext, ecfg, &mut strat).map_err(|e| fail(EXIT_PARSE, e))?;
    write_out(&cfg.common.out, &res.trace.to_jsonl())?;
    if let Some(p) = &cfg.record {
        fs::write(p, strat.script.to_string()).map_err(|e| fail(EXIT_PARSE, e))?;
    }
    let report = json!({
        "horizon": horizon,
        "strategy": cfg.strategy.to_string(),
        "trees": res.trees,
        "all_achieved": res.all_achieved(),
        "halted": res.halted,
    });
    if let Some(p) = &cfg.report {
        fs::write(p, pretty(&report)).map_err(|e| fail(EXIT_PARSE, e))?;
    }
    let open = res.trees.iter().filter(|t| t.achieved.is_none()).count();
    eprintln!("{} goal trees, {} open, {} actions", res.trees.len(), open, res.trace.acts_star().len());
    if let Some(h) = &res.halted {
        eprintln!("halted: external events at {} violate the preconditions", h.time);
        for v in &h.violations {
            eprintln!("  {}", v.sentence);
        }
        return Ok(EXIT_HALT);
    }
    Ok(EXIT_OK)
}

pub fn cmd_explore(a: &ExploreArgs) -> Result<i32, Failure> {
    let fw = load_framework(&a.common.framework)?;
    let ext = load_events(&a.events, &fw)?;
    let horizon = need_horizon(&a.common)?;
    let mut cfg = ExploreConfig::new(horizon);
    cfg.engine.mode = a.common.match_mode;
    cfg.cap = a.cap;
    cfg.workers = a.workers.max(1);
    let res = explore(&fw, &ext, &cfg).map_err(|e| fail(EXIT_PARSE, e))?;
    if let Some(dir) = &a.traces {
        fs::create_dir_all(dir).map_err(|e| fail(EXIT_PARSE, e))?;
        for (k, t) in res.traces.iter().enumerate() {
            fs::write(dir.join(format!("trace-{k:04}.jsonl")), t.to_jsonl()).map_err(|e| fail(EXIT_PARSE, e))?;
        }
    }
    // How many traces contain each action predicate.
    let mut by_action: BTreeMap<String, usize> = fw.action_alphabet().iter().map(|g| (g.pred.to_string(), 0)).collect();
    for t in &res.traces {
        let preds: std::collections::BTreeSet<String> = t.acts_star().iter().map(|(_, g)| g.pred.to_string()).collect();
        for p in preds {
            *by_action.entry(p).or_default() += 1;
        }
    }
    let acts: Vec<Vec<String>> =
        res.traces.iter().map(|t| t.acts_star().iter().map(|(i, g)| format!("{g}@{i}")).collect()).collect();
    let summary = json!({
        "traces": res.traces.len(),
        "incomplete": res.incomplete,
        "halted_branches": res.halted,
        "nodes": res.nodes,
        "traces_with_action": by_action,
        "actions": acts,
    });
    write_out(&a.common.out, &pretty(&summary))?;
    Ok(if res.incomplete { EXIT_CAP } else { EXIT_OK })
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<i32, Failure> {
    let fw = load_framework(&a.common.framework)?;
    let mode = a.common.match_mode;
    if a.mode == VerifyMode::Theorems {
        let ext = load_events(&a.input, &fw)?;
        let horizon = need_horizon(&a.common)?;
        let mut ecfg = ExploreConfig::new(horizon);
        ecfg.engine.mode = mode;
        ecfg.workers = a.workers.max(1);
        let ocfg = OracleConfig { mode, support: a.support, workers: a.workers.max(1), ..Default::default() };
        let rep = check_theorems(&fw, &ext, horizon, &ecfg, &ocfg).map_err(|e| fail(EXIT_PARSE, e))?;
        write_out(&a.common.out, &pretty(&rep))?;
        return Ok(if rep.explore_incomplete || rep.oracle_incomplete {
            EXIT_CAP
        } else if rep.generated_are_reactive && rep.reactive_are_generated {
            EXIT_OK
        } else {
            EXIT_VERDICT
        });
    }
    let trace = Trace::from_jsonl(&read(&a.input)?, &fw).map_err(|e| fail(EXIT_PARSE, format!("{}: {e}", a.input.display())))?;
    let vcfg = VerifyConfig { mode, support: a.support, horizon: a.common.horizon };
    let (ok, report) = match a.mode {
        VerifyMode::Frame => {
            let v = check_frame_axioms(&fw, &trace, mode);
            (v.is_empty(), json!({ "mode": "frame", "pass": v.is_empty(), "violations": v }))
        }
        VerifyMode::Reactive | VerifyMode::Rules => {
            let rep = check_reactive(&fw, &trace, &vcfg).map_err(|e| fail(EXIT_PARSE, e))?;
            if a.mode == VerifyMode::Reactive {
                let ok = rep.reactive_interpretation;
                (ok, json!({ "mode": "reactive", "pass": ok, "report": rep }))
            } else {
                let ok = rep.rules_hold;
                (ok, json!({ "mode": "rules", "pass": ok, "rules": rep.rules }))
            }
        }
        VerifyMode::Theorems => unreachable!("handled above"),
    };
    write_out(&a.common.out, &pretty(&report))?;
    Ok(if ok { EXIT_OK } else { EXIT_VERDICT })
}

/// Parses arguments, dispatches, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_PARSE } else { EXIT_OK };
        }
    };
    let res = match &cli.command {
        Command::Run(c) => cmd_run(c),
        Command::Explore(c) => cmd_explore(c),
        Command::Verify(c) => cmd_verify(c),
    };
    match res {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}
