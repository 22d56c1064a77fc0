//! The `kelps` binary: outputs, file formats and exit codes.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::{fixture, read};

fn kelps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kelps"))
        .current_dir(fixture(""))
        .args(args)
        .output()
        .expect("spawn kelps")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn write(dir: &Path, file: &str, text: &str) -> String {
    let p = dir.join(file);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn run_matches_golden_traces() {
    for (fw, ev, h, extra, golden) in [
        ("fig1.kelps", "fig1.events", "5", None, "expected/fig1.run.trace"),
        ("fig2.kelps", "fig2.events", "5", None, "expected/fig2.run.trace"),
        ("fig3.kelps", "order.events", "6", Some("det:first-disjunct"), "expected/fig3.run.trace"),
    ] {
        let mut args = vec!["run", fw, ev, "--horizon", h];
        if let Some(s) = extra {
            args.extend(["--strategy", s]);
        }
        let o = kelps(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(stdout(&o), read(golden), "{fw}");
    }
}

#[test]
fn report_lists_achieved_trees() {
    let dir = tempfile::tempdir().unwrap();
    let rep = dir.path().join("report.json");
    let o = kelps(&["run", "fig3.kelps", "order.events", "--horizon", "6", "--strategy", "det:first-disjunct", "--report", rep.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let got: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&rep).unwrap()).unwrap();
    let want: serde_json::Value = serde_json::from_str(&read("expected/fig3.report.json")).unwrap();
    assert_eq!(got, want);
    assert_eq!(got["all_achieved"], true);
    assert_eq!(got["strategy"], "det:first-disjunct");
}

#[test]
fn empty_framework_writes_frame_steps_only() {
    let o = kelps(&["run", "empty.kelps", "empty.events", "--horizon", "3"]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines.iter().all(|l| l.contains("\"acts\":[]")));
}

#[test]
fn verify_modes_and_verdicts() {
    for (fw, tr, mode, want) in [
        ("fig1.kelps", "reactive.trace", "reactive", 0),
        ("fig1.kelps", "proactive.trace", "reactive", 1),
        ("fig1.kelps", "proactive.trace", "rules", 0),
        ("fig1.kelps", "irrelevant.trace", "reactive", 1),
        ("fig1.kelps", "irrelevant.trace", "rules", 0),
        ("fig2.kelps", "preventative.trace", "reactive", 1),
        ("fig2.kelps", "preventative.trace", "rules", 0),
        ("fig2.kelps", "preventative.trace", "frame", 0),
        ("fig2.kelps", "corrupted.trace", "frame", 1),
        ("fig2.kelps", "expected/fig2.run.trace", "reactive", 0),
    ] {
        let o = kelps(&["verify", fw, tr, "--mode", mode]);
        assert_eq!(code(&o), want, "{tr} {mode}: {}", stdout(&o));
        assert_eq!(json(&o)["pass"], want == 0);
    }
    let o = kelps(&["verify", "fig2.kelps", "preventative.trace"]);
    assert_eq!(json(&o)["report"]["unsupported"], serde_json::json!(["go-inside@1"]));
    let o = kelps(&["verify", "fig1.kelps", "irrelevant.trace"]);
    assert_eq!(json(&o)["report"]["unsupported"], serde_json::json!(["drink@4"]));
}

#[test]
fn explore_summary_and_trace_directory() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("traces");
    let o = kelps(&["explore", "fig2.kelps", "fig2.events", "--horizon", "5", "--traces", traces.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let s = json(&o);
    assert_eq!(s["traces"], 2);
    assert_eq!(s["incomplete"], false);
    assert_eq!(s["traces_with_action"]["go-inside"], 0);
    assert_eq!(std::fs::read_dir(&traces).unwrap().count(), 2);
    for e in std::fs::read_dir(&traces).unwrap() {
        let p = e.unwrap().path();
        let v = kelps(&["verify", "fig2.kelps", p.to_str().unwrap()]);
        assert_eq!(code(&v), 0, "{}", p.display());
    }
}

#[test]
fn theorems_mode_takes_an_event_file() {
    let o = kelps(&["verify", "fig1.kelps", "fig1.events", "--mode", "theorems", "--horizon", "5"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let r = json(&o);
    assert_eq!(r["generated_are_reactive"], true);
    assert_eq!(r["reactive_are_generated"], true);
    assert_eq!(r["explored"], 2);
}

#[test]
fn parse_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.kelps", "rules { see-wolf(T) -> }");
    assert_eq!(code(&kelps(&["run", &bad, "fig1.events", "--horizon", "5"])), 2);
    assert_eq!(code(&kelps(&["run", "fig1.kelps", "missing.events", "--horizon", "5"])), 2);
    assert_eq!(code(&kelps(&["run", "fig1.kelps", "fig1.events"])), 2, "horizon is required");
    assert_eq!(code(&kelps(&["run", "fig1.kelps", "fig1.events", "--horizon", "5", "--strategy", "greedy"])), 2);
    let ev = write(dir.path(), "bad.events", "3: cry-wolf");
    assert_eq!(code(&kelps(&["run", "fig1.kelps", &ev, "--horizon", "5"])), 2, "actions are not external events");
    let tr = write(dir.path(), "bad.trace", "{\"t\":1,\"state\":[],\"ext\":[],\"acts\":[]}\n");
    assert_eq!(code(&kelps(&["verify", "fig1.kelps", &tr])), 2);
    assert_eq!(code(&kelps(&["frobnicate"])), 2);
}

#[test]
fn validation_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    // The action's argument is not bound by anything before it.
    let fw = write(dir.path(), "unsafe.kelps", "sorts { s: {a} } events { e } actions { p(s) } rules { e(T) -> p(X, T + 1) }");
    let o = kelps(&["run", &fw, "fig1.events", "--horizon", "3"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("invalid framework"));
}

#[test]
fn external_precondition_violation_halts_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let fw = write(dir.path(), "clash.kelps", "events { e, d } actions { a } preconditions { e(T) & d(T) -> false } rules { e(T) -> a(T + 1) }");
    let ev = write(dir.path(), "clash.events", "1: e\n2: e, d\n");
    let o = kelps(&["run", &fw, &ev, "--horizon", "4"]);
    assert_eq!(code(&o), 4);
    assert!(String::from_utf8_lossy(&o.stderr).contains("halted"));
    // The trace stops before the offending cycle.
    assert_eq!(stdout(&o).lines().count(), 2);
}

#[test]
fn exploration_cap_exits_5() {
    let o = kelps(&["explore", "fig3-shop.kelps", "two-orders.events", "--horizon", "4", "--cap", "3"]);
    assert_eq!(code(&o), 5);
    assert_eq!(json(&o)["incomplete"], true);
}

#[test]
fn recorded_script_replays() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("s.script");
    let a = kelps(&["run", "fig3-shop.kelps", "two-orders.events", "--horizon", "6", "--strategy", "rand:9", "--record", script.to_str().unwrap()]);
    let spec = format!("script:{}", script.display());
    let b = kelps(&["run", "fig3-shop.kelps", "two-orders.events", "--horizon", "6", "--strategy", &spec]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}
