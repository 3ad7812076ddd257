use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name);
    root.to_str().unwrap().to_string()
}

fn mdpi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdpi")).args(args).env_remove("MDPI_SEED").output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CLOCKS: &str = "l=5,k=9";

#[test]
fn explore_lists_both_trace_orders() {
    let o = mdpi(&["explore", &data("two_locations.mdpi"), "--clock", CLOCKS]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("terminal trace-sets 2"), "{out}");
    assert!(out.contains("k: c3<v3>@9; l: c1<v1>@5 c2<v2>@6"), "{out}");
    assert!(out.contains("k: c3<v3>@9; l: c2<v2>@5 c1<v1>@6"), "{out}");
}

#[test]
fn explore_trivial_system_has_one_state() {
    let o = mdpi(&["explore", &data("stop.mdpi")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("states 1\nedges 0\ntruncated false\n"));
}

#[test]
fn explore_writes_graph_files() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("g.json");
    let o = mdpi(&["explore", &data("two_locations.mdpi"), "--clock", CLOCKS, "--format", "json", "-o", json.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["states"].as_array().unwrap().len(), 10);
    let o = mdpi(&["explore", &data("two_locations.mdpi"), "--format", "dot", "--filter", "prc"]);
    assert!(stdout(&o).starts_with("digraph"));
}

#[test]
fn explore_reports_truncation_without_failing() {
    let o = mdpi(&["explore", &data("relay_with_orch.mdpi"), "--clock", CLOCKS, "--max-states", "5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("truncated true"));
}

#[test]
fn parse_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mdpi");
    std::fs::write(&bad, "l[[ c!< ").unwrap();
    for cmd in ["explore", "simulate"] {
        let o = mdpi(&[cmd, bad.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(3), "{cmd}");
    }
    let o = mdpi(&["compile", bad.to_str().unwrap(), "--strategy", "orch"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn check_exit_codes_follow_verdicts() {
    let (orch, chor, mig) = (data("relay_with_orch.mdpi"), data("relay_with_chor.mdpi"), data("relay_with_mig.mdpi"));
    assert_eq!(mdpi(&["check", &orch, &chor, "--clock", CLOCKS]).status.code(), Some(0));
    assert_eq!(mdpi(&["check", &data("relay.mdpi"), &orch, "--filter", "prc", "--clock", CLOCKS]).status.code(), Some(0));
    assert_eq!(mdpi(&["check", &mig, &mig, "--filter-right", "ltr", "--clock", CLOCKS]).status.code(), Some(0));
    let o = mdpi(&["check", &orch, &orch, "--filter-right", "ltr", "--observe-verdicts", "--clock", CLOCKS]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("trace fail!<>"), "{}", stdout(&o));
    let o = mdpi(&["check", &orch, &chor, "--clock", CLOCKS, "--max-states", "20"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_writes_witness_json() {
    let dir = tempfile::tempdir().unwrap();
    let w = dir.path().join("w.json");
    let f = data("two_locations.mdpi");
    let o = mdpi(&["check", &f, &f, "--witness", w.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&w).unwrap()).unwrap();
    assert_eq!(v["verdict"], "bisimilar");
    assert!(!v["witness"].as_array().unwrap().is_empty());
}

#[test]
fn custom_filter_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f.json");
    std::fs::write(&f, r#"{"name": "outputs-only", "rules": [{"match": {"kind": "input"}, "emit": "drop"}, {"emit": "strip"}]}"#).unwrap();
    let o = mdpi(&["explore", &data("two_locations.mdpi"), "--filter", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("filter outputs-only states 10"), "{}", stdout(&o));
    assert_eq!(mdpi(&["explore", &data("two_locations.mdpi"), "--filter", "nope"]).status.code(), Some(5));
}

#[test]
fn simulate_is_reproducible_and_reads_seed_from_env() {
    let f = data("relay_with_chor.mdpi");
    let a = mdpi(&["simulate", &f, "--clock", CLOCKS, "--seed", "9"]);
    let b = Command::new(env!("CARGO_BIN_EXE_mdpi")).args(["simulate", &f, "--clock", CLOCKS]).env("MDPI_SEED", "9").output().unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("seed 9\n"));
    let zero = mdpi(&["simulate", &f, "--steps", "0"]);
    assert!(stdout(&zero).contains("steps 0\n"));
}

#[test]
fn compile_emits_parseable_monitors() {
    let e = data("hospital.re");
    for s in ["orch", "chor", "mig"] {
        let o = mdpi(&["compile", &e, "--strategy", s]);
        assert_eq!(o.status.code(), Some(0), "{s}");
        mdpi::parse_system(&stdout(&o)).unwrap_or_else(|err| panic!("{s}: {err}"));
    }
    let o = mdpi(&["compile", &e, "--strategy", "mig", "--nested"]);
    assert!(stdout(&o).contains("go p1.sync p1."));
    assert_eq!(mdpi(&["compile", &e, "--strategy", "orch", "--nested"]).status.code(), Some(5));
}

#[test]
fn verify_contract_finds_the_violation() {
    let o = mdpi(&["verify-contract", &data("hospital.re"), &data("hospital_violating.mdpi")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(out.matches("fail-reachable true").count(), 3, "{out}");
    assert!(out.contains("strategies agree true") && out.contains("sound true"));

    let o = mdpi(&["verify-contract", &data("single_event.re"), &data("silent_k.mdpi"), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for s in ["orch", "chor", "mig"] {
        assert_eq!(v["strategies"][s]["fail_reachable"], false);
    }
}

#[test]
fn output_is_byte_identical_across_runs() {
    let args = ["explore", &data("relay_with_mig.mdpi"), "--clock", CLOCKS, "--format", "json"];
    assert_eq!(mdpi(&args).stdout, mdpi(&args).stdout);
}
