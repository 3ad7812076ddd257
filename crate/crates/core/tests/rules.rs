mod common;

use common::{check_fixture, config, fixtures, n};
use mdpi::engine::{match_communication, Action, ActionKind, Tag, TagKind};
use mdpi::{enabled_transitions, EngineOptions, Verdict};

#[test]
fn every_rule_fixture_holds() {
    let all = fixtures();
    assert!(all.len() >= 14);
    for f in &all {
        if let Err(e) = check_fixture(f) {
            panic!("{e}");
        }
    }
}

#[test]
fn stop_has_no_transitions() {
    assert!(enabled_transitions(&config("l[[ stop ]]", &[("l", 0)]), &EngineOptions::default()).is_empty());
}

#[test]
fn missing_clock_defaults_to_zero() {
    let c = config("k[[ c!<v> ]]", &[]);
    assert_eq!(c.clocks.get(&n("k")), Some(&0));
    let steps = enabled_transitions(&c, &EngineOptions::default());
    let logs = steps[0].1.trace_logs();
    assert_eq!(logs[&n("k")][0].0, 0);
}

#[test]
fn fail_records_verdict() {
    let c = config("l[[ fail ]]@(l,0) | k[[ c?(x).stop ]]", &[("l", 0), ("k", 0)]);
    let steps = enabled_transitions(&c, &EngineOptions::closed());
    assert_eq!(steps.len(), 1);
    assert_eq!(steps[0].0.to_string(), "tau[m:l,l]");
    assert_eq!(steps[0].1.verdicts, vec![(n("l"), Verdict::Fail)]);
    assert_eq!(steps[0].1.system.to_string(), "k[[ c?(x).stop ]]");
}

#[test]
fn observed_verdict_is_an_output() {
    let c = config("l[[ ok ]]@(l,0)", &[("l", 0)]);
    let opts = EngineOptions { observe_verdicts: true, ..EngineOptions::closed() };
    let steps = enabled_transitions(&c, &opts);
    assert_eq!(steps[0].0.to_string(), "ok!<>[m:l,l]");
}

#[test]
fn skip_needs_a_mismatching_channel() {
    let c = config("l[[ trace c2<v2>@5 ]] | l[[ c2?*(x,y).ok ]]@(l,5)", &[("l", 6)]);
    // Same channel, wrong arity: neither Skip nor InT applies.
    assert!(enabled_transitions(&c, &EngineOptions::closed()).is_empty());
}

#[test]
fn two_monitors_read_the_same_entry() {
    let c = config("l[[ trace c<v>@0 ]] | l[[ c?*(x).ok ]]@(l,0) | k[[ c?*(y).fail ]]@(l,0)", &[("l", 1), ("k", 0)]);
    let steps = enabled_transitions(&c, &EngineOptions::closed());
    let labels: Vec<String> = steps.iter().map(|(a, _)| a.to_string()).collect();
    assert_eq!(labels, vec!["tau[t:l,k:0]", "tau[t:l,l:0]"]);
    for (_, d) in &steps {
        assert_eq!(d.system.traces().count(), 1);
    }
}

#[test]
fn replicated_query_advances_its_position() {
    let c = config("l[[ trace c<v>@0 | trace c<v>@1 ]] | l[[ !(c?*(x).d!<x>) ]]@(l,0)", &[("l", 2)]);
    let g = mdpi::explore(
        &c.system.to_system().unwrap(),
        &c.clocks,
        &EngineOptions::default(),
        &mdpi::ExploreBounds { max_repeat_unfold: 3, ..Default::default() },
    );
    let outs = g.edges.iter().filter(|e| e.action.to_string() == "d!<v>[m:l,_]").count();
    assert!(outs >= 2);
    // Every reachable replica context lies within the log.
    for s in &g.states {
        for a in &s.system.atoms {
            if let mdpi::normal::Atom::Monitor { ctx_idx, .. } = a {
                assert!(ctx_idx.as_index().unwrap() <= 2);
            }
        }
    }
}

fn out(subject: &str, from: &str, kind: TagKind, ts: Option<u64>) -> Action {
    Action {
        kind: ActionKind::Output,
        tag: Tag::new(kind, Some(n(from)), None, ts),
        subject: Some(n(subject)),
        payload: vec![n("v")],
        extruded: Vec::new(),
    }
}

fn inp(subject: &str, from: Option<&str>, to: &str, kind: TagKind, ts: Option<u64>) -> Action {
    Action {
        kind: ActionKind::Input,
        tag: Tag::new(kind, from.map(n), Some(n(to)), ts),
        subject: Some(n(subject)),
        payload: vec![n("v")],
        extruded: Vec::new(),
    }
}

#[test]
fn trace_tags_must_agree_on_timestamp() {
    let o = out("c", "l", TagKind::T, Some(4));
    let i = inp("c", Some("l"), "k", TagKind::T, Some(4));
    assert_eq!(match_communication(&o, &i), Some(Tag::new(TagKind::T, Some(n("l")), Some(n("k")), Some(4))));
    let late = inp("c", Some("l"), "k", TagKind::T, Some(5));
    assert_eq!(match_communication(&o, &late), None);
}

#[test]
fn monitor_output_matches_exactly_one_reader() {
    // Two locations, each with a monitor input on d; output from k.
    let o = out("d", "k", TagKind::M, None);
    let readers = [
        inp("d", None, "l", TagKind::M, None),
        inp("d", None, "k", TagKind::P, None),
        inp("e", None, "k", TagKind::M, None),
    ];
    let matched: Vec<Tag> = readers.iter().filter_map(|r| match_communication(&o, r)).collect();
    assert_eq!(matched, vec![Tag::new(TagKind::M, Some(n("k")), Some(n("l")), None)]);
}
