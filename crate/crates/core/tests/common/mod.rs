#![allow(dead_code)]

use mdpi::{enabled_transitions, parse_system, ClockMap, Config, EngineOptions, LtsGraph, Name, NormSystem};
use proptest::prelude::*;

pub fn n(s: &str) -> Name {
    Name::id(s)
}

pub fn clocks(pairs: &[(&str, u64)]) -> ClockMap {
    pairs.iter().map(|(l, t)| (n(l), *t)).collect()
}

pub fn config(text: &str, pairs: &[(&str, u64)]) -> Config {
    Config::initial(&parse_system(text).expect("fixture parses"), &clocks(pairs))
}

/// One minimal configuration exercising a single transition rule.
pub struct Fixture {
    pub rule: &'static str,
    pub system: &'static str,
    pub clocks: &'static [(&'static str, u64)],
    pub opts: EngineOptions,
    /// Exact label of the transition under test.
    pub label: &'static str,
    /// Expected successor; `None` when the label must be absent.
    pub successor: Option<(&'static str, &'static [(&'static str, u64)])>,
    /// Number of transitions enabled in total.
    pub enabled: usize,
}

fn env(values: &[&str]) -> EngineOptions {
    EngineOptions { env_values: values.iter().map(|v| n(v)).collect(), ..EngineOptions::default() }
}

fn with_traces() -> EngineOptions {
    EngineOptions { trace_outputs: true, ..EngineOptions::closed() }
}

pub fn fixtures() -> Vec<Fixture> {
    vec![
        Fixture {
            rule: "OutP",
            system: "k[[ c!<v>.d?(x).stop ]]",
            clocks: &[("k", 3)],
            opts: EngineOptions::default(),
            label: "c!<v>[p:k,_]",
            successor: Some(("k[[ d?(x).stop ]] | k[[ trace c<v>@3 ]]", &[("k", 4)])),
            enabled: 1,
        },
        Fixture {
            rule: "InP",
            system: "l[[ c?(x).d!<x> ]]",
            clocks: &[("l", 0)],
            opts: env(&["v"]),
            label: "c?<v>[p:_,l]",
            successor: Some(("l[[ d!<v> ]]", &[("l", 0)])),
            enabled: 1,
        },
        Fixture {
            rule: "OutT",
            system: "k[[ trace c<v>@3 ]]",
            clocks: &[("k", 4)],
            opts: with_traces(),
            label: "c!<v>[t:k,_:3]",
            successor: Some(("k[[ trace c<v>@3 ]]", &[("k", 4)])),
            enabled: 1,
        },
        Fixture {
            rule: "InT",
            system: "k[[ trace c<v>@3 ]] | l[[ c?*(x).d!<x> ]]@(k,3)",
            clocks: &[("k", 4), ("l", 0)],
            opts: EngineOptions::closed(),
            label: "tau[t:k,l:3]",
            successor: Some(("k[[ trace c<v>@3 ]] | l[[ d!<v> ]]@(k,4)", &[("k", 4), ("l", 0)])),
            enabled: 1,
        },
        Fixture {
            rule: "OutM",
            system: "l[[ d!<v>.ok ]]@(l,2)",
            clocks: &[("l", 2)],
            opts: EngineOptions::default(),
            label: "d!<v>[m:l,_]",
            successor: Some(("l[[ ok ]]@(l,2)", &[("l", 2)])),
            enabled: 1,
        },
        Fixture {
            rule: "InM",
            system: "l[[ d?(x).if x = v then ok else fail ]]@(l,0)",
            clocks: &[("l", 0)],
            opts: env(&["v"]),
            label: "d?<v>[m:_,l]",
            successor: Some(("l[[ if v = v then ok else fail ]]@(l,0)", &[("l", 0)])),
            enabled: 1,
        },
        Fixture {
            rule: "Open",
            system: "new d.(k[[ c!<d>.d?(x).stop ]])",
            clocks: &[("k", 0)],
            opts: EngineOptions::default(),
            label: "(ch)c!<ch>[p:k,_]",
            successor: Some(("k[[ ch?(x).stop ]] | k[[ trace c<ch>@0 ]]", &[("k", 1)])),
            enabled: 1,
        },
        Fixture {
            rule: "Res",
            system: "new d.(k[[ d!<v> ]] | l[[ c!<v> ]])",
            clocks: &[("k", 0), ("l", 0)],
            opts: EngineOptions::default(),
            label: "d!<v>[p:k,_]",
            successor: None,
            enabled: 1,
        },
        Fixture {
            rule: "Com1",
            system: "k[[ c!<v> ]] | l[[ c?(x).d!<x> ]]",
            clocks: &[("k", 0), ("l", 0)],
            opts: EngineOptions::closed(),
            label: "tau[p:k,l]",
            successor: Some(("l[[ d!<v> ]] | k[[ trace c<v>@0 ]]", &[("k", 1), ("l", 0)])),
            enabled: 1,
        },
        Fixture {
            rule: "Com2",
            system: "l[[ c?(x).d!<x> ]] | new e.(k[[ c!<e>.e?(y).stop ]])",
            clocks: &[("k", 0), ("l", 0)],
            opts: EngineOptions::closed(),
            label: "tau[p:k,l]",
            successor: Some((
                "new e.(l[[ d!<e> ]] | k[[ e?(y).stop ]] | k[[ trace c<e>@0 ]])",
                &[("k", 1), ("l", 0)],
            )),
            enabled: 1,
        },
        Fixture {
            rule: "ComM",
            system: "k[[ d!<v> ]]@(k,0) | l[[ d?(x).ok ]]@(l,0)",
            clocks: &[("k", 0), ("l", 0)],
            opts: EngineOptions::closed(),
            label: "tau[m:k,l]",
            successor: Some(("l[[ ok ]]@(l,0)", &[("k", 0), ("l", 0)])),
            enabled: 1,
        },
        Fixture {
            rule: "Skip",
            system: "l[[ trace c1<v1>@5 | trace c2<v2>@6 ]] | l[[ c2?*(x).ok ]]@(l,5)",
            clocks: &[("l", 7)],
            opts: EngineOptions::closed(),
            label: "tau[t:l,l:5]",
            successor: Some(("l[[ trace c1<v1>@5 | trace c2<v2>@6 ]] | l[[ c2?*(x).ok ]]@(l,6)", &[("l", 7)])),
            enabled: 1,
        },
        Fixture {
            rule: "SkipBlocked",
            system: "l[[ c2?*(x).ok ]]@(l,5)",
            clocks: &[("l", 5)],
            opts: EngineOptions::closed(),
            label: "tau[t:l,l:5]",
            successor: None,
            enabled: 0,
        },
        Fixture {
            rule: "SetI",
            system: "l[[ setI(k,4).c?*(x).ok ]]@(l,0)",
            clocks: &[("k", 9), ("l", 0)],
            opts: EngineOptions::closed(),
            label: "tau[m:l,l]",
            successor: Some(("l[[ c?*(x).ok ]]@(k,4)", &[("k", 9), ("l", 0)])),
            enabled: 1,
        },
        Fixture {
            rule: "Sync",
            system: "l[[ sync k.c?*(x).ok ]]@(l,0)",
            clocks: &[("k", 7), ("l", 0)],
            opts: EngineOptions::closed(),
            label: "tau[m:l,l]",
            successor: Some(("l[[ c?*(x).ok ]]@(k,7)", &[("k", 7), ("l", 0)])),
            enabled: 1,
        },
        Fixture {
            rule: "GetI",
            system: "l[[ getI(x,y).d!<x,y> ]]@(k,3)",
            clocks: &[("k", 3), ("l", 0)],
            opts: EngineOptions::closed(),
            label: "tau[m:l,l]",
            successor: Some(("l[[ d!<k,3> ]]@(k,3)", &[("k", 3), ("l", 0)])),
            enabled: 1,
        },
        Fixture {
            rule: "Go",
            system: "l[[ go k.c?*(x).ok ]]@(l,2)",
            clocks: &[("k", 0), ("l", 2)],
            opts: EngineOptions::closed(),
            label: "tau[m:l,k]",
            successor: Some(("k[[ c?*(x).ok ]]@(l,2)", &[("k", 0), ("l", 2)])),
            enabled: 1,
        },
        Fixture {
            rule: "IfP",
            system: "l[[ if a = b then c!<v> else d!<v> ]]",
            clocks: &[("l", 0)],
            opts: EngineOptions::closed(),
            label: "tau[p:l,l]",
            successor: Some(("l[[ d!<v> ]]", &[("l", 0)])),
            enabled: 1,
        },
    ]
}

/// Checks one fixture, returning a description of the first mismatch.
pub fn check_fixture(f: &Fixture) -> Result<(), String> {
    let start = config(f.system, f.clocks);
    let steps = enabled_transitions(&start, &f.opts);
    if steps.len() != f.enabled {
        let labels: Vec<String> = steps.iter().map(|(a, _)| a.to_string()).collect();
        return Err(format!("{}: expected {} transitions, got {labels:?}", f.rule, f.enabled));
    }
    let found: Vec<&Config> = steps.iter().filter(|(a, _)| a.to_string() == f.label).map(|(_, c)| c).collect();
    match f.successor {
        None if found.is_empty() => Ok(()),
        None => Err(format!("{}: label {} should be absent", f.rule, f.label)),
        Some((sys, cl)) => {
            let want_sys = NormSystem::from_system(&parse_system(sys).expect("expected successor parses"));
            let want_clocks = clocks(cl);
            if found.iter().any(|c| c.system == want_sys && c.clocks == want_clocks) {
                Ok(())
            } else {
                let got: Vec<String> = found.iter().map(|c| format!("{} {:?}", c.system, c.clocks)).collect();
                Err(format!("{}: label {} successor mismatch, want {want_sys}, got {got:?}", f.rule, f.label))
            }
        }
    }
}

type TraceKey = (Name, Option<Name>, Vec<Option<Name>>, u64);

/// Trace entities of a state, with restricted names blurred so that
/// canonical renaming between states does not matter.
fn trace_keys(c: &Config) -> Vec<TraceKey> {
    let bound = &c.system.bound;
    let open = |x: &Name| (!bound.contains(x)).then(|| x.clone());
    let mut keys: Vec<TraceKey> =
        c.system.traces().map(|(l, ch, args, ts)| (l.clone(), open(ch), args.iter().map(open).collect(), ts)).collect();
    keys.sort();
    keys
}

/// Per-location timestamp contiguity, clock monotonicity and trace
/// persistence over every edge of `g`.
pub fn tracing_violation(g: &LtsGraph, start: &ClockMap) -> Option<String> {
    for (id, c) in g.states.iter().enumerate() {
        let mut per_loc: std::collections::BTreeMap<&Name, Vec<u64>> = std::collections::BTreeMap::new();
        for (l, _, _, ts) in c.system.traces() {
            per_loc.entry(l).or_default().push(ts);
        }
        for (l, mut ts) in per_loc {
            ts.sort();
            let from = start.get(l).copied().unwrap_or(0);
            let to = c.clocks.get(l).copied().unwrap_or(0);
            if ts != (from..to).collect::<Vec<_>>() {
                return Some(format!("state {id}: log at {l} has stamps {ts:?}, clock range {from}..{to}"));
            }
        }
    }
    for e in &g.edges {
        let (a, b) = (&g.states[e.from], &g.states[e.to]);
        for (l, t) in &a.clocks {
            if b.clocks.get(l).copied().unwrap_or(0) < *t {
                return Some(format!("edge {} -> {}: clock at {l} went back", e.from, e.to));
            }
        }
        let (ka, mut kb) = (trace_keys(a), trace_keys(b));
        for k in ka {
            match kb.iter().position(|x| *x == k) {
                Some(i) => {
                    kb.remove(i);
                }
                None => return Some(format!("edge {} -> {} ({}): trace entity {k:?} lost", e.from, e.to, e.action)),
            }
        }
    }
    None
}

#[derive(Debug, Clone)]
pub enum Act {
    Out(&'static str, &'static str),
    In(&'static str),
}

/// Text of a random system with at most `max_outputs` outputs over three
/// locations and two channels, optionally restricting channel `a`.
pub fn arb_system(max_outputs: usize) -> impl Strategy<Value = String> {
    let act = prop_oneof![
        (prop::sample::select(vec!["a", "b"]), prop::sample::select(vec!["u", "v", "x"])).prop_map(|(c, v)| Act::Out(c, v)),
        prop::sample::select(vec!["a", "b"]).prop_map(Act::In),
    ];
    let proc_ = (prop::sample::select(vec!["l", "k", "h"]), prop::collection::vec(act, 1..=3));
    (prop::collection::vec(proc_, 1..=4), any::<bool>())
        .prop_filter("too many outputs", move |(procs, _)| {
            procs.iter().flat_map(|(_, acts)| acts).filter(|a| matches!(a, Act::Out(..))).count() <= max_outputs
        })
        .prop_map(|(procs, restrict)| {
            let parts: Vec<String> = procs
                .iter()
                .map(|(loc, acts)| {
                    let mut bound = false;
                    let mut body = Vec::new();
                    for a in acts {
                        match a {
                            Act::Out(c, v) => body.push(format!("{c}!<{}>", if *v == "x" && !bound { "u" } else { v })),
                            Act::In(c) => {
                                body.push(format!("{c}?(x)"));
                                bound = true;
                            }
                        }
                    }
                    if matches!(acts.last(), Some(Act::In(_))) {
                        body.push("stop".into());
                    }
                    format!("{loc}[[ {} ]]", body.join("."))
                })
                .collect();
            let sys = parts.join(" | ");
            if restrict {
                format!("new a.({sys})")
            } else {
                sys
            }
        })
}
