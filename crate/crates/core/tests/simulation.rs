mod common;

use common::clocks;
use mdpi::simulate::{simulate, SimOptions};
use mdpi::{explore, parse_system, EngineOptions, ExploreBounds};
use std::collections::{BTreeMap, BTreeSet};

type Logs = BTreeMap<String, Vec<String>>;

fn render(logs: BTreeMap<mdpi::Name, Vec<(u64, mdpi::Name, Vec<mdpi::Name>)>>) -> Logs {
    logs.into_iter().map(|(l, log)| (l.to_string(), log.into_iter().map(|(ts, c, _)| format!("{c}@{ts}")).collect())).collect()
}

#[test]
fn random_walks_reach_every_terminal_trace_set() {
    let sys = parse_system(include_str!("../../../data/relay.mdpi")).unwrap();
    let start = clocks(&[("l", 5), ("k", 9)]);
    let opts = EngineOptions::default();
    let g = explore(&sys, &start, &opts, &ExploreBounds::default());
    let adj = g.adjacency();
    let terminal: BTreeSet<Logs> =
        g.states.iter().enumerate().filter(|(i, _)| adj[*i].is_empty()).map(|(_, c)| render(c.trace_logs())).collect();
    assert!(terminal.len() >= 2);

    let mut hits: BTreeMap<Logs, usize> = BTreeMap::new();
    for seed in 0..1000 {
        let r = simulate(&sys, &start, &opts, &SimOptions { seed, ..SimOptions::default() });
        assert!(r.stuck);
        let logs: Logs = r.logs.iter().map(|(l, es)| (l.to_string(), es.iter().map(|e| format!("{}@{}", e.chan, e.ts)).collect())).collect();
        assert!(terminal.contains(&logs), "seed {seed} ended outside the explored terminal set: {logs:?}");
        *hits.entry(logs).or_default() += 1;
    }
    assert_eq!(hits.keys().cloned().collect::<BTreeSet<_>>(), terminal, "{hits:?}");
}
