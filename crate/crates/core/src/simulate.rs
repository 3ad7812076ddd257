//! Seeded random walks for systems too large to explore exhaustively.

use crate::engine::{successors, Action, ClockMap, Config, EngineOptions, Verdict};
use crate::name::Name;
use crate::syntax::System;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimOptions {
    pub steps: usize,
    pub seed: u64,
    pub halt_on_first_fail: bool,
    /// Unfoldings per replication; `None` leaves replication unbounded.
    pub max_repeat_unfold: Option<u32>,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { steps: 1000, seed: 0, halt_on_first_fail: false, max_repeat_unfold: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogEntry {
    pub ts: u64,
    pub chan: Name,
    pub values: Vec<Name>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub actions: Vec<String>,
    pub logs: BTreeMap<Name, Vec<LogEntry>>,
    pub verdicts: Vec<(Name, Verdict)>,
    pub clocks: ClockMap,
    /// No transition was enabled at the end of the walk.
    pub stuck: bool,
    pub halted_on_fail: bool,
    pub final_system: String,
}

impl SimReport {
    fn new(c: &Config, seed: u64, actions: Vec<String>, stuck: bool, halted_on_fail: bool) -> SimReport {
        let logs = c
            .trace_logs()
            .into_iter()
            .map(|(l, log)| (l, log.into_iter().map(|(ts, chan, values)| LogEntry { ts, chan, values }).collect()))
            .collect();
        SimReport {
            seed,
            actions,
            logs,
            verdicts: c.verdicts.clone(),
            clocks: c.clocks.clone(),
            stuck,
            halted_on_fail,
            final_system: c.system.to_string(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("seed {}\nsteps {}\n", self.seed, self.actions.len());
        for (i, a) in self.actions.iter().enumerate() {
            out += &format!("  {i:>4} {a}\n");
        }
        for (l, log) in &self.logs {
            let entries: Vec<String> = log
                .iter()
                .map(|e| format!("{}<{}>@{}", e.chan, e.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","), e.ts))
                .collect();
            out += &format!("log {l}: {}\n", entries.join(" "));
        }
        for (l, v) in &self.verdicts {
            out += &format!("verdict {v} at {l}\n");
        }
        out += &format!("stuck {}\nfinal {}\n", self.stuck, self.final_system);
        out
    }
}

/// One path of at most `opts.steps` transitions, each chosen uniformly.
pub fn simulate(system: &System, clocks: &ClockMap, engine: &EngineOptions, opts: &SimOptions) -> SimReport {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut c = Config::initial(&system.with_fuel(opts.max_repeat_unfold), clocks);
    let mut actions = Vec::new();
    for _ in 0..opts.steps {
        if opts.halt_on_first_fail && c.has_verdict(Verdict::Fail) {
            return SimReport::new(&c, opts.seed, actions, false, true);
        }
        let mut succ = successors(&c, engine).transitions;
        if succ.is_empty() {
            return SimReport::new(&c, opts.seed, actions, true, false);
        }
        let (a, next): (Action, Config) = succ.swap_remove(rng.gen_range(0..succ.len()));
        actions.push(a.to_string());
        c = next;
    }
    let halted = opts.halt_on_first_fail && c.has_verdict(Verdict::Fail);
    let stuck = !halted && successors(&c, engine).transitions.is_empty();
    SimReport::new(&c, opts.seed, actions, stuck, halted)
}
