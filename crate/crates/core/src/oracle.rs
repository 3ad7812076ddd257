//! Reference matcher for contracts over located traces.
//!
//! A basic event matches every nonempty trace ending with that event, so a
//! contract describes the violating traces under multiple-match reading;
//! the operators are the usual ones over all split points.

use crate::engine::Config;
use crate::name::Name;
use crate::syntax::Contract;
use std::collections::{BTreeMap, HashMap};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LocatedEvent {
    pub loc: Name,
    pub chan: Name,
    pub values: Vec<Name>,
}

impl LocatedEvent {
    pub fn new(loc: impl Into<Name>, chan: impl Into<Name>, values: Vec<Name>) -> LocatedEvent {
        LocatedEvent { loc: loc.into(), chan: chan.into(), values }
    }
}

pub type LocatedTrace = Vec<LocatedEvent>;

struct Matcher<'a> {
    trace: &'a [LocatedEvent],
    nodes: Vec<&'a Contract>,
    ids: HashMap<*const Contract, usize>,
    memo: HashMap<(usize, usize, usize), bool>,
}

impl<'a> Matcher<'a> {
    fn new(e: &'a Contract, trace: &'a [LocatedEvent]) -> Self {
        let mut m = Matcher { trace, nodes: Vec::new(), ids: HashMap::new(), memo: HashMap::new() };
        m.index(e);
        m
    }

    fn index(&mut self, e: &'a Contract) {
        self.ids.insert(e as *const Contract, self.nodes.len());
        self.nodes.push(e);
        match e {
            Contract::Event { .. } => {}
            Contract::Star(a) => self.index(a),
            Contract::Seq(a, b) | Contract::Choice(a, b) => {
                self.index(a);
                self.index(b);
            }
        }
    }

    /// Whether `trace[i..j]` belongs to the language of `e`.
    fn matches(&mut self, e: &'a Contract, i: usize, j: usize) -> bool {
        let id = self.ids[&(e as *const Contract)];
        if let Some(&r) = self.memo.get(&(id, i, j)) {
            return r;
        }
        let r = match e {
            Contract::Event { chan, values, loc } => {
                j > i && {
                    let last = &self.trace[j - 1];
                    last.loc == *loc && last.chan == *chan && last.values == *values
                }
            }
            Contract::Seq(a, b) => (i..=j).any(|m| self.matches(a, i, m) && self.matches(b, m, j)),
            Contract::Choice(a, b) => self.matches(a, i, j) || self.matches(b, i, j),
            Contract::Star(a) => i == j || (i + 1..=j).any(|m| self.matches(a, i, m) && self.matches(e, m, j)),
        };
        self.memo.insert((id, i, j), r);
        r
    }
}

/// Whether the whole of `trace` is a violating trace of `e`.
pub fn oracle_match(e: &Contract, trace: &[LocatedEvent]) -> bool {
    Matcher::new(e, trace).matches(e, 0, trace.len())
}

/// Whether some prefix of `trace` (possibly empty) is a violating trace of `e`.
pub fn oracle_match_prefix(e: &Contract, trace: &[LocatedEvent]) -> bool {
    let mut m = Matcher::new(e, trace);
    (0..=trace.len()).any(|j| m.matches(e, 0, j))
}

/// Per-location logs of a configuration, oldest entry first.
pub fn location_logs(c: &Config) -> BTreeMap<Name, Vec<LocatedEvent>> {
    c.trace_logs()
        .into_iter()
        .map(|(loc, log)| {
            let events = log.into_iter().map(|(_, chan, values)| LocatedEvent { loc: loc.clone(), chan, values }).collect();
            (loc, events)
        })
        .collect()
}

/// Whether some interleaving of `logs` that keeps every location's own order
/// has a prefix violating `e`.
pub fn some_linearization_violates(e: &Contract, logs: &BTreeMap<Name, Vec<LocatedEvent>>) -> bool {
    let lists: Vec<&Vec<LocatedEvent>> = logs.values().collect();
    let mut pos = vec![0usize; lists.len()];
    let mut prefix = Vec::new();
    let mut seen = std::collections::HashSet::new();
    search(e, &lists, &mut pos, &mut prefix, &mut seen)
}

fn search(
    e: &Contract,
    lists: &[&Vec<LocatedEvent>],
    pos: &mut Vec<usize>,
    prefix: &mut Vec<LocatedEvent>,
    seen: &mut std::collections::HashSet<Vec<LocatedEvent>>,
) -> bool {
    if !seen.insert(prefix.clone()) {
        return false;
    }
    if oracle_match(e, prefix) {
        return true;
    }
    for i in 0..lists.len() {
        if pos[i] < lists[i].len() {
            prefix.push(lists[i][pos[i]].clone());
            pos[i] += 1;
            let found = search(e, lists, pos, prefix, seen);
            pos[i] -= 1;
            prefix.pop();
            if found {
                return true;
            }
        }
    }
    false
}
