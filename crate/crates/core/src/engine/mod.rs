//! Tagged transition semantics over configurations.

mod explore;
mod rules;

pub use explore::{explore, explore_from, explore_sequential, Edge, ExploreBounds, LtsGraph, StateId};
pub use rules::{enabled_transitions, match_communication, successors, Successors};

use crate::name::Name;
use crate::normal::NormSystem;
use crate::syntax::System;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;

/// Next timestamp to be assigned at each location.
pub type ClockMap = BTreeMap<Name, u64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Ok,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Ok => "ok",
            Verdict::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Config {
    pub clocks: ClockMap,
    pub system: NormSystem,
    /// Sorted multiset of reported verdicts.
    pub verdicts: Vec<(Name, Verdict)>,
}

impl Config {
    /// Normalises `system`; locations without a clock start at timestamp 0.
    /// A clock already behind a trace entity of the initial system is moved
    /// just past it.
    pub fn initial(system: &System, clocks: &ClockMap) -> Config {
        let norm = NormSystem::from_system(system);
        let mut clocks = clocks.clone();
        for (loc, _, _, ts) in norm.traces() {
            let c = clocks.entry(loc.clone()).or_insert(0);
            *c = (*c).max(ts + 1);
        }
        Self::from_norm(norm, clocks, Vec::new())
    }

    pub(crate) fn from_norm(system: NormSystem, mut clocks: ClockMap, verdicts: Vec<(Name, Verdict)>) -> Config {
        for l in system.locations() {
            clocks.entry(l).or_insert(0);
        }
        Config { clocks, system, verdicts }
    }

    /// Per-location trace logs, ordered by timestamp.
    pub fn trace_logs(&self) -> BTreeMap<Name, Vec<(u64, Name, Vec<Name>)>> {
        let mut logs: BTreeMap<Name, Vec<(u64, Name, Vec<Name>)>> = BTreeMap::new();
        for (loc, chan, args, ts) in self.system.traces() {
            logs.entry(loc.clone()).or_default().push((ts, chan.clone(), args.to_vec()));
        }
        for log in logs.values_mut() {
            log.sort();
        }
        logs
    }

    pub fn has_verdict(&self, v: Verdict) -> bool {
        self.verdicts.iter().any(|(_, w)| *w == v)
    }
}

/// Initial configuration for `system` under `clocks`.
pub fn initial_config(system: &System, clocks: &ClockMap) -> Config {
    Config::initial(system, clocks)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TagKind {
    /// Process action.
    P,
    /// Monitor action.
    M,
    /// Trace action.
    T,
}

impl fmt::Display for TagKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TagKind::P => "p",
            TagKind::M => "m",
            TagKind::T => "t",
        })
    }
}

/// Action decoration. An open endpoint (`None`) is an unmatched partner
/// location: the reader of an output, or the source of an input.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Tag {
    pub kind: TagKind,
    pub from: Option<Name>,
    pub to: Option<Name>,
    pub ts: Option<u64>,
}

impl Tag {
    pub fn new(kind: TagKind, from: Option<Name>, to: Option<Name>, ts: Option<u64>) -> Tag {
        Tag { kind, from, to, ts }
    }

    pub fn local(kind: TagKind, at: &Name) -> Tag {
        Tag::new(kind, Some(at.clone()), Some(at.clone()), None)
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let end = |n: &Option<Name>| n.as_ref().map_or_else(|| "_".to_string(), |n| n.to_string());
        write!(f, "[{}:{},{}", self.kind, end(&self.from), end(&self.to))?;
        if let Some(ts) = self.ts {
            write!(f, ":{ts}")?;
        }
        f.write_str("]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionKind {
    Tau,
    Output,
    Input,
}

/// A decorated transition label.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Action {
    pub kind: ActionKind,
    pub tag: Tag,
    pub subject: Option<Name>,
    pub payload: Vec<Name>,
    pub extruded: Vec<Name>,
}

impl Action {
    pub fn tau(tag: Tag) -> Action {
        Action { kind: ActionKind::Tau, tag, subject: None, payload: Vec::new(), extruded: Vec::new() }
    }

    pub fn is_tau(&self) -> bool {
        self.kind == ActionKind::Tau
    }
}

pub(crate) fn write_names(f: &mut fmt::Formatter<'_>, names: &[Name]) -> fmt::Result {
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{n}")?;
    }
    Ok(())
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ActionKind::Tau => write!(f, "tau{}", self.tag),
            ActionKind::Output | ActionKind::Input => {
                if !self.extruded.is_empty() {
                    f.write_str("(")?;
                    write_names(f, &self.extruded)?;
                    f.write_str(")")?;
                }
                let subject = self.subject.as_ref().map(|s| s.to_string()).unwrap_or_default();
                let mark = if self.kind == ActionKind::Output { "!" } else { "?" };
                write!(f, "{subject}{mark}<")?;
                write_names(f, &self.payload)?;
                write!(f, ">{}", self.tag)
            }
        }
    }
}

/// Semantic switches for transition enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EngineOptions {
    /// Emit unmatched process and monitor outputs as external actions.
    pub open_outputs: bool,
    /// Emit trace entities as standalone broadcast outputs (self-loops).
    pub trace_outputs: bool,
    /// Values the environment may send to unmatched process and monitor inputs.
    pub env_values: Vec<Name>,
    /// Report `ok`/`fail` as monitor output actions instead of silent steps.
    pub observe_verdicts: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        EngineOptions { open_outputs: true, trace_outputs: false, env_values: Vec::new(), observe_verdicts: false }
    }
}

impl EngineOptions {
    /// Only internal steps: communications, skips and monitor bookkeeping.
    pub fn closed() -> Self {
        EngineOptions { open_outputs: false, ..Self::default() }
    }
}
