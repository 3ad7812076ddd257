//! Bounded breadth-first construction of the reachable LTS.

use super::rules::successors;
use super::{Action, ClockMap, Config, EngineOptions};
use crate::syntax::System;
use std::collections::HashMap;
use std::fmt::Write;

pub type StateId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExploreBounds {
    pub max_repeat_unfold: u32,
    pub max_trace_len: usize,
    pub max_states: usize,
}

impl Default for ExploreBounds {
    fn default() -> Self {
        ExploreBounds { max_repeat_unfold: 3, max_trace_len: 64, max_states: 100_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub from: StateId,
    pub action: Action,
    pub to: StateId,
}

#[derive(Debug, Clone)]
pub struct LtsGraph {
    pub states: Vec<Config>,
    pub edges: Vec<Edge>,
    pub initial: StateId,
    /// Some bound cut exploration short, so the graph may be incomplete.
    pub truncated: bool,
}

fn expand(c: &Config, opts: &EngineOptions) -> super::Successors {
    successors(c, opts)
}

fn expand_sequential(frontier: &[Config], opts: &EngineOptions) -> Vec<super::Successors> {
    frontier.iter().map(|c| expand(c, opts)).collect()
}

#[cfg(feature = "parallel")]
fn expand_level(frontier: &[Config], opts: &EngineOptions) -> Vec<super::Successors> {
    use rayon::prelude::*;
    frontier.par_iter().map(|c| expand(c, opts)).collect()
}

#[cfg(not(feature = "parallel"))]
fn expand_level(frontier: &[Config], opts: &EngineOptions) -> Vec<super::Successors> {
    expand_sequential(frontier, opts)
}

type Expander = fn(&[Config], &EngineOptions) -> Vec<super::Successors>;

/// Explores from `system` under `clocks`. Every replication is given
/// `max_repeat_unfold` unfoldings; the resulting graph is identical with or
/// without the `parallel` feature.
pub fn explore(system: &System, clocks: &ClockMap, opts: &EngineOptions, bounds: &ExploreBounds) -> LtsGraph {
    let fueled = system.with_fuel(Some(bounds.max_repeat_unfold));
    explore_from(Config::initial(&fueled, clocks), opts, bounds)
}

/// [`explore`] on the calling thread only, whatever the feature set.
pub fn explore_sequential(system: &System, clocks: &ClockMap, opts: &EngineOptions, bounds: &ExploreBounds) -> LtsGraph {
    let fueled = system.with_fuel(Some(bounds.max_repeat_unfold));
    build(Config::initial(&fueled, clocks), opts, bounds, expand_sequential)
}

/// Explores from an explicit configuration, keeping its replication fuel.
pub fn explore_from(initial: Config, opts: &EngineOptions, bounds: &ExploreBounds) -> LtsGraph {
    build(initial, opts, bounds, expand_level)
}

fn build(initial: Config, opts: &EngineOptions, bounds: &ExploreBounds, expand_level: Expander) -> LtsGraph {
    let mut states = vec![initial.clone()];
    let mut index: HashMap<Config, StateId> = HashMap::from([(initial, 0)]);
    let mut depth = vec![0usize];
    let mut edges = Vec::new();
    let mut truncated = false;
    let mut frontier: Vec<StateId> = vec![0];

    while !frontier.is_empty() {
        let configs: Vec<Config> = frontier.iter().map(|&id| states[id].clone()).collect();
        let expanded = expand_level(&configs, opts);
        let mut next = Vec::new();
        for (&from, succ) in frontier.iter().zip(expanded) {
            truncated |= succ.blocked;
            let d = depth[from];
            if d >= bounds.max_trace_len {
                truncated |= !succ.transitions.is_empty();
                continue;
            }
            for (action, target) in succ.transitions {
                let to = match index.get(&target) {
                    Some(&id) => id,
                    None => {
                        if states.len() >= bounds.max_states {
                            truncated = true;
                            continue;
                        }
                        let id = states.len();
                        index.insert(target.clone(), id);
                        states.push(target);
                        depth.push(d + 1);
                        next.push(id);
                        id
                    }
                };
                edges.push(Edge { from, action, to });
            }
        }
        frontier = next;
    }
    LtsGraph { states, edges, initial: 0, truncated }
}

impl LtsGraph {
    pub fn successors(&self, s: StateId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == s)
    }

    /// Outgoing edge lists indexed by state.
    pub fn adjacency(&self) -> Vec<Vec<(Action, StateId)>> {
        let mut adj = vec![Vec::new(); self.states.len()];
        for e in &self.edges {
            adj[e.from].push((e.action.clone(), e.to));
        }
        adj
    }

    pub fn to_json(&self) -> serde_json::Value {
        let states: Vec<serde_json::Value> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, c)| {
                serde_json::json!({
                    "id": i,
                    "clocks": c.clocks.iter().map(|(k, v)| (k.to_string(), serde_json::json!(v))).collect::<serde_json::Map<_, _>>(),
                    "system": c.system.to_string(),
                    "verdicts": c.verdicts.iter().map(|(l, v)| serde_json::json!([l.to_string(), v.to_string()])).collect::<Vec<_>>(),
                })
            })
            .collect();
        let edges: Vec<serde_json::Value> = self
            .edges
            .iter()
            .map(|e| serde_json::json!({ "from": e.from, "label": e.action.to_string(), "to": e.to }))
            .collect();
        serde_json::json!({
            "initial": self.initial,
            "truncated": self.truncated,
            "states": states,
            "edges": edges,
        })
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph lts {\n");
        for (i, c) in self.states.iter().enumerate() {
            let shape = if i == self.initial { "doublecircle" } else { "circle" };
            let _ = writeln!(out, "  s{i} [shape={shape}, tooltip=\"{}\"];", escape(&c.system.to_string()));
        }
        for e in &self.edges {
            let _ = writeln!(out, "  s{} -> s{} [label=\"{}\"];", e.from, e.to, escape(&e.action.to_string()));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
