//! Filter functions: partial, shape-preserving maps from decorated actions
//! to the actions of an observable LTS.

use crate::engine::{enabled_transitions, Action, ActionKind, Config, EngineOptions, LtsGraph, StateId, TagKind};
use crate::name::Name;
use serde::Deserialize;
use std::collections::VecDeque;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AbstractAction {
    pub kind: ActionKind,
    pub subject: Option<Name>,
    pub payload: Vec<Name>,
    /// Location pair kept by location-preserving filters; `None` entries are open endpoints.
    pub locations: Option<(Option<Name>, Option<Name>)>,
    pub extruded: Vec<Name>,
}

impl AbstractAction {
    pub fn tau() -> AbstractAction {
        AbstractAction { kind: ActionKind::Tau, subject: None, payload: Vec::new(), locations: None, extruded: Vec::new() }
    }

    pub fn is_tau(&self) -> bool {
        self.kind == ActionKind::Tau
    }

    fn stripped(a: &Action) -> AbstractAction {
        if a.is_tau() {
            return AbstractAction::tau();
        }
        AbstractAction {
            kind: a.kind,
            subject: a.subject.clone(),
            payload: a.payload.clone(),
            locations: None,
            extruded: a.extruded.clone(),
        }
    }
}

impl fmt::Display for AbstractAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_tau() {
            return f.write_str("tau");
        }
        if !self.extruded.is_empty() {
            f.write_str("(")?;
            crate::engine::write_names(f, &self.extruded)?;
            f.write_str(")")?;
        }
        let subject = self.subject.as_ref().map(|s| s.to_string()).unwrap_or_default();
        let mark = if self.kind == ActionKind::Output { "!" } else { "?" };
        write!(f, "{subject}{mark}<")?;
        crate::engine::write_names(f, &self.payload)?;
        f.write_str(">")?;
        if let Some((a, b)) = &self.locations {
            let end = |n: &Option<Name>| n.as_ref().map_or_else(|| "_".to_string(), |n| n.to_string());
            write!(f, "@({},{})", end(a), end(b))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Match {
    pub kind: Option<ActionKind>,
    pub tag: Option<TagKind>,
    pub from: Option<Name>,
    pub to: Option<Name>,
    /// Both tag locations present and equal (`true`) or different (`false`).
    pub same_location: Option<bool>,
}

impl Match {
    fn accepts(&self, a: &Action) -> bool {
        self.kind.map_or(true, |k| k == a.kind)
            && self.tag.map_or(true, |t| t == a.tag.kind)
            && self.from.as_ref().map_or(true, |l| a.tag.from.as_ref() == Some(l))
            && self.to.as_ref().map_or(true, |l| a.tag.to.as_ref() == Some(l))
            && self.same_location.map_or(true, |same| match (&a.tag.from, &a.tag.to) {
                (Some(x), Some(y)) => (x == y) == same,
                _ => false,
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emit {
    /// The filter is undefined on matching actions.
    Drop,
    /// Remove all decoration.
    Strip,
    /// Remove the tag kind but keep the location pair (external actions only).
    KeepLocations,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub when: Match,
    pub emit: Emit,
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("unknown filter `{0}`")]
    Unknown(String),
    #[error("rule {0} could map a silent action to a decorated one")]
    DecoratedTau(usize),
    #[error("invalid filter description: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid filter description: {0}")]
    Field(String),
}

/// An ordered list of rules; the first matching rule decides, and an action
/// matched by no rule is outside the filter's domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    pub name: String,
    rules: Vec<Rule>,
}

impl Filter {
    pub fn new(name: impl Into<String>, rules: Vec<Rule>) -> Result<Filter, FilterError> {
        // Silent actions never reach rules after one that catches all of them.
        let mut taus_decided = false;
        for (i, r) in rules.iter().enumerate() {
            let may_be_tau = r.when.kind.map_or(true, |k| k == ActionKind::Tau);
            if r.emit == Emit::KeepLocations && may_be_tau && !taus_decided {
                return Err(FilterError::DecoratedTau(i));
            }
            let w = &r.when;
            taus_decided |= may_be_tau && w.tag.is_none() && w.from.is_none() && w.to.is_none() && w.same_location.is_none();
        }
        Ok(Filter { name: name.into(), rules })
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn apply(&self, a: &Action) -> Option<AbstractAction> {
        let rule = self.rules.iter().find(|r| r.when.accepts(a))?;
        match rule.emit {
            Emit::Drop => None,
            Emit::Strip => Some(AbstractAction::stripped(a)),
            Emit::KeepLocations => {
                let mut out = AbstractAction::stripped(a);
                out.locations = Some((a.tag.from.clone(), a.tag.to.clone()));
                Some(out)
            }
        }
    }

    /// Total filter removing every tag.
    pub fn ntg() -> Filter {
        Filter { name: "ntg".into(), rules: vec![Rule { when: Match::default(), emit: Emit::Strip }] }
    }

    /// Silent steps and process external actions (with their locations); nothing else.
    pub fn prc() -> Filter {
        Filter {
            name: "prc".into(),
            rules: vec![
                Rule { when: Match { kind: Some(ActionKind::Tau), ..Match::default() }, emit: Emit::Strip },
                Rule { when: Match { tag: Some(TagKind::P), ..Match::default() }, emit: Emit::KeepLocations },
            ],
        }
    }

    /// Rules out silent trace steps between distinct locations; everything else is stripped.
    pub fn ltr() -> Filter {
        Self::ltr_with(false)
    }

    /// [`Filter::ltr`], optionally also ruling out monitor steps between distinct locations.
    pub fn ltr_with(local_monitor_steps: bool) -> Filter {
        let remote = |tag| Rule {
            when: Match { kind: Some(ActionKind::Tau), tag: Some(tag), same_location: Some(false), ..Match::default() },
            emit: Emit::Drop,
        };
        let mut rules = vec![remote(TagKind::T)];
        if local_monitor_steps {
            rules.push(remote(TagKind::M));
        }
        rules.push(Rule { when: Match::default(), emit: Emit::Strip });
        Filter { name: if local_monitor_steps { "ltr-strict".into() } else { "ltr".into() }, rules }
    }

    pub fn builtin(name: &str) -> Result<Filter, FilterError> {
        match name {
            "ntg" => Ok(Self::ntg()),
            "prc" => Ok(Self::prc()),
            "ltr" => Ok(Self::ltr()),
            "ltr-strict" => Ok(Self::ltr_with(true)),
            other => Err(FilterError::Unknown(other.to_string())),
        }
    }

    /// Reads the JSON form:
    /// `{"name": "...", "rules": [{"match": {"kind": "tau", "tag": "t", "same_location": false}, "emit": "drop"}]}`.
    pub fn from_json(text: &str) -> Result<Filter, FilterError> {
        let spec: FilterSpec = serde_json::from_str(text)?;
        let mut rules = Vec::new();
        for r in spec.rules {
            let kind = match r.when.kind.as_deref() {
                None => None,
                Some("tau") => Some(ActionKind::Tau),
                Some("output") => Some(ActionKind::Output),
                Some("input") => Some(ActionKind::Input),
                Some(other) => return Err(FilterError::Field(format!("unknown action kind `{other}`"))),
            };
            let tag = match r.when.tag.as_deref() {
                None => None,
                Some("p") => Some(TagKind::P),
                Some("m") => Some(TagKind::M),
                Some("t") => Some(TagKind::T),
                Some(other) => return Err(FilterError::Field(format!("unknown tag kind `{other}`"))),
            };
            let when = Match {
                kind,
                tag,
                from: r.when.from.as_deref().map(Name::id),
                to: r.when.to.as_deref().map(Name::id),
                same_location: r.when.same_location,
            };
            rules.push(Rule { when, emit: r.emit });
        }
        Filter::new(spec.name.unwrap_or_else(|| "custom".into()), rules)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterSpec {
    name: Option<String>,
    rules: Vec<RuleSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    #[serde(rename = "match", default)]
    when: MatchSpec,
    emit: Emit,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct MatchSpec {
    kind: Option<String>,
    tag: Option<String>,
    from: Option<String>,
    to: Option<String>,
    same_location: Option<bool>,
}

pub fn apply_filter(f: &Filter, a: &Action) -> Option<AbstractAction> {
    f.apply(a)
}

/// Transitions of the filtered LTS out of `c`.
pub fn filtered_transitions(c: &Config, f: &Filter, opts: &EngineOptions) -> Vec<(AbstractAction, Config)> {
    enabled_transitions(c, opts).into_iter().filter_map(|(a, d)| f.apply(&a).map(|b| (b, d))).collect()
}

/// A finite LTS over abstract actions.
#[derive(Debug, Clone)]
pub struct FilteredLts {
    /// Number of states.
    pub size: usize,
    /// Configurations by state, when built from an explored graph.
    pub states: Vec<Config>,
    pub edges: Vec<(StateId, AbstractAction, StateId)>,
    pub initial: StateId,
    pub truncated: bool,
}

impl FilteredLts {
    /// Applies `f` to every edge of `g` and keeps the part reachable from the initial state.
    pub fn from_graph(g: &LtsGraph, f: &Filter) -> FilteredLts {
        let mut adj: Vec<Vec<(AbstractAction, StateId)>> = vec![Vec::new(); g.states.len()];
        for e in &g.edges {
            if let Some(a) = f.apply(&e.action) {
                adj[e.from].push((a, e.to));
            }
        }
        let mut new_id = vec![usize::MAX; g.states.len()];
        let mut order = vec![g.initial];
        new_id[g.initial] = 0;
        let mut queue = VecDeque::from([g.initial]);
        while let Some(s) = queue.pop_front() {
            for (_, t) in &adj[s] {
                if new_id[*t] == usize::MAX {
                    new_id[*t] = order.len();
                    order.push(*t);
                    queue.push_back(*t);
                }
            }
        }
        let mut edges = Vec::new();
        for &s in &order {
            for (a, t) in &adj[s] {
                edges.push((new_id[s], a.clone(), new_id[*t]));
            }
        }
        edges.sort();
        edges.dedup();
        FilteredLts { size: order.len(), states: order.iter().map(|&s| g.states[s].clone()).collect(), edges, initial: 0, truncated: g.truncated }
    }

    /// An LTS given directly by its edges, without configurations.
    pub fn from_edges(size: usize, mut edges: Vec<(StateId, AbstractAction, StateId)>, initial: StateId) -> FilteredLts {
        edges.sort();
        edges.dedup();
        FilteredLts { size, states: Vec::new(), edges, initial, truncated: false }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }
}
